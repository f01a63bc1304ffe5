"""Batch runner: ``gameopt --config run.json [--command NAME] [overrides]``.

Commands: ``price``, ``converge``, ``hedge``, ``embed-diag``.  Exit status
is 0 on success, 2 on a configuration error, 3 on a runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .convergence import error_curve, rate_summary
from .embedding import embedding_run, write_embedding_csv
from .hedging import DEFAULT_DT_MAX, shortfall_report
from .lattice import build_lattice, hedge_deltas, solve_dynkin
from .model import ConfigError, GameOptionSpec, MarketParams

COMMANDS = ("price", "converge", "hedge", "embed-diag")
DEFAULT_NS = [16, 32, 64, 128, 256, 512, 1024]

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


@dataclass
class RunConfig:
    command: str
    market: MarketParams
    spec: GameOptionSpec
    n: int | None = None
    ns: list | None = None
    paths: int = 1000
    seed: int = 0
    out: str = "out"
    dt_max: float = DEFAULT_DT_MAX
    tau_family_size: int = 16
    ref_n: int = 2**13

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be a JSON object")
        command = data.get("command")
        if command not in COMMANDS:
            raise ConfigError("command", f"expected one of {', '.join(COMMANDS)}, got {command!r}")
        if "market" not in data:
            raise ConfigError("market", "missing")
        market = MarketParams.from_dict(data["market"])
        spec = GameOptionSpec.from_dict(data.get("spec", data))
        cfg = cls(command, market, spec)
        for name, kind in (("n", int), ("paths", int), ("seed", int), ("tau_family_size", int),
                           ("ref_n", int), ("dt_max", float), ("out", str)):
            if data.get(name) is not None:
                setattr(cfg, name, _typed(data[name], kind, name))
        if data.get("ns") is not None:
            if not isinstance(data["ns"], list):
                raise ConfigError("ns", "must be a list of integers")
            cfg.ns = [_typed(v, int, "ns") for v in data["ns"]]
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "market": self.market.to_dict(),
            "spec": self.spec.to_dict(),
            "n": self.n,
            "ns": self.ns,
            "paths": self.paths,
            "seed": self.seed,
            "out": self.out,
            "dt_max": self.dt_max,
            "tau_family_size": self.tau_family_size,
            "ref_n": self.ref_n,
        }

    def validate(self) -> None:
        if self.n is not None and self.n < 1:
            raise ConfigError("n", "must be >= 1")
        if self.ns is not None and (not self.ns or min(self.ns) < 1):
            raise ConfigError("ns", "must be a non-empty list of integers >= 1")
        if self.paths < 1:
            raise ConfigError("paths", "must be >= 1")
        if not self.dt_max > 0:
            raise ConfigError("dt_max", "must be > 0")
        if self.tau_family_size < 2:
            raise ConfigError("tau_family_size", "must be >= 2")
        if self.command in ("price", "embed-diag") and self.n is None:
            raise ConfigError("n", f"required for {self.command}")
        if self.command == "hedge" and self.n is None and self.ns is None:
            raise ConfigError("n", "hedge needs n or ns")


def _typed(value, kind, name):
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"expected a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(name, f"expected a string, got {value!r}")
    return value


def _write_json(path: Path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


# --------------------------------------------------------------------------- #
# Commands
# --------------------------------------------------------------------------- #

def cmd_price(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    lattice = build_lattice(cfg.market, cfg.n)
    sol = hedge_deltas(solve_dynkin(lattice, cfg.spec, cfg.market))
    sol.to_csv(out / "solution.csv")
    n = lattice.n
    summary = {
        "command": "price",
        "n": n,
        "V0": sol.initial_capital,
        "cancel_region_size": int(sol.cancel_region[:n].sum()),
        "exercise_region_size": int(sol.exercise_region[:n].sum()),
        "config": cfg.to_dict(),
    }
    _write_json(out / "summary.json", summary)
    print(f"V(0,0)={summary['V0']:.10g} cancel_nodes={summary['cancel_region_size']} "
          f"exercise_nodes={summary['exercise_region_size']}")
    return summary


def cmd_converge(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    table = error_curve(cfg.spec, cfg.market, cfg.ns or DEFAULT_NS, cfg.ref_n)
    table.to_csv(out / "errors.csv")
    summary = {"command": "converge", **table.summary(), "config": cfg.to_dict()}
    _write_json(out / "summary.json", summary)
    print(rate_summary(table))
    return summary


def cmd_hedge(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    ns = [cfg.n] if cfg.n is not None else list(cfg.ns)
    reports = [shortfall_report(cfg.market, cfg.spec, n, cfg.paths, cfg.seed,
                                cfg.tau_family_size, cfg.dt_max) for n in ns]
    payload = reports[0].to_dict() if cfg.n is not None else [r.to_dict() for r in reports]
    _write_json(out / "shortfall.json", payload)
    summary = {
        "command": "hedge",
        "rows": [{"n": r.n, "eq23": r.estimate_eq23, "eq24": r.estimate_eq24,
                  "psi": r.psi_mean} for r in reports],
        "config": cfg.to_dict(),
    }
    _write_json(out / "summary.json", summary)
    for r in reports:
        print(f"n={r.n} eq23={r.estimate_eq23:.6g}+-{r.se_eq23:.2g} "
              f"eq24={r.estimate_eq24:.6g}+-{r.se_eq24:.2g} psi={r.psi_mean:.6g}")
    return summary


def cmd_embed_diag(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    embedded, stats = embedding_run(cfg.seed, cfg.n, cfg.market.T, cfg.paths, cfg.dt_max)
    write_embedding_csv(out / "embed.csv", embedded, stats)
    summary = {"command": "embed-diag", **stats.summary(), "config": cfg.to_dict()}
    _write_json(out / "summary.json", summary)
    print(f"mean theta_n={stats.theta_n_mean:.6g} (T={cfg.market.T}, se={stats.theta_n_se:.2g}) "
          f"max step deviation={stats.max_step_deviation:.3g}")
    return summary


HANDLERS = {"price": cmd_price, "converge": cmd_converge, "hedge": cmd_hedge,
            "embed-diag": cmd_embed_diag}


# --------------------------------------------------------------------------- #
# Entry point
# --------------------------------------------------------------------------- #

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gameopt", description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, help="JSON run configuration")
    ap.add_argument("--command", choices=COMMANDS)
    ap.add_argument("--n", type=int)
    ap.add_argument("--ns", help="comma-separated list, e.g. 16,32,64")
    ap.add_argument("--paths", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--dt-max", dest="dt_max", type=float)
    ap.add_argument("--tau-family", dest="tau_family_size", type=int)
    ap.add_argument("--ref-n", dest="ref_n", type=int)
    return ap


def load_config(args: argparse.Namespace) -> RunConfig:
    data = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except FileNotFoundError:
            raise ConfigError("config", f"no such file {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be a JSON object")
    for name in ("command", "n", "paths", "seed", "out", "dt_max", "tau_family_size", "ref_n"):
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    if args.ns is not None:
        try:
            data["ns"] = [int(v) for v in args.ns.split(",") if v.strip()]
        except ValueError:
            raise ConfigError("ns", f"expected comma-separated integers, got {args.ns!r}") from None
    return RunConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any failure maps to the runtime exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
