"""Error of the n-step lattice value against a fine-lattice reference.

The reference has no closed form for game options; it is the average of
the lattice values at ``ref_n`` and ``ref_n + 1``, which damps the even/odd
oscillation of CRR trees.  Its own error is of the same order as the
quantity being measured at ``ref_n``, so ``max(ns) <= ref_n / 8`` is enforced.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .lattice import build_lattice, dynkin_value
from .model import ConfigError, DomainError, GameOptionSpec, MarketParams

MIN_REF_N = 2**12
RATE = 0.25


def reference_value(spec: GameOptionSpec, market: MarketParams, ref_n: int = 2**13,
                    scheme: str = "crr") -> float:
    if ref_n < MIN_REF_N:
        raise ConfigError("ref_n", f"must be >= {MIN_REF_N}, got {ref_n}")
    a = dynkin_value(build_lattice(market, ref_n, scheme), spec, market)
    b = dynkin_value(build_lattice(market, ref_n + 1, scheme), spec, market)
    return 0.5 * (a + b)


def payoff_scale(spec: GameOptionSpec, market: MarketParams) -> float:
    """``F_0(z) + penalty_0(z) + z + 1``."""
    z = market.z
    return float(spec.exercise(0.0, z) + spec.penalty(0.0, z)) + z + 1.0


def _fit_rate(ns, errs):
    """Slope of log error on log n, sign flipped; zero errors are left out."""
    ns, errs = np.asarray(ns, float), np.asarray(errs, float)
    keep = errs > 0
    if keep.sum() < 2:
        return None
    slope = np.polyfit(np.log(ns[keep]), np.log(errs[keep]), 1)[0]
    return float(-slope)


@dataclass
class ErrorTable:
    ns: list
    values: list
    v_ref: float
    ref_n: int
    payoff_scale: float
    abs_errors: list = field(init=False)
    c_hat: float = field(init=False)
    rate_hat: float | None = field(init=False)
    rate_hat_all: float | None = field(init=False)
    rate_skipped: bool = field(init=False)

    def __post_init__(self):
        self.abs_errors = [abs(v - self.v_ref) for v in self.values]
        norm = [e * n**RATE / self.payoff_scale for n, e in zip(self.ns, self.abs_errors)]
        self.c_hat = max(norm)
        self.rate_hat_all = _fit_rate(self.ns, self.abs_errors)
        # the two smallest n are pre-asymptotic
        tail = slice(2, None) if len(self.ns) > 3 else slice(None)
        self.rate_hat = _fit_rate(self.ns[tail], self.abs_errors[tail])
        self.rate_skipped = self.rate_hat is None

    def bound(self, n: int, c: float | None = None) -> float:
        """``C (F_0 + penalty_0 + z + 1) n^(-1/4)`` with ``C = c_hat`` unless given."""
        c = self.c_hat if c is None else c
        return c * self.payoff_scale * n**-RATE

    def holds(self, c: float, rtol: float = 1e-12) -> bool:
        """True if every error is under the bound; ``rtol`` absorbs the rounding at the maximizing n."""
        return all(e <= self.bound(n, c) * (1 + rtol) for n, e in zip(self.ns, self.abs_errors))

    def rows(self):
        return list(zip(self.ns, self.values, [self.v_ref] * len(self.ns), self.abs_errors,
                        [self.bound(n) for n in self.ns]))

    def summary(self) -> dict:
        return {
            "C_hat": self.c_hat,
            "rate_hat": self.rate_hat,
            "rate_hat_unfiltered": self.rate_hat_all,
            "rate_skipped": self.rate_skipped,
            "payoff_scale": self.payoff_scale,
            "ref_n": self.ref_n,
            "V_ref": self.v_ref,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "V_n", "V_ref", "abs_error", "bound_rhs"])
            for n, v, ref, err, rhs in self.rows():
                w.writerow([n, repr(v), repr(ref), repr(err), repr(rhs)])

    def summary_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def error_curve(spec: GameOptionSpec, market: MarketParams, ns, ref_n: int = 2**13,
                scheme: str = "crr", v_ref: float | None = None) -> ErrorTable:
    """Lattice error for each n against the reference value.

    ``v_ref`` may be passed to reuse a reference computed earlier with the
    same ``ref_n``.
    """
    ns = sorted(int(n) for n in ns)
    if not ns:
        raise DomainError("ns must not be empty")
    if ns[-1] > ref_n / 8:
        raise ConfigError("ns", f"max(ns)={ns[-1]} exceeds ref_n/8={ref_n / 8:g}")
    if v_ref is None:
        v_ref = reference_value(spec, market, ref_n, scheme)
    values = [dynkin_value(build_lattice(market, n, scheme), spec, market) for n in ns]
    return ErrorTable(ns, values, v_ref, ref_n, payoff_scale(spec, market))


def rate_summary(table: ErrorTable) -> str:
    if table.rate_skipped:
        return "rate fit skipped: all errors are zero"
    return f"rate_hat={table.rate_hat:.3f} (unfiltered {table.rate_hat_all:.3f}), C_hat={table.c_hat:.4g}"
