"""Game-option payoffs: exercise value F, penalty, cancellation value G.

The seller who cancels at time t < T pays ``G_t = F_t + penalty_t``; at the
horizon nothing extra is paid, ``G_T = F_T``.  Every payoff here is a
function of (time, stock) only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np


class DomainError(ValueError):
    """Argument outside the domain of a payoff or stopping-time map."""


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass(frozen=True)
class MarketParams:
    z: float
    r: float
    kappa: float
    T: float

    def __post_init__(self):
        for name in ("z", "kappa", "T"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"market.{name}", "must be > 0")
        if not self.r >= 0:
            raise ConfigError("market.r", "must be >= 0")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MarketParams":
        values = {}
        for name in ("z", "r", "kappa", "T"):
            if name not in data:
                raise ConfigError(f"market.{name}", "missing")
            values[name] = _number(data[name], f"market.{name}")
        return cls(**values)

    def to_dict(self) -> dict:
        return {"z": self.z, "r": self.r, "kappa": self.kappa, "T": self.T}


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(where, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(where, "must be finite")
    return float(value)


# --------------------------------------------------------------------------- #
# Payoff family
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class Vanilla:
    """``notional * (K - S)^+`` for a put, ``notional * (S - K)^+`` for a call."""

    kind: str
    strike: float
    notional: float = 1.0

    def __post_init__(self):
        if self.kind not in ("put", "call"):
            raise ConfigError("payoff.kind", f"unknown kind {self.kind!r}")
        if not self.strike >= 0:
            raise ConfigError("payoff.strike", "must be >= 0")
        if not self.notional >= 0:
            raise ConfigError("payoff.notional", "must be >= 0")

    def __call__(self, t, stock):
        if self.kind == "put":
            return self.notional * np.maximum(self.strike - stock, 0.0)
        return self.notional * np.maximum(stock - self.strike, 0.0)

    def scaled(self, c: float) -> "Vanilla":
        return Vanilla(self.kind, self.strike, self.notional * c)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "strike": self.strike}
        if self.notional != 1.0:
            out["notional"] = self.notional
        return out


@dataclass(frozen=True)
class Affine:
    """``a + b * S``; a constant penalty is the case ``b == 0``."""

    a: float
    b: float = 0.0

    def __post_init__(self):
        if not (self.a >= 0 and self.b >= 0):
            raise ConfigError("penalty", "affine coefficients must be >= 0")

    def __call__(self, t, stock):
        return self.a + self.b * np.asarray(stock, dtype=float)

    def scaled(self, c: float) -> "Affine":
        return Affine(self.a * c, self.b * c)

    def to_dict(self) -> dict:
        if self.b == 0.0:
            return {"kind": "const", "value": self.a}
        return {"kind": "affine", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Table:
    """Piecewise-linear table in the stock, optionally also in time.

    ``values`` is 1-D (one entry per stock knot) or 2-D with one row per
    entry of ``times``.  Outside the knots the table is extended flat.
    """

    stocks: tuple
    values: tuple
    times: tuple | None = None
    where: str = field(default="payoff", compare=False)

    def __post_init__(self):
        stocks = np.asarray(self.stocks, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if stocks.ndim != 1 or stocks.size < 1 or np.any(np.diff(stocks) <= 0):
            raise ConfigError(f"{self.where}.stocks", "must be a strictly increasing list")
        if self.times is None:
            if values.shape != stocks.shape:
                raise ConfigError(f"{self.where}.values", "must match stocks in length")
        else:
            times = np.asarray(self.times, dtype=float)
            if times.ndim != 1 or times.size < 1 or np.any(np.diff(times) <= 0):
                raise ConfigError(f"{self.where}.times", "must be a strictly increasing list")
            if values.shape != (times.size, stocks.size):
                raise ConfigError(f"{self.where}.values", "must be a times x stocks grid")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ConfigError(f"{self.where}.values", "must be finite and >= 0")

    def __call__(self, t, stock):
        xs = np.asarray(self.stocks, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if self.times is None:
            return np.interp(stock, xs, vals)
        ts = np.asarray(self.times, dtype=float)
        i = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, ts.size - 1))
        lo = np.interp(stock, xs, vals[i])
        if i == ts.size - 1 or t <= ts[0]:
            return lo
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        return (1.0 - w) * lo + w * np.interp(stock, xs, vals[i + 1])

    def scaled(self, c: float) -> "Table":
        vals = (np.asarray(self.values, dtype=float) * c).tolist()
        return Table(self.stocks, _freeze(vals), self.times, self.where)

    def to_dict(self) -> dict:
        out = {"kind": "table", "stocks": list(self.stocks), "values": _thaw(self.values)}
        if self.times is not None:
            out["times"] = list(self.times)
        return out


def _freeze(x):
    return tuple(_freeze(v) for v in x) if isinstance(x, (list, tuple)) else float(x)


def _thaw(x):
    return [_thaw(v) for v in x] if isinstance(x, tuple) else x


def _table_from(data: Mapping, where: str) -> Table:
    for key in ("stocks", "values"):
        if key not in data:
            raise ConfigError(f"{where}.{key}", "missing")
    try:
        return Table(
            stocks=_freeze(list(data["stocks"])),
            values=_freeze(list(data["values"])),
            times=_freeze(list(data["times"])) if data.get("times") is not None else None,
            where=where,
        )
    except TypeError:
        raise ConfigError(where, "table entries must be numbers") from None


def payoff_from_dict(data: Mapping) -> Vanilla | Table:
    kind = data.get("kind")
    if kind in ("put", "call"):
        if "strike" not in data:
            raise ConfigError("payoff.strike", "missing")
        return Vanilla(kind, _number(data["strike"], "payoff.strike"),
                       _number(data.get("notional", 1.0), "payoff.notional"))
    if kind == "table":
        return _table_from(data, "payoff")
    raise ConfigError("payoff.kind", f"expected put, call or table, got {kind!r}")


def penalty_from_dict(data: Mapping) -> Affine | Table:
    kind = data.get("kind")
    if kind == "const":
        if "value" not in data:
            raise ConfigError("penalty.value", "missing")
        return Affine(_number(data["value"], "penalty.value"))
    if kind == "affine":
        for key in ("a", "b"):
            if key not in data:
                raise ConfigError(f"penalty.{key}", "missing")
        return Affine(_number(data["a"], "penalty.a"), _number(data["b"], "penalty.b"))
    if kind == "table":
        return _table_from(data, "penalty")
    raise ConfigError("penalty.kind", f"expected const, affine or table, got {kind!r}")


@dataclass(frozen=True)
class GameOptionSpec:
    """Exercise payoff, cancellation penalty and an optional Lipschitz hint.

    The hint documents the Lipschitz constant of the payoffs; it is stored
    and serialized but never checked.
    """

    exercise: Vanilla | Table
    penalty: Affine | Table
    lipschitz_hint: float | None = None

    @classmethod
    def put(cls, strike: float, penalty: float = 0.0) -> "GameOptionSpec":
        return cls(Vanilla("put", strike), Affine(penalty))

    @classmethod
    def call(cls, strike: float, penalty: float = 0.0) -> "GameOptionSpec":
        return cls(Vanilla("call", strike), Affine(penalty))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GameOptionSpec":
        if "payoff" not in data:
            raise ConfigError("payoff", "missing")
        penalty = data.get("penalty", {"kind": "const", "value": 0.0})
        hint = data.get("lipschitz_hint")
        if hint is not None:
            hint = _number(hint, "lipschitz_hint")
        return cls(payoff_from_dict(data["payoff"]), penalty_from_dict(penalty), hint)

    def to_dict(self) -> dict:
        return {
            "payoff": self.exercise.to_dict(),
            "penalty": self.penalty.to_dict(),
            "lipschitz_hint": self.lipschitz_hint,
        }

    def scaled(self, c: float) -> "GameOptionSpec":
        """Both payoffs multiplied by ``c > 0``."""
        return GameOptionSpec(self.exercise.scaled(c), self.penalty.scaled(c), self.lipschitz_hint)


# --------------------------------------------------------------------------- #
# Payoff evaluation
# --------------------------------------------------------------------------- #

def _check_stock(stock):
    if np.any(np.asarray(stock) < 0):
        raise DomainError("stock must be >= 0")


def exercise_payoff(spec: GameOptionSpec, t: float, stock, horizon: float | None = None):
    """Exercise value ``F_t(stock)``.

    ``horizon`` is only used for the domain check ``0 <= t <= horizon``.
    """
    if t < 0 or (horizon is not None and t > horizon):
        raise DomainError(f"t={t} outside [0, {horizon}]")
    _check_stock(stock)
    return spec.exercise(t, stock)


def cancellation_payoff(spec: GameOptionSpec, t: float, stock, horizon: float):
    """Cancellation value: ``F_t + penalty_t`` before the horizon, ``F_T`` at it."""
    if t > horizon:
        raise DomainError(f"cancellation at t={t} after the horizon {horizon}")
    f = exercise_payoff(spec, t, stock)
    if t == horizon:
        return f
    return f + spec.penalty(t, stock)


def discounted_payoff(spec: GameOptionSpec, market: MarketParams, s: float, t: float, stock_at_min):
    """``exp(-r min(s, t))`` times the payoff for cancel time ``s``, exercise time ``t``.

    The seller's payoff applies only when ``s < t``; ties go to exercise.
    """
    T = market.T
    for name, v in (("s", s), ("t", t)):
        if not 0 <= v <= T:
            raise DomainError(f"{name}={v} outside [0, {T}]")
    if s < t:
        value = cancellation_payoff(spec, s, stock_at_min, T)
    else:
        value = exercise_payoff(spec, t, stock_at_min)
    return math.exp(-market.r * min(s, t)) * value
