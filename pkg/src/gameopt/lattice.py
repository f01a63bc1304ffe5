"""Binomial market and the discrete Dynkin game on it.

All lattice quantities are kept in discounted units (multiplied by
``exp(-r k dt)``), so the value process and the hedge are martingale-type
objects under the lattice measure.

Arrays indexed by node are ``(n + 1, n + 1)`` with entry ``[k, j]`` for step
``k`` and up-count ``j <= k``; entries with ``j > k`` are NaN.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .model import ConfigError, GameOptionSpec, MarketParams

SCHEMES = ("crr", "jr")
MAX_BRUTE_FORCE_STEPS = 12


@dataclass(frozen=True)
class Lattice:
    """Recombining n-step binomial market.

    ``scheme="crr"`` is Cox-Ross-Rubinstein (``u = exp(kappa sqrt(dt))``,
    ``d = 1/u``).  ``scheme="jr"`` is the equal-probability variant whose log
    steps carry the drift ``(r - kappa^2/2) dt``; its node prices coincide
    with the Brownian stock sampled at the embedded exit times up to the time
    shift, which is what the hedge simulation needs.
    """

    n: int
    z: float
    r: float
    T: float
    dt: float
    log_u: float
    log_d: float
    p_star: float
    scheme: str = "crr"

    @property
    def u(self) -> float:
        return math.exp(self.log_u)

    @property
    def d(self) -> float:
        return math.exp(self.log_d)

    def time(self, k: int) -> float:
        # exact T at the last step, which the horizon rule depends on
        return self.T if k == self.n else k * self.T / self.n

    def discount(self, k: int) -> float:
        return math.exp(-self.r * self.time(k))

    def stock(self, k: int, j=None):
        """Stock price at step ``k``: all ``k + 1`` nodes, or up-count(s) ``j``."""
        if j is None:
            j = np.arange(k + 1)
        return self.z * np.exp(j * self.log_u + (k - j) * self.log_d)

    def discounted_stock(self, k: int, j=None):
        return self.discount(k) * self.stock(k, j)


def _log_steps(market: MarketParams, n: int, scheme: str):
    dt = market.T / n
    step = market.kappa * math.sqrt(dt)
    if scheme == "crr":
        return step, -step
    drift = (market.r - 0.5 * market.kappa**2) * dt
    return drift + step, drift - step


def _p_star(market: MarketParams, n: int, scheme: str) -> float:
    log_u, log_d = _log_steps(market, n, scheme)
    u, d = math.exp(log_u), math.exp(log_d)
    return (math.exp(market.r * market.T / n) - d) / (u - d)


def minimal_steps(market: MarketParams, scheme: str = "crr") -> int:
    """Smallest n for which the lattice risk-neutral probability lies in (0, 1)."""
    # CRR needs r T / n < kappa sqrt(T / n), i.e. n > (r / kappa)^2 T
    n = max(1, int((market.r / market.kappa) ** 2 * market.T))
    while n > 1 and 0 < _p_star(market, n - 1, scheme) < 1:
        n -= 1
    while not 0 < _p_star(market, n, scheme) < 1:
        n += 1
    return n


def build_lattice(market: MarketParams, n: int, scheme: str = "crr") -> Lattice:
    if scheme not in SCHEMES:
        raise ConfigError("scheme", f"expected one of {SCHEMES}, got {scheme!r}")
    if int(n) != n or n < 1:
        raise ConfigError("n", f"must be an integer >= 1, got {n!r}")
    n = int(n)
    p = _p_star(market, n, scheme)
    if not 0 < p < 1:
        raise ConfigError(
            "n",
            f"risk-neutral probability {p:.6g} outside (0, 1) for n={n}; "
            f"use n >= {minimal_steps(market, scheme)}",
        )
    log_u, log_d = _log_steps(market, n, scheme)
    return Lattice(n, market.z, market.r, market.T, market.T / n, log_u, log_d, p, scheme)


# --------------------------------------------------------------------------- #
# Discounted payoffs on the lattice
# --------------------------------------------------------------------------- #

def _layer_payoffs(lattice: Lattice, spec: GameOptionSpec, k: int):
    t = lattice.time(k)
    s = lattice.stock(k)
    disc = lattice.discount(k)
    f = spec.exercise(t, s) * disc
    if k == lattice.n:
        return f, f
    g = (spec.exercise(t, s) + spec.penalty(t, s)) * disc
    return f, g


def dynkin_value(lattice: Lattice, spec: GameOptionSpec, market: MarketParams | None = None) -> float:
    """Root value of the discrete Dynkin game, O(n) memory."""
    n, p = lattice.n, lattice.p_star
    v, _ = _layer_payoffs(lattice, spec, n)
    for k in range(n - 1, -1, -1):
        f, g = _layer_payoffs(lattice, spec, k)
        cont = p * v[1:] + (1.0 - p) * v[:-1]
        v = np.minimum(g, np.maximum(f, cont))
    return float(v[0])


def american_value(lattice: Lattice, spec: GameOptionSpec, market: MarketParams | None = None) -> float:
    """Value of the exercise payoff alone (no cancellation right)."""
    n, p = lattice.n, lattice.p_star
    v = spec.exercise(lattice.T, lattice.stock(n)) * lattice.discount(n)
    for k in range(n - 1, -1, -1):
        f = spec.exercise(lattice.time(k), lattice.stock(k)) * lattice.discount(k)
        v = np.maximum(f, p * v[1:] + (1.0 - p) * v[:-1])
    return float(v[0])


@dataclass(frozen=True)
class DynkinSolution:
    lattice: Lattice
    values: np.ndarray
    f_tilde: np.ndarray
    g_tilde: np.ndarray
    exercise_region: np.ndarray
    cancel_region: np.ndarray
    deltas: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def initial_capital(self) -> float:
        return float(self.values[0, 0])

    def mu_star(self, path) -> int:
        return rational_cancellation(self, path)

    def tau_star(self, path) -> int:
        return rational_exercise(self, path)

    def to_csv(self, path) -> None:
        """Write one row per node: step,up_count,stock,V,F_tilde,G_tilde,delta,in_exercise,in_cancel."""
        lat = self.lattice
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "up_count", "stock", "V", "F_tilde", "G_tilde",
                        "delta", "in_exercise", "in_cancel"])
            for k in range(lat.n + 1):
                stock = lat.stock(k)
                for j in range(k + 1):
                    delta = ""
                    if self.deltas is not None and k < lat.n:
                        delta = repr(float(self.deltas[k, j]))
                    w.writerow([k, j, repr(float(stock[j])), repr(float(self.values[k, j])),
                                repr(float(self.f_tilde[k, j])), repr(float(self.g_tilde[k, j])),
                                delta, int(self.exercise_region[k, j]),
                                int(self.cancel_region[k, j])])


def solve_dynkin(lattice: Lattice, spec: GameOptionSpec, market: MarketParams | None = None) -> DynkinSolution:
    """Backward induction ``V = min(G, max(F, E[V_next]))`` with full node storage.

    Region flags are set on equality, so ties resolve toward stopping.  At
    the horizon every node is an exercise node and none is a cancel node:
    there is no penalty left to pay.
    """
    n, p = lattice.n, lattice.p_star
    shape = (n + 1, n + 1)
    V = np.full(shape, np.nan)
    F = np.full(shape, np.nan)
    G = np.full(shape, np.nan)
    ex = np.zeros(shape, dtype=bool)
    ca = np.zeros(shape, dtype=bool)

    f, g = _layer_payoffs(lattice, spec, n)
    F[n], G[n], V[n] = f, g, f
    ex[n] = True
    for k in range(n - 1, -1, -1):
        f, g = _layer_payoffs(lattice, spec, k)
        cont = p * V[k + 1, 1:k + 2] + (1.0 - p) * V[k + 1, :k + 1]
        hold = np.maximum(f, cont)
        v = np.minimum(g, hold)
        F[k, :k + 1], G[k, :k + 1], V[k, :k + 1] = f, g, v
        ex[k, :k + 1] = v == f
        ca[k, :k + 1] = v == g
    return DynkinSolution(lattice, V, F, G, ex, ca)


def hedge_deltas(solution: DynkinSolution, lattice: Lattice | None = None) -> DynkinSolution:
    """Stock holdings of the self-financing hedge started from ``V(0, 0)``.

    ``delta[k, j]`` is held from step k to k + 1 and replicates the one-step
    move of V in discounted units.
    """
    lat = solution.lattice if lattice is None else lattice
    n = lat.n
    V = solution.values
    deltas = np.full((n, n), np.nan)
    for k in range(n):
        s_next = lat.discounted_stock(k + 1)
        deltas[k, :k + 1] = (V[k + 1, 1:k + 2] - V[k + 1, :k + 1]) / (s_next[1:] - s_next[:-1])
    return replace(solution, deltas=deltas)


# --------------------------------------------------------------------------- #
# Rational stopping indices
# --------------------------------------------------------------------------- #

def up_counts(path) -> np.ndarray:
    """Up-counts ``j_0 = 0, j_1, ..., j_n`` along a path of ups/downs.

    A path is a sequence of +1/-1 signs or of 1/0 flags.
    """
    steps = np.asarray(path)
    ups = (steps > 0).astype(int)
    return np.concatenate(([0], np.cumsum(ups)))


def _first_entrance(region: np.ndarray, path, n: int) -> int:
    if len(path) != n:
        raise ValueError(f"path has length {len(path)}, lattice has {n} steps")
    j = up_counts(path)
    hits = region[np.arange(n + 1), j]
    k = int(np.argmax(hits))
    return k if hits[k] else n


def rational_cancellation(solution: DynkinSolution, path) -> int:
    """First step at which the value meets the cancellation payoff, else n."""
    return _first_entrance(solution.cancel_region, path, solution.n)


def rational_exercise(solution: DynkinSolution, path) -> int:
    """First step at which the value meets the exercise payoff (always <= n)."""
    return _first_entrance(solution.exercise_region, path, solution.n)


def first_entrance_batch(region: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """Vectorized first-entrance indices for a ``(paths, n)`` array of signs."""
    n = signs.shape[1]
    j = np.concatenate([np.zeros((signs.shape[0], 1), dtype=int),
                        np.cumsum(signs > 0, axis=1)], axis=1)
    hits = region[np.arange(n + 1)[None, :], j]
    hits[:, n] = True
    return np.argmax(hits, axis=1)


# --------------------------------------------------------------------------- #
# Independent oracle
# --------------------------------------------------------------------------- #

def _matrix_game_value(a, b, c, d):
    """Value of the 2x2 zero-sum game [[a, b], [c, d]], row player minimizing.

    Uses the pure saddle when the lower and upper values agree and the
    mixed-strategy formula otherwise.
    """
    upper = np.minimum(np.maximum(a, b), np.maximum(c, d))
    lower = np.maximum(np.minimum(a, c), np.minimum(b, d))
    denom = a + d - b - c
    with np.errstate(divide="ignore", invalid="ignore"):
        mixed = (a * d - b * c) / denom
    return np.where(upper == lower, upper, mixed)


def brute_force_value(lattice: Lattice, spec: GameOptionSpec, market: MarketParams | None = None) -> float:
    """Dynkin value by exhaustive search over the non-recombining history tree.

    Every one of the ``2^k`` histories at step k is a separate state; at each
    one the seller (rows: stop, continue) and the buyer (columns: stop,
    continue) play a 2x2 simultaneous game whose continuation entry is the
    probability-weighted value of the two child histories.  Nothing here
    relies on the min/max ordering used by :func:`solve_dynkin`, and the
    horizon rule enters only through the terminal payoff.
    """
    n = lattice.n
    if n > MAX_BRUTE_FORCE_STEPS:
        raise ValueError(
            f"brute force enumerates 2^n histories; n={n} exceeds the limit "
            f"{MAX_BRUTE_FORCE_STEPS}"
        )
    p = lattice.p_star

    def up_count(k):
        h = np.arange(2**k)
        return np.array([bin(x).count("1") for x in h], dtype=int)

    def payoffs(k):
        j = up_count(k)
        t = lattice.time(k)
        s = lattice.stock(k, j)
        disc = math.exp(-lattice.r * t)
        f = disc * spec.exercise(t, s)
        g = disc * (spec.exercise(t, s) + spec.penalty(t, s)) if k < n else f
        return f, g

    # terminal histories: the contract ends and only F is paid
    v, _ = payoffs(n)
    for k in range(n - 1, -1, -1):
        f, g = payoffs(k)
        # history h at step k has children 2h (down) and 2h + 1 (up)
        cont = p * v[1::2] + (1.0 - p) * v[0::2]
        # seller stops alone -> G; buyer stops (alone or jointly) -> F
        v = _matrix_game_value(f, g, f, cont)
    return float(v[0])
