"""Brownian paths, their embedded random walk, and the stopping-time maps.

The walk is embedded by symmetric first exits: ``theta_k`` is the first time
after ``theta_{k-1}`` at which ``W`` moves ``a = sqrt(T / n)`` away from
``W(theta_{k-1})``.  Paths are sampled on a uniform grid; between grid
points the path is a Brownian bridge, and exits inside a grid interval are
detected with the bridge crossing probability ``exp(-2 alpha beta / h)`` and
placed at an exact bridge hitting time.  The embedded walk values are
therefore exactly ``W(theta_{k-1}) +/- a``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numba
import numpy as np

from .model import DomainError

PATH_STREAM = 0
BRIDGE_STREAM = 1


class PathExhausted(RuntimeError):
    """The path ended before all n exits occurred; resample with a longer cap."""


def stream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the named substream ``key`` of the root ``seed``.

    Substreams are independent of each other, so adding paths or rules never
    reshuffles the draws of existing ones.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class BrownianPath:
    times: np.ndarray
    W: np.ndarray
    seed: int
    index: int = 0

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def horizon_cap(self) -> float:
        return float(self.times[-1])

    def value_at(self, t):
        """W at time(s) ``t``, linear between grid points."""
        if np.any(np.asarray(t) > self.times[-1]) or np.any(np.asarray(t) < 0):
            raise DomainError(f"t outside the path range [0, {self.horizon_cap}]")
        return np.interp(t, self.times, self.W)


def grid_step(dt_max: float, align: float | None = None) -> float:
    """Grid spacing: ``dt_max``, or the largest divisor of ``align`` not above it."""
    if not dt_max > 0:
        raise DomainError("dt_max must be > 0")
    if align is None:
        return float(dt_max)
    return align / math.ceil(align / dt_max - 1e-9)


def sample_brownian_path(seed: int, dt_max: float, horizon_cap: float, *,
                         index: int = 0, align: float | None = None) -> BrownianPath:
    """Standard Brownian motion on a uniform grid covering ``[0, horizon_cap]``.

    Paths with the same ``(seed, index, dt_max, align)`` and a longer cap
    extend the shorter ones.
    """
    h = grid_step(dt_max, align)
    m = math.ceil(horizon_cap / h - 1e-9)
    rng = stream(seed, index, PATH_STREAM)
    W = np.empty(m + 1)
    W[0] = 0.0
    np.cumsum(rng.standard_normal(m) * math.sqrt(h), out=W[1:])
    return BrownianPath(np.arange(m + 1) * h, W, seed, index)


@dataclass(frozen=True)
class EmbeddedPath:
    thetas: np.ndarray
    xi: np.ndarray
    walk: np.ndarray
    step: float

    @property
    def n(self) -> int:
        return len(self.xi)

    @property
    def up_count(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.xi > 0)))


@numba.njit(cache=True)
def _exit_kernel(W, h, a, n, rng, thetas, walk):
    # bridge hitting time of a level at distance alpha from the start and
    # beta from the end: u = tau / (h' - tau) is inverse Gaussian with
    # mean alpha / |beta| and shape alpha^2 / h'
    m = W.shape[0] - 1
    k = 0
    c = 0.0
    s = 0.0
    xs = 0.0
    i = 0
    tiny = 1e-12 * a
    while k < n and i < m:
        t1 = (i + 1) * h
        x1 = W[i + 1]
        hp = t1 - s
        hit_up = math.inf
        hit_dn = math.inf
        if hp > 0.0:
            alpha = c + a - xs
            beta = c + a - x1
            u0 = rng.random()
            if beta <= 0.0 or u0 < math.exp(-2.0 * alpha * beta / hp):
                v = rng.wald(alpha / max(abs(beta), tiny), alpha * alpha / hp)
                hit_up = s + hp * v / (1.0 + v)
            alpha = xs - (c - a)
            beta = x1 - (c - a)
            u0 = rng.random()
            if beta <= 0.0 or u0 < math.exp(-2.0 * alpha * beta / hp):
                v = rng.wald(alpha / max(abs(beta), tiny), alpha * alpha / hp)
                hit_dn = s + hp * v / (1.0 + v)
        if hit_up == math.inf and hit_dn == math.inf:
            s = t1
            xs = x1
            i += 1
            continue
        k += 1
        if hit_up <= hit_dn:
            c = c + a
            thetas[k] = min(hit_up, t1)
        else:
            c = c - a
            thetas[k] = min(hit_dn, t1)
        # keep theta strictly increasing under rounding
        if thetas[k] <= thetas[k - 1]:
            thetas[k] = np.nextafter(thetas[k - 1], np.inf)
        walk[k] = c
        s = thetas[k]
        xs = c
    return k


def embed_walk(path: BrownianPath, n: int, T: float) -> EmbeddedPath:
    """First-exit times ``theta_0 = 0 < theta_1 < ... < theta_n`` of ``+/- sqrt(T/n)`` moves."""
    if n < 1:
        raise DomainError("n must be >= 1")
    a = math.sqrt(T / n)
    thetas = np.zeros(n + 1)
    walk = np.zeros(n + 1)
    rng = stream(path.seed, path.index, BRIDGE_STREAM)
    k = _exit_kernel(path.W, path.h, a, n, rng, thetas, walk)
    if k < n:
        raise PathExhausted(
            f"only {k} of {n} exits before t={path.horizon_cap:.4g}; extend horizon_cap"
        )
    xi = np.sign(np.diff(walk)).astype(int)
    return EmbeddedPath(thetas, xi, walk, a)


def sample_embedded(seed: int, n: int, T: float, dt_max: float, *, index: int = 0,
                    align: float | None = None, horizon_cap: float | None = None):
    """Brownian path plus its embedding, doubling the cap until n exits fit.

    The cap starts at ``2 T``; a longer cap extends the same path and bridge
    draws, so the result does not depend on how many retries were needed.
    """
    cap = 2.0 * T if horizon_cap is None else horizon_cap
    while True:
        path = sample_brownian_path(seed, dt_max, cap, index=index, align=align)
        try:
            return path, embed_walk(path, n, T)
        except PathExhausted:
            cap *= 2.0


# --------------------------------------------------------------------------- #
# Stopping-time translators
# --------------------------------------------------------------------------- #

def nu_map(embedded: EmbeddedPath, tau: float) -> int:
    """Smallest k with ``theta_k >= tau``; ``n + 1`` if there is none."""
    if tau < 0:
        raise DomainError("tau must be >= 0")
    return int(np.searchsorted(embedded.thetas, tau, side="left"))


def continuous_to_discrete(embedded: EmbeddedPath, sigma: float, T: float, n: int | None = None) -> int:
    """Step index for a continuous stopping time: ``min(n, nu_sigma)`` before T, n at T."""
    n = embedded.n if n is None else n
    if not 0 <= sigma <= T:
        raise DomainError(f"sigma={sigma} outside [0, {T}]")
    if sigma == T:
        return n
    return min(n, nu_map(embedded, sigma))


def discrete_to_continuous(embedded: EmbeddedPath, zeta: int, T: float, n: int | None = None) -> float:
    """Time for a step index: T when ``zeta == n``, else ``min(theta_zeta, T)``."""
    n = embedded.n if n is None else n
    if int(zeta) != zeta or not 0 <= zeta <= n:
        raise DomainError(f"zeta={zeta} outside 0..{n}")
    if zeta == n:
        return T
    return min(float(embedded.thetas[int(zeta)]), T)


# --------------------------------------------------------------------------- #
# Diagnostics
# --------------------------------------------------------------------------- #

def step_deviation(embedded: EmbeddedPath) -> float:
    """Largest deviation of an embedded step size from ``sqrt(T/n)``."""
    return float(np.max(np.abs(np.abs(np.diff(embedded.walk)) - embedded.step)))


def theta_deviation(embedded: EmbeddedPath, T: float) -> np.ndarray:
    """``|theta_k - k T / n|`` for k = 0..n."""
    n = embedded.n
    return np.abs(embedded.thetas - np.arange(n + 1) * T / n)


@dataclass(frozen=True)
class EmbeddingStats:
    n: int
    paths: int
    T: float
    theta_n_mean: float
    theta_n_se: float
    xi_mean: np.ndarray
    xi_se: np.ndarray
    max_step_deviation: float
    tolerance: float
    mean_abs_theta_dev: float
    max_abs_theta_dev: float

    def summary(self) -> dict:
        z_xi = np.abs(self.xi_mean) / np.where(self.xi_se > 0, self.xi_se, np.inf)
        return {
            "n": self.n,
            "paths": self.paths,
            "theta_n_mean": self.theta_n_mean,
            "theta_n_se": self.theta_n_se,
            "theta_n_z": abs(self.theta_n_mean - self.T) / self.theta_n_se,
            "max_xi_z": float(np.max(z_xi)),
            "max_step_deviation": self.max_step_deviation,
            "tolerance": self.tolerance,
            "mean_abs_theta_dev": self.mean_abs_theta_dev,
            "max_abs_theta_dev": self.max_abs_theta_dev,
        }


def embedding_run(seed: int, n: int, T: float, paths: int, dt_max: float):
    """Embed ``paths`` independent paths; returns the embedded paths and statistics."""
    embedded = [sample_embedded(seed, n, T, dt_max, index=i)[1] for i in range(paths)]
    thetas = np.array([e.thetas for e in embedded])
    xi = np.array([e.xi for e in embedded])
    dev = np.abs(thetas - np.arange(n + 1) * T / n)
    sd = lambda x: float(np.std(x, ddof=1)) / math.sqrt(paths) if paths > 1 else math.inf
    stats = EmbeddingStats(
        n=n,
        paths=paths,
        T=T,
        theta_n_mean=float(thetas[:, -1].mean()),
        theta_n_se=sd(thetas[:, -1]),
        xi_mean=xi.mean(axis=0),
        xi_se=xi.std(axis=0, ddof=1) / math.sqrt(paths) if paths > 1 else np.full(n, np.inf),
        max_step_deviation=max(step_deviation(e) for e in embedded),
        tolerance=grid_step(dt_max),
        mean_abs_theta_dev=float(dev.mean()),
        max_abs_theta_dev=float(dev.max()),
    )
    return embedded, stats


def write_embedding_csv(path, embedded: list[EmbeddedPath], stats: EmbeddingStats) -> None:
    """Rows ``path,k,theta_k,xi_k,walk_k`` then a summary row of ``|theta_k - kT/n|``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "k", "theta_k", "xi_k", "walk_k"])
        for i, e in enumerate(embedded):
            for k in range(e.n + 1):
                xi = int(e.xi[k - 1]) if k > 0 else ""
                w.writerow([i, k, repr(float(e.thetas[k])), xi, repr(float(e.walk[k]))])
        w.writerow(["summary", "mean_abs_theta_dev", repr(stats.mean_abs_theta_dev),
                    "max_abs_theta_dev", repr(stats.max_abs_theta_dev)])
