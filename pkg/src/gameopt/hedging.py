"""Binomial hedge carried into the Black-Scholes market along an embedded walk.

The seller starts with the lattice value ``V(0, 0)``, holds ``delta(k, j_k)``
shares on ``[theta_k, theta_{k+1})`` and sells everything at
``min(theta_n, T)``, after which the discounted portfolio is constant.  The
cancellation time is the rational lattice index mapped back to continuous
time.  Shortfalls compare the undiscounted payoff ``R`` with the portfolio
``Z`` at ``min(sigma, t)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .embedding import BrownianPath, EmbeddedPath, sample_embedded
from .lattice import (DynkinSolution, build_lattice, first_entrance_batch,
                      hedge_deltas, solve_dynkin)
from .model import ConfigError, DomainError, GameOptionSpec, MarketParams

DEFAULT_DT_MAX = 1e-3
BARRIER_QUANTILES = (0.25, 0.5, 1.0, 1.5)


def stock_at(market: MarketParams, path: BrownianPath, t):
    """``z exp(kappa W_t + (r - kappa^2/2) t)`` under the risk-neutral measure."""
    if np.any(np.asarray(t) > path.horizon_cap):
        raise DomainError(f"t beyond the path cap {path.horizon_cap}")
    w = path.value_at(t)
    return market.z * np.exp(market.kappa * w + (market.r - 0.5 * market.kappa**2) * np.asarray(t))


@dataclass(frozen=True)
class PortfolioTrajectory:
    """Portfolio along the path grid in ``[0, T]`` merged with the exit times before T."""

    times: np.ndarray
    stock: np.ndarray
    discounted_value: np.ndarray
    holdings: np.ndarray
    cancel_time: float
    cancel_index: int
    frozen_from: float
    grid_mask: np.ndarray
    grid_index: np.ndarray
    theta_value: np.ndarray

    def value_at_cancel(self) -> float:
        """Discounted portfolio at the cancellation time."""
        return float(np.interp(self.cancel_time, self.times, self.discounted_value))


def _check_pair(solution: DynkinSolution, embedded: EmbeddedPath):
    if solution.n != embedded.n:
        raise ConfigError("n", f"solution has n={solution.n}, embedded path has n={embedded.n}")
    if solution.deltas is None:
        raise ConfigError("deltas", "solution has no hedge deltas; call hedge_deltas first")


def run_hedge(market: MarketParams, spec: GameOptionSpec, solution: DynkinSolution,
              embedded: EmbeddedPath, path: BrownianPath) -> PortfolioTrajectory:
    _check_pair(solution, embedded)
    T, r, kappa, z = market.T, market.r, market.kappa, market.z
    n = embedded.n
    thetas, walk = embedded.thetas, embedded.walk
    j = embedded.up_count

    # grid points up to T; T itself is snapped onto the grid when within rounding
    m_T = int(np.searchsorted(path.times, T * (1 + 1e-12), side="right")) - 1
    gt = path.times[:m_T + 1].copy()
    if abs(gt[-1] - T) <= 1e-9 * T:
        gt[-1] = T
    elif gt[-1] < T:
        raise DomainError("path grid does not reach T")
    inner = np.flatnonzero(thetas[1:] < T) + 1
    times = np.concatenate([gt, thetas[inner]])
    w = np.concatenate([path.W[:m_T + 1], walk[inner]])
    is_grid = np.concatenate([np.ones(m_T + 1, bool), np.zeros(inner.size, bool)])
    src = np.concatenate([np.arange(m_T + 1), inner])
    order = np.argsort(times, kind="stable")
    times, w, is_grid, src = times[order], w[order], is_grid[order], src[order]

    disc_stock = z * np.exp(kappa * w - 0.5 * kappa**2 * times)
    disc_theta = z * np.exp(kappa * walk - 0.5 * kappa**2 * thetas)
    held = solution.deltas[np.arange(n), j[:-1]]
    z_theta = np.empty(n + 1)
    z_theta[0] = solution.initial_capital
    z_theta[1:] = z_theta[0] + np.cumsum(held * np.diff(disc_theta))

    # number of exits at or before t: the holding index
    K = np.searchsorted(thetas[1:], times, side="right")
    active = K < n
    Kc = np.minimum(K, n - 1)
    value = np.where(active, z_theta[Kc] + held[Kc] * (disc_stock - disc_theta[Kc]), z_theta[n])
    holdings = np.where(active, held[Kc], 0.0)

    frozen_from = min(float(thetas[n]), T)
    phi = int(first_entrance_batch(solution.cancel_region, embedded.xi[None, :])[0])
    sigma = T if phi == n else min(float(thetas[phi]), T)
    return PortfolioTrajectory(
        times=times,
        stock=disc_stock * np.exp(r * times),
        discounted_value=value,
        holdings=holdings,
        cancel_time=sigma,
        cancel_index=phi,
        frozen_from=frozen_from,
        grid_mask=is_grid,
        grid_index=src,
        theta_value=z_theta,
    )


def _payoff_paths(market, spec, solution, embedded, traj):
    """Per evaluation time: R(sigma, t), Z(min(sigma, t)) and the discounted Q(sigma, t)."""
    T, r = market.T, market.r
    t = traj.times
    sigma = traj.cancel_time
    i_sigma = int(np.searchsorted(t, sigma, side="left"))
    s_sigma = traj.stock[i_sigma]
    zd_sigma = traj.discounted_value[i_sigma]
    cancel_first = sigma < t
    g_sigma = spec.exercise(sigma, s_sigma) + (spec.penalty(sigma, s_sigma) if sigma < T else 0.0)
    R = np.where(cancel_first, g_sigma, spec.exercise(t, traj.stock))
    m = np.minimum(t, sigma)
    Zd = np.where(cancel_first, zd_sigma, traj.discounted_value)
    return R, np.exp(r * m) * Zd, np.exp(-r * m) * R


def psi_estimate(market: MarketParams, spec: GameOptionSpec, solution: DynkinSolution,
                 embedded: EmbeddedPath, path: BrownianPath,
                 trajectory: PortfolioTrajectory | None = None) -> float:
    """Largest gap over ``t in [0, T]`` between the continuous and lattice discounted payoffs.

    The continuous side pays at ``(sigma, t)``; the lattice side at step
    indices ``(phi, min(n, nu_t))`` on the lattice stock built from the signs.
    """
    _check_pair(solution, embedded)
    traj = run_hedge(market, spec, solution, embedded, path) if trajectory is None else trajectory
    n = embedded.n
    _, _, Q = _payoff_paths(market, spec, solution, embedded, traj)
    nu = np.minimum(np.searchsorted(embedded.thetas, traj.times, side="left"), n)
    phi = traj.cancel_index
    j = embedded.up_count
    q_lat = np.where(phi < nu, solution.g_tilde[phi, j[phi]], solution.f_tilde[nu, j[nu]])
    return float(np.max(np.abs(Q - q_lat)))


# --------------------------------------------------------------------------- #
# Monte Carlo shortfall estimates
# --------------------------------------------------------------------------- #

def _se(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.inf


@dataclass
class ShortfallReport:
    n: int
    num_paths: int
    seed: int
    estimate_eq23: float
    se_eq23: float
    best_rule: str
    family: list
    estimate_eq24: float
    se_eq24: float
    eq24_coarse: float
    psi_mean: float
    psi_se: float
    initial_capital: float
    martingale_mean: float
    martingale_se: float
    freeze_violations: int
    per_path: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "paths": self.num_paths,
            "eq23": {"estimate": self.estimate_eq23, "se": self.se_eq23,
                     "best_rule": self.best_rule, "lower_bound_over_family": True,
                     "family": self.family},
            "eq24": {"estimate": self.estimate_eq24, "se": self.se_eq24,
                     "coarse_grid_estimate": self.eq24_coarse},
            "psi": {"mean": self.psi_mean, "se": self.psi_se},
            "hedge": {"initial_capital": self.initial_capital,
                      "martingale_mean": self.martingale_mean,
                      "martingale_se": self.martingale_se,
                      "freeze_violations": self.freeze_violations},
            "seed": self.seed,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def rule_names(tau_family_size: int, barrier_rules: bool = True) -> list[str]:
    names = [f"fixed:{i}/{tau_family_size}" for i in range(1, tau_family_size + 1)]
    names.append("rational")
    if barrier_rules:
        names += [f"barrier:down:{q}" for q in BARRIER_QUANTILES]
        names += [f"barrier:up:{q}" for q in BARRIER_QUANTILES]
    return names


def hedge_solution(market: MarketParams, spec: GameOptionSpec, n: int, scheme: str = "jr") -> DynkinSolution:
    return hedge_deltas(solve_dynkin(build_lattice(market, n, scheme), spec, market))


def shortfall_report(market: MarketParams, spec: GameOptionSpec, n: int, num_paths: int,
                     seed: int, tau_family_size: int = 16, dt_max: float = DEFAULT_DT_MAX,
                     barrier_rules: bool = True, scheme: str = "jr") -> ShortfallReport:
    """Monte Carlo estimates of both shortfall quantities and of Psi.

    The supremum over stopping times in the first estimate is replaced by the
    maximum over a finite family (fixed times ``iT/m``, the rational buyer
    rule, and first-passage rules of stock barriers), so it is a lower bound
    for that supremum.  The second estimate takes, path by path, the
    supremum over the grid times in ``[0, T]`` and the exit times before T.
    """
    if tau_family_size < 2:
        raise ConfigError("tau_family_size", "must be >= 2")
    if num_paths < 1:
        raise ConfigError("paths", "must be >= 1")
    T = market.T
    solution = hedge_solution(market, spec, n, scheme)
    names = rule_names(tau_family_size, barrier_rules)
    levels = np.concatenate([
        market.z * np.exp(-market.kappa * math.sqrt(T) * np.array(BARRIER_QUANTILES)),
        market.z * np.exp(market.kappa * math.sqrt(T) * np.array(BARRIER_QUANTILES)),
    ]) if barrier_rules else np.empty(0)
    align = T / tau_family_size

    eq24 = np.empty(num_paths)
    eq24_coarse = np.empty(num_paths)
    fam = np.empty((num_paths, len(names)))
    psi = np.empty(num_paths)
    mart = np.empty(num_paths)
    frozen_ok = np.empty(num_paths, dtype=bool)

    for i in range(num_paths):
        path, emb = sample_embedded(seed, n, T, dt_max, index=i, align=align)
        traj = run_hedge(market, spec, solution, emb, path)
        R, Z, Q = _payoff_paths(market, spec, solution, emb, traj)
        short = np.maximum(R - Z, 0.0)
        eq24[i] = short.max()
        coarse = ~traj.grid_mask | (traj.grid_index % 2 == 0)
        coarse[-1] = True
        eq24_coarse[i] = short[coarse].max()

        # fixed times sit on the aligned grid
        grid_pos = np.flatnonzero(traj.grid_mask)
        per_fixed = (len(grid_pos) - 1) // tau_family_size
        idx = [grid_pos[per_fixed * k] for k in range(1, tau_family_size + 1)]
        tau_star = int(first_entrance_batch(solution.exercise_region, emb.xi[None, :])[0])
        t_rational = T if tau_star == n else min(float(emb.thetas[tau_star]), T)
        idx.append(int(np.searchsorted(traj.times, t_rational, side="left")))
        for level in levels[:len(levels) // 2]:
            hit = np.flatnonzero(traj.stock <= level)
            idx.append(int(hit[0]) if hit.size else len(traj.times) - 1)
        for level in levels[len(levels) // 2:]:
            hit = np.flatnonzero(traj.stock >= level)
            idx.append(int(hit[0]) if hit.size else len(traj.times) - 1)
        fam[i] = short[idx]

        psi[i] = psi_estimate(market, spec, solution, emb, path, trajectory=traj)

        after = traj.times >= traj.frozen_from
        frozen = traj.discounted_value[after]
        frozen_ok[i] = bool(np.all(frozen == frozen[0]))
        mart[i] = frozen[0] - traj.discounted_value[0]

    means = fam.mean(axis=0)
    best = int(np.argmax(means))
    family = [{"rule": nm, "mean": float(mu), "se": _se(fam[:, k])}
              for k, (nm, mu) in enumerate(zip(names, means))]
    return ShortfallReport(
        n=n,
        num_paths=num_paths,
        seed=seed,
        estimate_eq23=float(means[best]),
        se_eq23=_se(fam[:, best]),
        best_rule=names[best],
        family=family,
        estimate_eq24=float(eq24.mean()),
        se_eq24=_se(eq24),
        eq24_coarse=float(eq24_coarse.mean()),
        psi_mean=float(psi.mean()),
        psi_se=_se(psi),
        initial_capital=solution.initial_capital,
        martingale_mean=float(mart.mean()),
        martingale_se=_se(mart),
        freeze_violations=int((~frozen_ok).sum()),
        per_path={"eq24": eq24, "eq24_coarse": eq24_coarse, "family": fam,
                  "psi": psi, "martingale": mart, "frozen_ok": frozen_ok,
                  "rule_names": names},
    )


def shortfall_eq23(market: MarketParams, spec: GameOptionSpec, n: int, num_paths: int,
                   seed: int, tau_family_size: int = 16, **kwargs) -> ShortfallReport:
    """Family-max estimate of ``sup_tau E (R(sigma, tau) - Z_{sigma ^ tau})^+``."""
    return shortfall_report(market, spec, n, num_paths, seed, tau_family_size, **kwargs)


def shortfall_eq24(market: MarketParams, spec: GameOptionSpec, n: int, num_paths: int,
                   seed: int, **kwargs) -> ShortfallReport:
    """Estimate of ``E sup_t (R(sigma, t) - Z_{sigma ^ t})^+``."""
    return shortfall_report(market, spec, n, num_paths, seed, **kwargs)
