"""
Hedging along a Brownian path
=============================

The lattice hedge is run in continuous time: hold ``delta(k, j)`` shares
between consecutive exit times, sell out after the last one, and cancel when
the lattice says so. The shortfall measures how far the portfolio falls
short of the payoff.
"""

from gameopt import GameOptionSpec, MarketParams, hedge_solution, run_hedge, sample_embedded, shortfall_report

market = MarketParams(z=110.0, r=0.04, kappa=0.2, T=1.0)
spec = GameOptionSpec.put(100.0, penalty=5.0)

sol = hedge_solution(market, spec, 32)
path, emb = sample_embedded(seed=1, n=32, T=1.0, dt_max=1e-3)
traj = run_hedge(market, spec, sol, emb, path)
print("start:", traj.discounted_value[0], "cancel at:", traj.cancel_time,
      "frozen from:", traj.frozen_from)

for n in (16, 64):
    rep = shortfall_report(market, spec, n, num_paths=500, seed=0)
    print(f"n={n}: sup-over-rules {rep.estimate_eq23:.4f} (best {rep.best_rule}), "
          f"pathwise sup {rep.estimate_eq24:.4f}, psi {rep.psi_mean:.4f}")
