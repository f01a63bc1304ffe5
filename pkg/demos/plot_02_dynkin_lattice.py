"""
Pricing on a binomial lattice
=============================

Backward induction ``V = min(G, max(F, continuation))`` on a CRR tree gives
the game value. Small trees are checked against an exhaustive search over
every price history.
"""

import numpy as np

from gameopt import (GameOptionSpec, MarketParams, american_value, brute_force_value,
                     build_lattice, hedge_deltas, solve_dynkin)

market = MarketParams(z=110.0, r=0.04, kappa=0.2, T=1.0)
spec = GameOptionSpec.put(100.0, penalty=5.0)

lat = build_lattice(market, 8)
sol = hedge_deltas(solve_dynkin(lat, spec))
print("V(0,0) =", sol.initial_capital)
print("brute force =", brute_force_value(lat, spec))

# the penalty caps the value; a huge penalty gives back the American put
for penalty in (0.0, 1.0, 5.0, 1e6):
    v = solve_dynkin(build_lattice(market, 200), GameOptionSpec.put(100.0, penalty)).initial_capital
    print(f"penalty {penalty:>9g}: {v:.4f}")
print("American:", american_value(build_lattice(market, 200), spec))

# where the writer cancels (C) and the holder exercises (E) on the small tree
for k in range(lat.n):
    row = "".join("C" if c else ("E" if e else ".")
                  for c, e in zip(sol.cancel_region[k, :k + 1], sol.exercise_region[k, :k + 1]))
    print(f"k={k}: {row}")
print("delta at the root:", sol.deltas[0, 0])
print("nodes:", np.count_nonzero(~np.isnan(sol.values)))
