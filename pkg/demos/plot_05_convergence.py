"""
Convergence of the lattice value
================================

The n-step value is compared with a fine lattice and the error is fitted
against ``n^{-rate}``. The guaranteed order is 1/4; observed rates are
usually higher.
"""

from gameopt import GameOptionSpec, MarketParams, error_curve, rate_summary

market = MarketParams(z=110.0, r=0.04, kappa=0.2, T=1.0)
spec = GameOptionSpec.put(100.0, penalty=5.0)

table = error_curve(spec, market, [16, 32, 64, 128, 256, 512, 1024], ref_n=2**13)
for n, v, ref, err, rhs in table.rows():
    print(f"{n:5d}  {v:.6f}  err={err:.2e}  bound={rhs:.2e}")
print(rate_summary(table))

# with no penalty the writer cancels at once and every error is zero
flat = error_curve(GameOptionSpec.put(100.0), market, [16, 32, 64], ref_n=2**12)
print(rate_summary(flat))
