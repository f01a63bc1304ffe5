"""
Game option payoffs
===================

A game put pays the holder ``(K - S)^+`` on exercise. The writer may cancel
early by paying that amount plus a penalty. At the horizon nothing extra is
owed, so cancelling at T is the same as the holder exercising.
"""

from gameopt import GameOptionSpec, MarketParams, cancellation_payoff, discounted_payoff, exercise_payoff

spec = GameOptionSpec.put(100.0, penalty=5.0)
market = MarketParams(z=100.0, r=0.05, kappa=0.2, T=1.0)

# exercise and cancellation values at a few stock levels
for s in (80.0, 100.0, 120.0):
    print(f"S={s:6.1f}  exercise={exercise_payoff(spec, 0.5, s):6.2f}  "
          f"cancel={cancellation_payoff(spec, 0.5, s, market.T):6.2f}  "
          f"cancel at T={cancellation_payoff(spec, 1.0, s, market.T):6.2f}")

# the payoff of a stopping pair, discounted to time 0: the writer moves first
print(discounted_payoff(spec, market, 0.5, 0.8, 90.0))
print(discounted_payoff(spec, market, 0.8, 0.5, 90.0))

# specs round-trip through JSON-ready dictionaries
print(spec.to_dict())
assert GameOptionSpec.from_dict(spec.to_dict()) == spec
