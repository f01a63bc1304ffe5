"""Pricing and hedging laboratory for game (Israeli) options on binomial lattices."""

from .convergence import ErrorTable, error_curve, rate_summary, reference_value
from .embedding import (BrownianPath, EmbeddedPath, PathExhausted, continuous_to_discrete,
                        discrete_to_continuous, embed_walk, embedding_run, nu_map, sample_brownian_path,
                        sample_embedded)
from .hedging import (PortfolioTrajectory, ShortfallReport, hedge_solution, psi_estimate, run_hedge,
                      shortfall_eq23, shortfall_eq24, shortfall_report, stock_at)
from .lattice import (DynkinSolution, Lattice, american_value, brute_force_value, build_lattice,
                      dynkin_value, hedge_deltas, rational_cancellation, rational_exercise,
                      solve_dynkin)
from .model import (Affine, ConfigError, DomainError, GameOptionSpec, MarketParams, Table, Vanilla,
                    cancellation_payoff, discounted_payoff, exercise_payoff)

__version__ = "0.1.0"
