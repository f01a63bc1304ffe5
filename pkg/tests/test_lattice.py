import csv
import itertools
import math

import numpy as np
import pytest

from gameopt.lattice import (american_value, brute_force_value, build_lattice, dynkin_value,
                             first_entrance_batch, hedge_deltas, minimal_steps,
                             rational_cancellation, rational_exercise, solve_dynkin, up_counts)
from gameopt.model import Affine, ConfigError, GameOptionSpec, MarketParams, Vanilla

from _corpus import corpus

MARKET0 = MarketParams(z=100.0, r=0.0, kappa=0.2, T=1.0)
MARKET = MarketParams(z=100.0, r=0.05, kappa=0.25, T=1.0)
ZERO = GameOptionSpec(Vanilla("put", 0.0), Affine(0.0))


def all_paths(n):
    return np.array(list(itertools.product((-1, 1), repeat=n)), dtype=int).reshape(-1, n)


def path_probs(lattice, paths):
    ups = (paths > 0).sum(axis=1)
    return lattice.p_star**ups * (1 - lattice.p_star) ** (paths.shape[1] - ups)


def stopped_payoff(sol, paths, mu, tau):
    """Discounted lattice payoff for cancel index mu, exercise index tau, per path."""
    j = np.concatenate([np.zeros((len(paths), 1), int), np.cumsum(paths > 0, axis=1)], axis=1)
    rows = np.arange(len(paths))
    g = sol.g_tilde[mu, j[rows, mu]]
    f = sol.f_tilde[tau, j[rows, tau]]
    return np.where(mu < tau, g, f)


def plain_american(market, n, strike):
    """Scalar American put induction written out longhand."""
    dt = market.T / n
    u = math.exp(market.kappa * math.sqrt(dt))
    d = 1 / u
    p = (math.exp(market.r * dt) - d) / (u - d)
    disc = math.exp(-market.r * dt)
    v = [max(strike - market.z * u**j * d ** (n - j), 0.0) for j in range(n + 1)]
    for k in range(n - 1, -1, -1):
        v = [max(strike - market.z * u**j * d ** (k - j), disc * (p * v[j + 1] + (1 - p) * v[j]))
             for j in range(k + 1)]
    return v[0]


def enumerate_rules_value(lattice, spec):
    """Min over seller rules of max over buyer rules, every node labelled stop/continue."""
    n = lattice.n
    nodes = [(k, j) for k in range(n) for j in range(k + 1)]
    paths = all_paths(n)
    probs = path_probs(lattice, paths)
    j = np.concatenate([np.zeros((len(paths), 1), int), np.cumsum(paths > 0, axis=1)], axis=1)
    sol = solve_dynkin(lattice, spec)  # only the payoff tables F~ and G~ are read
    labels = np.array(list(itertools.product((False, True), repeat=len(nodes))), dtype=bool)
    # stopping index of every rule on every path
    stop = np.full((len(labels), len(paths)), n)
    for k in range(n - 1, -1, -1):
        idx = [nodes.index((k, int(jj))) for jj in j[:, k]]
        hit = labels[:, idx]
        stop = np.where(hit, k, stop)
    rows = np.arange(len(paths))
    best = math.inf
    for mu in stop:
        g = sol.g_tilde[mu, j[rows, mu]]
        f = sol.f_tilde[stop, j[rows[None, :], stop]]
        q = np.where(mu[None, :] < stop, g[None, :], f)
        best = min(best, float((q * probs).sum(axis=1).max()))
    return best


# --------------------------------------------------------------------------- #
# build_lattice
# --------------------------------------------------------------------------- #

def test_crr_parameters():
    lat = build_lattice(MARKET0, 4)
    assert lat.u == pytest.approx(math.exp(0.1), rel=1e-15)
    assert lat.d == pytest.approx(math.exp(-0.1), rel=1e-15)
    assert lat.p_star == pytest.approx((1 - lat.d) / (lat.u - lat.d), rel=1e-14)


def test_recombination_and_node_counts():
    lat = build_lattice(MARKET, 2)
    assert lat.stock(2)[1] == 100.0
    for k in range(6):
        assert build_lattice(MARKET, 6).stock(k).shape == (k + 1,)


def test_arbitrage_bound_names_minimal_n():
    market = MarketParams(100.0, 0.5, 0.2, 1.0)
    with pytest.raises(ConfigError, match="n >= 7"):
        build_lattice(market, 1)
    assert minimal_steps(market) == 7
    build_lattice(market, 7)


def test_jr_lattice_has_equal_probabilities_in_the_limit():
    lat = build_lattice(MARKET, 400, scheme="jr")
    assert abs(lat.p_star - 0.5) < 1e-4
    assert 0 < lat.p_star < 1


# --------------------------------------------------------------------------- #
# solve_dynkin and the oracles
# --------------------------------------------------------------------------- #

def test_zero_penalty_value_is_immediate_payoff():
    for z in (80.0, 100.0, 120.0):
        market = MarketParams(z, 0.03, 0.3, 1.0)
        sol = solve_dynkin(build_lattice(market, 25), GameOptionSpec.put(100.0))
        assert sol.initial_capital == max(100.0 - z, 0.0)


def test_prohibitive_penalty_gives_american_value():
    spec = GameOptionSpec.put(100.0, penalty=1e6 * 100.0)
    for n in (5, 50, 200):
        lat = build_lattice(MARKET, n)
        assert dynkin_value(lat, spec) == pytest.approx(plain_american(MARKET, n, 100.0), abs=1e-10)
        assert american_value(lat, spec) == pytest.approx(plain_american(MARKET, n, 100.0), abs=1e-10)


def test_hand_tree_n2():
    # independent scalar evaluation: V(1,.) = [13.1877, 0], root continuation 7.06 exceeds the penalty
    lat = build_lattice(MARKET0, 2)
    spec = GameOptionSpec.put(100.0, penalty=2.0)
    sol = solve_dynkin(lat, spec)
    assert sol.values[1, 0] == pytest.approx(13.18765546054152, abs=1e-12)
    assert sol.initial_capital == 2.0
    assert brute_force_value(lat, spec) == 2.0


def test_brute_force_refuses_large_n():
    with pytest.raises(ValueError, match="limit 12"):
        brute_force_value(build_lattice(MARKET, 13), GameOptionSpec.put(100.0, 1.0))


def test_brute_force_zero_payoff():
    assert brute_force_value(build_lattice(MARKET, 8), ZERO) == 0.0


@pytest.mark.parametrize("case", corpus(40, seed=11, n_max=1))
def test_brute_force_matches_at_one_step(case):
    spec, market, n = case
    lat = build_lattice(market, n)
    assert brute_force_value(lat, spec) == pytest.approx(dynkin_value(lat, spec), abs=1e-12)


@pytest.mark.parametrize("case", corpus(30, seed=12, n_max=3))
def test_history_search_agrees_with_rule_enumeration(case):
    spec, market, n = case
    lat = build_lattice(market, min(n, 3))
    assert brute_force_value(lat, spec) == pytest.approx(enumerate_rules_value(lat, spec), abs=1e-10)


@pytest.mark.parametrize("case", corpus(60, seed=13, n_max=10))
def test_solver_matches_brute_force(case):
    spec, market, n = case
    lat = build_lattice(market, n)
    assert abs(solve_dynkin(lat, spec).initial_capital - brute_force_value(lat, spec)) <= 1e-10


def test_matrix_game_fallback_for_mixed_games():
    from gameopt.lattice import _matrix_game_value
    # matching pennies style: no saddle, value (ad - bc) / (a + d - b - c)
    v = _matrix_game_value(np.array([1.0]), np.array([0.0]), np.array([0.0]), np.array([1.0]))
    assert v[0] == pytest.approx(0.5)


# --------------------------------------------------------------------------- #
# Invariants over the random corpus
# --------------------------------------------------------------------------- #

CORPUS = corpus(80, seed=21, n_max=10)


@pytest.mark.parametrize("case", CORPUS)
def test_sandwich_and_terminal_layer(case):
    spec, market, n = case
    sol = solve_dynkin(build_lattice(market, n), spec)
    for k in range(n):
        sl = slice(0, k + 1)
        assert np.all(sol.f_tilde[k, sl] <= sol.values[k, sl] + 1e-12)
        assert np.all(sol.values[k, sl] <= sol.g_tilde[k, sl] + 1e-12)
        assert np.all(sol.values[k, sl][sol.cancel_region[k, sl]] == sol.g_tilde[k, sl][sol.cancel_region[k, sl]])
        assert np.all(sol.values[k, sl][sol.exercise_region[k, sl]] == sol.f_tilde[k, sl][sol.exercise_region[k, sl]])
    assert np.array_equal(sol.values[n], sol.f_tilde[n])
    assert np.array_equal(sol.g_tilde[n], sol.f_tilde[n])


@pytest.mark.parametrize("case", CORPUS[:30])
def test_penalty_monotonicity_and_american_bracket(case):
    spec, market, n = case
    lat = build_lattice(market, n)
    bigger = GameOptionSpec(spec.exercise, Affine(2.0, 0.01))
    v = dynkin_value(lat, spec)
    stacked = GameOptionSpec(spec.exercise, _Sum(spec.penalty, bigger.penalty))
    assert v <= dynkin_value(lat, stacked) + 1e-12
    assert v <= american_value(lat, spec) + 1e-12


class _Sum:
    def __init__(self, a, b):
        self.a, self.b = a, b

    def __call__(self, t, s):
        return self.a(t, s) + self.b(t, s)


@pytest.mark.parametrize("case", CORPUS[:40])
def test_rational_stopping_pair_attains_value(case):
    spec, market, n = case
    lat = build_lattice(market, n)
    sol = solve_dynkin(lat, spec)
    paths = all_paths(n)
    mu = first_entrance_batch(sol.cancel_region, paths)
    tau = first_entrance_batch(sol.exercise_region, paths)
    value = float((stopped_payoff(sol, paths, mu, tau) * path_probs(lat, paths)).sum())
    assert value == pytest.approx(sol.initial_capital, abs=1e-10)


# --------------------------------------------------------------------------- #
# Hedge
# --------------------------------------------------------------------------- #

def portfolio_paths(sol, paths):
    """Discounted self-financing portfolio Z~(k) on every path."""
    lat = sol.lattice
    n = lat.n
    j = np.concatenate([np.zeros((len(paths), 1), int), np.cumsum(paths > 0, axis=1)], axis=1)
    Z = np.empty((len(paths), n + 1))
    Z[:, 0] = sol.initial_capital
    for k in range(n):
        s_now = lat.discounted_stock(k, j[:, k])
        s_next = lat.discounted_stock(k + 1, j[:, k + 1])
        Z[:, k + 1] = Z[:, k] + sol.deltas[k, j[:, k]] * (s_next - s_now)
    return Z, j


def test_zero_payoff_has_zero_deltas():
    sol = hedge_deltas(solve_dynkin(build_lattice(MARKET, 6), ZERO))
    assert np.all(sol.deltas[np.tril_indices(6)] == 0.0)


def test_one_step_delta_formula():
    lat = build_lattice(MARKET, 1)
    sol = hedge_deltas(solve_dynkin(lat, GameOptionSpec.put(100.0, 50.0)))
    disc = math.exp(-MARKET.r * lat.dt)
    expected = (sol.values[1, 1] - sol.values[1, 0]) / (100.0 * lat.u * disc - 100.0 * lat.d * disc)
    assert sol.deltas[0, 0] == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("case", CORPUS[:40])
def test_hedge_superreplicates_on_every_path(case):
    spec, market, n = case
    lat = build_lattice(market, n)
    sol = hedge_deltas(solve_dynkin(lat, spec))
    paths = all_paths(n)
    Z, j = portfolio_paths(sol, paths)
    mu = first_entrance_batch(sol.cancel_region, paths)
    rows = np.arange(len(paths))
    for k in range(n + 1):
        stop = np.minimum(mu, k)
        assert np.all(Z[rows, stop] >= sol.values[stop, j[rows, stop]] - 1e-10)
    for tau in range(n + 1):
        tau_arr = np.full(len(paths), tau)
        q = stopped_payoff(sol, paths, mu, tau_arr)
        assert np.all(Z[rows, np.minimum(mu, tau)] >= q - 1e-10)


@pytest.mark.parametrize("case", CORPUS[:20])
def test_hedge_is_a_lattice_martingale(case):
    spec, market, n = case
    lat = build_lattice(market, n)
    sol = hedge_deltas(solve_dynkin(lat, spec))
    p = lat.p_star
    for k in range(n):
        s_now = lat.discounted_stock(k)
        s_next = lat.discounted_stock(k + 1)
        # one-step portfolio change from any node: delta * (S~ next - S~ now)
        up = sol.deltas[k, :k + 1] * (s_next[1:] - s_now)
        down = sol.deltas[k, :k + 1] * (s_next[:-1] - s_now)
        assert np.all(np.abs(p * up + (1 - p) * down) <= 1e-12 * max(1.0, np.abs(up).max()))


# --------------------------------------------------------------------------- #
# Rational indices
# --------------------------------------------------------------------------- #

def test_rational_cancellation_extremes():
    paths = all_paths(5)
    sol0 = solve_dynkin(build_lattice(MARKET, 5), GameOptionSpec.put(100.0))
    solbig = solve_dynkin(build_lattice(MARKET, 5), GameOptionSpec.put(100.0, 1e6))
    for path in paths:
        assert rational_cancellation(sol0, path) == 0
        assert rational_cancellation(solbig, path) == 5


def test_rational_indices_on_hand_tree():
    market = MarketParams(110.0, 0.04, 0.2, 1.0)
    sol = solve_dynkin(build_lattice(market, 3), GameOptionSpec.put(100.0, 5.0))
    for path in all_paths(3):
        j = up_counts(path)
        cancel_hits = [k for k in range(3) if sol.cancel_region[k, j[k]]]
        exercise_hits = [k for k in range(4) if sol.exercise_region[k, j[k]]]
        assert rational_cancellation(sol, path) == (cancel_hits[0] if cancel_hits else 3)
        assert rational_exercise(sol, path) == exercise_hits[0]
    # the horizon layer is never a cancel node
    assert not sol.cancel_region[3].any()


def test_path_length_is_checked():
    sol = solve_dynkin(build_lattice(MARKET, 3), GameOptionSpec.put(100.0, 1.0))
    with pytest.raises(ValueError):
        rational_cancellation(sol, [1, -1])


def test_solution_csv(tmp_path):
    sol = hedge_deltas(solve_dynkin(build_lattice(MARKET, 3), GameOptionSpec.put(100.0, 1.0)))
    sol.to_csv(tmp_path / "solution.csv")
    rows = list(csv.reader(open(tmp_path / "solution.csv")))
    assert rows[0] == ["step", "up_count", "stock", "V", "F_tilde", "G_tilde", "delta",
                       "in_exercise", "in_cancel"]
    assert len(rows) == 1 + 10
    assert float(rows[1][3]) == sol.initial_capital
    assert rows[-1][6] == ""
