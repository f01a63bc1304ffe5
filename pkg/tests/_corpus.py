"""Seeded random (spec, market, n) instances shared by the lattice tests."""

import numpy as np

from gameopt.lattice import minimal_steps
from gameopt.model import Affine, GameOptionSpec, MarketParams, Table, Vanilla


def random_payoff(rng, z):
    kind = rng.choice(["put", "call", "table"])
    if kind != "table":
        return Vanilla(str(kind), float(z * rng.uniform(0.7, 1.3)))
    stocks = np.sort(rng.uniform(0.3 * z, 2.0 * z, size=4))
    values = rng.uniform(0.0, 0.3 * z, size=4)
    return Table(tuple(stocks.tolist()), tuple(values.tolist()))


def random_penalty(rng, z):
    kind = rng.choice(["const", "affine", "table"])
    if kind == "const":
        return Affine(float(rng.uniform(0.0, 0.1 * z)))
    if kind == "affine":
        return Affine(float(rng.uniform(0.0, 0.05 * z)), float(rng.uniform(0.0, 0.05)))
    stocks = np.sort(rng.uniform(0.3 * z, 2.0 * z, size=3))
    return Table(tuple(stocks.tolist()), tuple(rng.uniform(0.0, 0.1 * z, size=3).tolist()),
                 where="penalty")


def random_instance(rng, n_max=10):
    z = float(rng.uniform(50, 150))
    market = MarketParams(z, float(rng.uniform(0.0, 0.1)), float(rng.uniform(0.1, 0.5)),
                          float(rng.uniform(0.25, 2.0)))
    spec = GameOptionSpec(random_payoff(rng, z), random_penalty(rng, z))
    n = max(int(rng.integers(1, n_max + 1)), minimal_steps(market))
    return spec, market, n


def corpus(size, seed=0, n_max=10):
    rng = np.random.default_rng(seed)
    return [random_instance(rng, n_max) for _ in range(size)]
