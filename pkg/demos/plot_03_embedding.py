"""
Embedding a random walk in Brownian motion
==========================================

Each step of the walk is the first time Brownian motion moves
``sqrt(T/n)`` away from its last position. The exit times average to
``kT/n`` and the signs are fair coin flips.
"""

import numpy as np

from gameopt import continuous_to_discrete, discrete_to_continuous, embedding_run, sample_embedded

path, emb = sample_embedded(seed=0, n=8, T=1.0, dt_max=1e-3)
print("theta:", np.round(emb.thetas, 3))
print("signs:", emb.xi)

# translating stopping times between the two clocks
print("step at t=0.5:", continuous_to_discrete(emb, 0.5, 1.0))
print("time of step 3:", discrete_to_continuous(emb, 3, 1.0))

_, stats = embedding_run(seed=0, n=64, T=1.0, paths=2000, dt_max=1e-3)
print(stats.summary())
