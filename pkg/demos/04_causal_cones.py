"""Why HE-ITE stays small: causal cones of the one-layer ansatz.

For a two-qubit observable Z_u Z_v only a handful of gates can influence
the expectation value; those gates split into independent sub-circuits of
at most six qubits, whatever the register size.
"""
import itertools

import numpy as np

from fvqe.ansatz import build_hea
from fvqe.sim import causal_cone, expectation_local_observable, simulate, z_expectation

for n in (8, 16, 23):
    c = build_hea(n, 1)
    widths = [causal_cone(c, S).max_width for S in itertools.combinations(range(n), 2)]
    print(f"n = {n:2d}: largest sub-cone {max(widths)} qubits, "
          f"histogram {np.bincount(widths).tolist()}")

c = build_hea(10, 1)
theta = np.random.default_rng(0).uniform(-np.pi, np.pi, c.param_count)
S = (3, 4)
print("cone:", expectation_local_observable(c, theta, S),
      "full:", z_expectation(simulate(c, theta)[None, :], S, 10)[0])
