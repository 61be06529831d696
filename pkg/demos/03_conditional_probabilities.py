"""
Outcome probabilities given photon number and gating
====================================================

Once the photon number n and the status vector s are known, an outcome x
depends only on its click count k and on the number of active pixels.
The full table over all (s, x) pairs has a self-similar zero pattern.
"""

import numpy as np

from qrng_minentropy.conditional import ReducedProbabilityTable, max_outcome_prob, sierpinski_matrix

# rows: click count k, columns: active pixels l, for 4 photons on 5 pixels
table = ReducedProbabilityTable.build(4, 5)
np.set_printoptions(precision=4, suppress=True)
print(table.entries)

# the adversary's best bet for each number of active pixels
for ell in range(6):
    k, p = max_outcome_prob(4, ell, 5)
    print(f"l={ell}: bet on k={k} clicks, success {p:.4f}")

# zero pattern of the 8x8 matrix on three pixels, two photons
mat = sierpinski_matrix(3, 2)
for row in mat:
    print("".join("#" if v > 0 else "." for v in row))
