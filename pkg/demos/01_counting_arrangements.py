"""
Counting photon arrangements
============================

How many ways can n labelled photons land on M pixels so that a chosen set
of k pixels each sees at least one photon, while r other pixels may absorb
anything?  The answer is k! times an r-restricted Stirling number.
"""

from fractions import Fraction
from itertools import product

from qrng_minentropy.combinatorics import r_stirling2, r_stirling2_recurrence, scaled_r_stirling2, stirling2
from qrng_minentropy.conditional import cond_prob, cond_prob_oracle

# ordinary Stirling numbers: partitions of a 4-set into 2 blocks
print("S(4, 2) =", stirling2(4, 2))

# six pixels, four active, three of them clicked, four photons
# the two inactive pixels are the designated elements (r = 2)
x = (1, 1, 1, 0, 0, 0)
s = (1, 1, 1, 1, 0, 0)
print("r-Stirling {6 brace 5}_2 =", r_stirling2(4, 3, 2))
print("arrangements =", scaled_r_stirling2(4, 3, 2), "out of", 6**4)

# the closed form against a brute-force sum over occupancy vectors
print("closed form:", cond_prob(x, 4, s, exact=True))
print("enumeration:", cond_prob_oracle(x, 4, s))

# the same number from the reduction over designated elements
for p in range(3):
    print(f"recurrence with p={p}:", r_stirling2_recurrence(6, 5, 2, p))

# every (x, s) pair on three pixels with three photons agrees
agree = all(
    cond_prob(a, 3, b, exact=True) == cond_prob_oracle(a, 3, b)
    for a in product((0, 1), repeat=3)
    for b in product((0, 1), repeat=3)
)
print("all 64 pairs agree:", agree)
print("as a float:", float(Fraction(84, 1296)))
