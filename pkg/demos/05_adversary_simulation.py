"""
Simulating the adversary
========================

Draw gating patterns and photon numbers, route photons, and let the
adversary bet on her most likely string.  Her hit rate should match the
guessing probability computed by the entropy engine.
"""

import math

from qrng_minentropy.detector import DetectorArrayModel, SourceModel, bit_probabilities
from qrng_minentropy.entropy import guessing_probability
from qrng_minentropy.simulator import SimSeed, empirical_bit_prob, empirical_guess_rate, simulate_frames

model = DetectorArrayModel(4, 0.7)
source = SourceModel.uniform_illumination(0.5, 4)

batch = simulate_frames(model, source, 200_000, SimSeed(1))
p1, se = empirical_bit_prob(batch)
print("per-pixel P1:", p1.round(4), "model:", round(bit_probabilities(0.5, 0.7)[1], 4))

freq, err = empirical_guess_rate(model, source, 500_000, SimSeed(2))
theory = guessing_probability(model, source)
print(f"adversary hit rate {freq:.5f} +- {err:.5f}, engine {theory:.5f}")
print("certified bits per frame:", -math.log2(theory))
