"""
Equivalent-efficiency detector model
====================================

Each pixel is switched on with probability eta and clicks if a photon
reaches it.  A measured click probability therefore pins down eta at every
illumination level.
"""

import numpy as np

from qrng_minentropy.detector import (
    CalibrationCurve,
    bit_probabilities,
    classical_min_entropy,
    equivalent_efficiency,
    unbiased_mu,
)

# click probability against mean photons per pixel
for mu in (0.1, 0.5, 1.0, 2.0, 5.0, 28.0):
    p0, p1 = bit_probabilities(mu, 0.6)
    print(f"mu_px={mu:5.1f}  P1={p1:.6f}  H_inf per pixel={classical_min_entropy(p0, p1, 1):.6f}")

# with eta > 1/2 there is a flux where the bit is unbiased
print("unbiased mu_px at eta=0.6:", unbiased_mu(0.6))

# with eta = 1/2 the bit only approaches 1/2, e.g. at 28 photons per pixel
print("P1 at eta=0.5, mu_px=28:", bit_probabilities(28, 0.5)[1])

# invert measured click probabilities into a calibration curve
mu = np.array([0.5, 1.0, 2.0, 4.0])
measured = np.array([0.27, 0.44, 0.62, 0.71])
eta = [equivalent_efficiency(p, m) for p, m in zip(measured, mu)]
curve = CalibrationCurve(mu, eta)
print("eta at knots:", np.round(curve.eta, 4))
print("interpolated eta at mu_px=3:", round(curve(3.0), 4))
