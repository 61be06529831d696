"""Light source, pixel array and the equivalent-efficiency detector model.

Illumination is uniform: with ``mu_px`` mean photons per pixel per frame the
source emits Poisson(``M * mu_px``) photons, each routed to one of the ``M``
pixels with probability ``1/M``.  By Poisson thinning a single pixel then
sees Poisson(``mu_px``) photons, so it receives none with probability
``exp(-mu_px)``.

Detector non-idealities are folded into one equivalent efficiency ``eta``:
an adversary switches each pixel on with probability ``eta`` and an active
pixel clicks iff at least one photon reaches it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import (
    CalibrationRangeError,
    InfeasibleCalibrationError,
    InfeasibleModelError,
    ParameterError,
)

__all__ = [
    "AcquisitionParams",
    "SourceModel",
    "DetectorArrayModel",
    "CalibrationCurve",
    "no_photon_prob",
    "bit_probabilities",
    "equivalent_efficiency",
    "unbiased_mu",
    "status_config_prob",
    "all_status_probs",
    "classical_min_entropy",
    "generation_rate",
]


def _check_probability(name: str, p: float) -> None:
    if not (0.0 <= p <= 1.0):
        raise ParameterError(f"{name} must lie in [0, 1], got {p}")


@dataclass(frozen=True)
class AcquisitionParams:
    """Frame timing.  Defaults are the camera's shortest gate and its frame rate."""

    integration_time: float = 200e-9
    frame_rate: float = 49e3

    def __post_init__(self) -> None:
        if not (self.integration_time > 0 and self.frame_rate > 0):
            raise ParameterError("integration time and frame rate must be positive")
        if 1.0 / self.frame_rate < self.integration_time:
            raise ParameterError("frame period 1/frame_rate is shorter than the integration time")

    @property
    def frame_period(self) -> float:
        return 1.0 / self.frame_rate


@dataclass(frozen=True)
class SourceModel:
    """Photon-number law per frame: Poisson with mean ``mu_total`` or a fixed count."""

    kind: str = "poisson"
    mu_total: float = 0.0
    n_fixed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("poisson", "fixed"):
            raise ParameterError(f"unknown source kind {self.kind!r}")
        if self.mu_total < 0 or not math.isfinite(self.mu_total):
            raise ParameterError("mu_total must be finite and nonnegative")
        if self.n_fixed < 0:
            raise ParameterError("n_fixed must be nonnegative")

    @classmethod
    def poisson(cls, mu_total: float) -> "SourceModel":
        return cls("poisson", float(mu_total), 0)

    @classmethod
    def fixed(cls, n: int) -> "SourceModel":
        return cls("fixed", 0.0, int(n))

    @classmethod
    def uniform_illumination(cls, mu_px: float, pixels: int) -> "SourceModel":
        return cls.poisson(mu_px * pixels)

    @property
    def is_fixed(self) -> bool:
        return self.kind == "fixed"

    def pmf(self, n):
        n = np.asarray(n)
        if self.is_fixed:
            return (n == self.n_fixed).astype(float)
        return stats.poisson.pmf(n, self.mu_total)

    def logpmf(self, n):
        n = np.asarray(n)
        if self.is_fixed:
            return np.where(n == self.n_fixed, 0.0, -np.inf)
        if self.mu_total == 0:
            return np.where(n == 0, 0.0, -np.inf)
        return stats.poisson.logpmf(n, self.mu_total)

    def mode(self) -> int:
        return self.n_fixed if self.is_fixed else int(math.floor(self.mu_total))

    def tail_mass(self, lo: int, hi: int) -> float:
        """Probability of a photon count outside ``[lo, hi]``."""
        if self.is_fixed:
            return 0.0 if lo <= self.n_fixed <= hi else 1.0
        below = stats.poisson.cdf(lo - 1, self.mu_total) if lo > 0 else 0.0
        return float(below + stats.poisson.sf(hi, self.mu_total))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.is_fixed:
            return np.full(size, self.n_fixed, dtype=np.int64)
        return rng.poisson(self.mu_total, size=size).astype(np.int64)


@dataclass(frozen=True)
class DetectorArrayModel:
    """``pixels`` detectors sharing one equivalent efficiency, or one per pixel."""

    pixels: int
    efficiency: float | tuple[float, ...] = 1.0
    acquisition: AcquisitionParams = field(default_factory=AcquisitionParams)

    def __post_init__(self) -> None:
        if self.pixels < 1:
            raise ParameterError("pixel count must be at least 1")
        eff = self.efficiency
        if isinstance(eff, (list, tuple, np.ndarray)):
            eff = tuple(float(e) for e in eff)
            if len(eff) != self.pixels:
                raise ParameterError(
                    f"efficiency vector has length {len(eff)}, expected {self.pixels}"
                )
            object.__setattr__(self, "efficiency", eff)
            for e in eff:
                _check_probability("eta", e)
        else:
            object.__setattr__(self, "efficiency", float(eff))
            _check_probability("eta", self.efficiency)

    @property
    def is_uniform(self) -> bool:
        if isinstance(self.efficiency, float):
            return True
        return len(set(self.efficiency)) == 1

    @property
    def uniform_eta(self) -> float:
        if isinstance(self.efficiency, float):
            return self.efficiency
        if not self.is_uniform:
            raise ParameterError("model has per-pixel efficiencies")
        return self.efficiency[0]

    def eta_vector(self) -> np.ndarray:
        if isinstance(self.efficiency, float):
            return np.full(self.pixels, self.efficiency)
        return np.array(self.efficiency)

    def with_eta(self, eta: float) -> "DetectorArrayModel":
        return DetectorArrayModel(self.pixels, eta, self.acquisition)


class CalibrationCurve:
    """Tabulated equivalent efficiency versus mean photons per pixel.

    Values between knots are linearly interpolated; asking outside the
    tabulated range raises :class:`CalibrationRangeError`.
    """

    def __init__(self, mu: Sequence[float], eta: Sequence[float]):
        mu = np.asarray(mu, dtype=float)
        eta = np.asarray(eta, dtype=float)
        if mu.ndim != 1 or mu.shape != eta.shape or mu.size == 0:
            raise ParameterError("calibration needs equal-length, nonempty mu and eta columns")
        if np.any(np.diff(mu) <= 0):
            raise ParameterError("calibration mu values must be strictly increasing")
        if np.any((eta < 0) | (eta > 1)):
            raise ParameterError("calibration eta values must lie in [0, 1]")
        self.mu = mu
        self.eta = eta

    @classmethod
    def read(cls, path: str | Path) -> "CalibrationCurve":
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and not row[0].startswith("#")]
        if not rows or [c.strip() for c in rows[0]] != ["mu", "eta"]:
            raise ParameterError(f"{path}: calibration file must start with header 'mu,eta'")
        try:
            pairs = [(float(a), float(b)) for a, b in rows[1:]]
        except ValueError as exc:
            raise ParameterError(f"{path}: malformed calibration row ({exc})") from None
        return cls([p[0] for p in pairs], [p[1] for p in pairs])

    def write(self, path: str | Path, comments: Sequence[str] = ()) -> None:
        with open(path, "w", newline="") as fh:
            for line in comments:
                fh.write(f"# {line}\n")
            fh.write("mu,eta\n")
            for m, e in zip(self.mu, self.eta):
                fh.write(f"{m:.17g},{e:.17g}\n")

    def __call__(self, mu_px: float) -> float:
        if not (self.mu[0] <= mu_px <= self.mu[-1]):
            raise CalibrationRangeError(
                f"mu_px={mu_px} outside calibrated range [{self.mu[0]}, {self.mu[-1]}]"
            )
        return float(np.interp(mu_px, self.mu, self.eta))


def no_photon_prob(mu_px: float) -> float:
    if mu_px < 0:
        raise ParameterError(f"mu_px must be nonnegative, got {mu_px}")
    return math.exp(-mu_px)


def bit_probabilities(mu_px: float, eta: float) -> tuple[float, float]:
    """(P0, P1) of a single pixel under the gating model."""
    if mu_px < 0:
        raise ParameterError(f"mu_px must be nonnegative, got {mu_px}")
    _check_probability("eta", eta)
    p1 = -eta * math.expm1(-mu_px)
    # both forms avoid cancellation when one outcome is nearly certain
    p0 = (1.0 - eta) + eta * math.exp(-mu_px)
    return p0, p1


def equivalent_efficiency(p1_measured: float, mu_px: float) -> float:
    """Invert the gating model: the eta reproducing a measured click probability."""
    if mu_px <= 0:
        raise ParameterError(f"mu_px must be positive, got {mu_px}")
    _check_probability("P1", p1_measured)
    reach = -math.expm1(-mu_px)
    if p1_measured > reach:
        raise InfeasibleCalibrationError(
            f"P1={p1_measured} exceeds 1-exp(-mu_px)={reach}; no eta <= 1 reproduces it"
        )
    return p1_measured / reach


def unbiased_mu(eta: float) -> float:
    """Mean photons per pixel at which a pixel clicks with probability 1/2."""
    if not (0 < eta <= 1):
        raise ParameterError(f"eta must lie in (0, 1], got {eta}")
    if eta <= 0.5:
        raise InfeasibleModelError(f"eta={eta} <= 1/2: P1 = 1/2 is unreachable")
    return -math.log1p(-1.0 / (2.0 * eta))


def status_config_prob(s: Sequence[int], model: DetectorArrayModel) -> float:
    s = np.asarray(s, dtype=bool)
    if s.shape != (model.pixels,):
        raise ParameterError(f"status vector has length {s.size}, expected {model.pixels}")
    eta = model.eta_vector()
    return float(np.prod(np.where(s, eta, 1.0 - eta)))


def all_status_probs(model: DetectorArrayModel) -> np.ndarray:
    """Probabilities of all ``2**M`` status configurations.

    Index ``i`` encodes the configuration with pixel 1 as the most
    significant bit.
    """
    M = model.pixels
    eta = model.eta_vector()
    probs = np.ones(1)
    for e in eta:
        # appending a pixel as the new least significant bit
        probs = np.stack([probs * (1.0 - e), probs * e], axis=1).reshape(-1)
    return probs


def classical_min_entropy(p0: float, p1: float, pixels: int) -> float:
    """``-M log2 max(P0, P1)`` for i.i.d. pixels."""
    _check_probability("P0", p0)
    _check_probability("P1", p1)
    if abs(p0 + p1 - 1.0) > 1e-12:
        raise ParameterError(f"P0 + P1 must equal 1, got {p0 + p1}")
    # log1p keeps precision when one outcome is nearly certain
    return -pixels * math.log1p(-min(p0, p1)) / math.log(2)


def generation_rate(entropy_per_frame: float, acq: AcquisitionParams) -> float:
    if entropy_per_frame < 0:
        raise ParameterError("entropy per frame must be nonnegative")
    return entropy_per_frame * acq.frame_rate

