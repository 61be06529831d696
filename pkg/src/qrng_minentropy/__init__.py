"""Min-entropy certification for multi-detector photon-counting QRNGs."""

__version__ = "0.1.0"

from .combinatorics import LogReal, r_stirling2, r_stirling2_recurrence, scaled_r_stirling2
from .conditional import cond_prob, max_outcome_prob, reduced_prob, sierpinski_matrix
from .detector import (
    AcquisitionParams,
    CalibrationCurve,
    DetectorArrayModel,
    SourceModel,
    bit_probabilities,
    classical_min_entropy,
    equivalent_efficiency,
    generation_rate,
    unbiased_mu,
)
from .entropy import (
    EntropyReport,
    TruncationPolicy,
    classical_report,
    conditional_min_entropy,
    guessing_probability,
    no_source_info_entropy,
    optimize_mu,
    sweep_mu,
)
from .errors import (
    FrameFormatError,
    InfeasibleModelError,
    ParameterError,
    QRNGError,
    ResourceLimitError,
)
from .extractor import ExtractorParams, output_length, toeplitz_extract
from .frames import read_frames, write_frames
from .simulator import FrameBatch, SimSeed, empirical_bit_prob, empirical_guess_rate, simulate_frames
