import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrng_minentropy.detector import (
    AcquisitionParams,
    CalibrationCurve,
    DetectorArrayModel,
    SourceModel,
    all_status_probs,
    bit_probabilities,
    classical_min_entropy,
    equivalent_efficiency,
    generation_rate,
    no_photon_prob,
    status_config_prob,
    unbiased_mu,
)
from qrng_minentropy.errors import (
    CalibrationRangeError,
    InfeasibleCalibrationError,
    InfeasibleModelError,
    ParameterError,
)


def test_no_photon_prob():
    assert no_photon_prob(0) == 1.0
    assert no_photon_prob(math.log(2)) == pytest.approx(0.5, rel=1e-15)
    assert no_photon_prob(28) == pytest.approx(6.914400106940203e-13, rel=1e-14)
    with pytest.raises(ParameterError):
        no_photon_prob(-0.1)


def test_bit_probabilities():
    assert bit_probabilities(0, 0.37) == (1.0, 0.0)
    p0, p1 = bit_probabilities(50, 0.5)
    assert p0 == pytest.approx(0.5, abs=1e-15) and p1 == pytest.approx(0.5, abs=1e-15)
    assert bit_probabilities(1, 0.5)[1] == pytest.approx(0.5 * (1 - math.exp(-1)), rel=1e-15)
    assert bit_probabilities(1, 0.5)[1] == pytest.approx(0.31606, abs=5e-6)
    with pytest.raises(ParameterError):
        bit_probabilities(1, 1.2)
    with pytest.raises(ParameterError):
        bit_probabilities(-1, 0.5)


@given(st.floats(0, 60), st.floats(0, 1))
def test_bit_probabilities_sum_to_one(mu, eta):
    p0, p1 = bit_probabilities(mu, eta)
    assert p0 + p1 == pytest.approx(1.0, abs=2e-16)


@given(st.floats(0, 60), st.floats(0, 60), st.floats(0, 1), st.floats(0, 1))
def test_bit_probabilities_monotone(mu_a, mu_b, eta_a, eta_b):
    mu_a, mu_b = sorted((mu_a, mu_b))
    eta_a, eta_b = sorted((eta_a, eta_b))
    assert bit_probabilities(mu_a, eta_a)[1] <= bit_probabilities(mu_b, eta_a)[1]
    assert bit_probabilities(mu_a, eta_a)[1] <= bit_probabilities(mu_a, eta_b)[1]


def test_equivalent_efficiency():
    assert equivalent_efficiency(0.0, 2.0) == 0.0
    assert equivalent_efficiency(0.3, math.log(2)) == pytest.approx(0.6, rel=1e-15)
    with pytest.raises(InfeasibleCalibrationError):
        equivalent_efficiency(0.6, math.log(2))
    with pytest.raises(ParameterError):
        equivalent_efficiency(0.1, 0.0)


@settings(max_examples=500)
@given(st.floats(1e-3, 50), st.floats(0.01, 1))
def test_efficiency_round_trip(mu, eta):
    p1 = bit_probabilities(mu, eta)[1]
    assert equivalent_efficiency(p1, mu) == pytest.approx(eta, rel=1e-12)


def test_unbiased_mu():
    assert unbiased_mu(1.0) == pytest.approx(math.log(2), rel=1e-15)
    assert unbiased_mu(0.51) == pytest.approx(3.932, abs=5e-4)
    assert unbiased_mu(0.51) == pytest.approx(-math.log(1 - 1 / 1.02), rel=1e-13)
    with pytest.raises(InfeasibleModelError):
        unbiased_mu(0.5)
    with pytest.raises(ParameterError):
        unbiased_mu(0.0)
    for eta in (0.55, 0.8, 1.0):
        assert bit_probabilities(unbiased_mu(eta), eta)[1] == pytest.approx(0.5, rel=1e-14)


def test_status_config_prob():
    assert status_config_prob((1, 1, 1), DetectorArrayModel(3, 1.0)) == 1.0
    assert status_config_prob((1, 0), DetectorArrayModel(2, (0.7, 0.7))) == pytest.approx(0.21)
    model = DetectorArrayModel(4, 0.37)
    total = sum(status_config_prob(s, model) for s in product((0, 1), repeat=4))
    assert total == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ParameterError):
        status_config_prob((1, 0, 1), model)


def test_status_normalization_exhaustive():
    rng = np.random.default_rng(3)
    for M in range(1, 11):
        model = DetectorArrayModel(M, tuple(rng.uniform(0, 1, M)))
        probs = all_status_probs(model)
        assert math.fsum(probs) == pytest.approx(1.0, abs=1e-14)
        # enumeration order matches pixel 1 as the most significant bit
        for idx in (0, 1, 2**M - 1, (2**M) // 3):
            s = [(idx >> (M - 1 - i)) & 1 for i in range(M)]
            assert probs[idx] == pytest.approx(status_config_prob(s, model), rel=1e-13)


def test_classical_min_entropy():
    assert classical_min_entropy(0.5, 0.5, 9) == 9.0
    assert classical_min_entropy(1.0, 0.0, 7) == 0.0
    assert classical_min_entropy(0.75, 0.25, 4) == pytest.approx(4 * math.log2(4 / 3), rel=1e-15)
    assert classical_min_entropy(0.75, 0.25, 4) == pytest.approx(1.660, abs=5e-4)
    with pytest.raises(ParameterError):
        classical_min_entropy(0.5, 0.6, 2)


@given(st.floats(0, 1), st.integers(1, 1024))
def test_classical_bounded_by_pixels(p1, M):
    h = classical_min_entropy(1 - p1, p1, M)
    assert 0 <= h <= M
    if h == M:
        assert p1 == 0.5


def test_generation_rate():
    assert generation_rate(1024, AcquisitionParams(frame_rate=49000)) == 50.176e6
    assert generation_rate(0, AcquisitionParams()) == 0
    assert generation_rate(4.5, AcquisitionParams(frame_rate=1000)) == 4500
    with pytest.raises(ParameterError):
        generation_rate(-1, AcquisitionParams())


def test_acquisition_validation():
    with pytest.raises(ParameterError):
        AcquisitionParams(integration_time=0)
    with pytest.raises(ParameterError):
        AcquisitionParams(integration_time=1e-3, frame_rate=49e3)
    assert AcquisitionParams().frame_period == pytest.approx(1 / 49e3)


def test_model_validation():
    with pytest.raises(ParameterError):
        DetectorArrayModel(0, 0.5)
    with pytest.raises(ParameterError):
        DetectorArrayModel(3, (0.5, 0.5))
    with pytest.raises(ParameterError):
        DetectorArrayModel(2, (0.5, 1.5))
    m = DetectorArrayModel(3, [0.2, 0.2, 0.2])
    assert m.is_uniform and m.uniform_eta == 0.2
    with pytest.raises(ParameterError):
        DetectorArrayModel(2, (0.1, 0.2)).uniform_eta


def test_source_model():
    src = SourceModel.uniform_illumination(0.5, 8)
    assert src.mu_total == 4.0
    assert src.pmf(np.arange(200)).sum() == pytest.approx(1.0, abs=1e-14)
    assert src.tail_mass(0, 100) < 1e-15
    fixed = SourceModel.fixed(3)
    assert fixed.pmf([2, 3]).tolist() == [0.0, 1.0]
    assert fixed.tail_mass(0, 2) == 1.0
    with pytest.raises(ParameterError):
        SourceModel("laser", 1.0)
    with pytest.raises(ParameterError):
        SourceModel.poisson(-1)


def test_calibration_curve(tmp_path):
    path = tmp_path / "cal.csv"
    path.write_text("mu,eta\n0.5,0.60\n2.0,0.90\n")
    curve = CalibrationCurve.read(path)
    assert curve(0.5) == 0.6
    assert curve(1.25) == pytest.approx(0.75)
    with pytest.raises(CalibrationRangeError):
        curve(2.5)
    out = tmp_path / "out.csv"
    curve.write(out, comments=["source=test"])
    again = CalibrationCurve.read(out)
    np.testing.assert_array_equal(again.mu, curve.mu)
    np.testing.assert_array_equal(again.eta, curve.eta)


@pytest.mark.parametrize(
    "text",
    ["mu_px,eta\n1,0.5\n", "mu,eta\n1,0.5\n1,0.6\n", "mu,eta\n1,abc\n", "mu,eta\n1,1.5\n", ""],
)
def test_calibration_curve_rejects(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ParameterError):
        CalibrationCurve.read(path)
