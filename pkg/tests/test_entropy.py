import math
from itertools import product

import numpy as np
import pytest

from qrng_minentropy.conditional import cond_prob_oracle
from qrng_minentropy.detector import (
    CalibrationCurve,
    DetectorArrayModel,
    SourceModel,
    status_config_prob,
)
from qrng_minentropy.entropy import (
    SWEEP_HEADER,
    TruncationPolicy,
    _uniform_guess,
    classical_entropy_for,
    classical_report,
    conditional_min_entropy,
    conditional_min_entropy_general,
    guessing_probability,
    no_source_info_entropy,
    optimize_mu,
    photon_interval,
    status_interval,
    sweep_mu,
    write_sweep_csv,
)
from qrng_minentropy.errors import (
    CalibrationRangeError,
    ParameterError,
    ResourceLimitError,
    TruncationPolicyError,
)


def brute_force_guess(model, pn):
    """Enumerate n, s and x with the multinomial oracle; no Stirling numbers involved."""
    M = model.pixels
    total = 0.0
    for n, weight in pn.items():
        for s in product((0, 1), repeat=M):
            ps = status_config_prob(s, model)
            best = max(cond_prob_oracle(x, n, s) for x in product((0, 1), repeat=M))
            total += weight * ps * float(best)
    return total


def brute_force_no_photon_info(model, pn):
    M = model.pixels
    total = 0.0
    for s in product((0, 1), repeat=M):
        ps = status_config_prob(s, model)
        best = max(
            sum(w * float(cond_prob_oracle(x, n, s)) for n, w in pn.items())
            for x in product((0, 1), repeat=M)
        )
        total += ps * best
    return total


def poisson_weights(mu_total, n_max=8):
    return {n: math.exp(-mu_total) * mu_total**n / math.factorial(n) for n in range(n_max + 1)}


def test_policy_validation():
    with pytest.raises(ParameterError):
        TruncationPolicy(eps_n=0.0)
    with pytest.raises(ParameterError):
        TruncationPolicy(eps_s=1.0)
    assert TruncationPolicy().eps_n == 1e-15


def test_vanishing_light_is_fully_predictable():
    model = DetectorArrayModel(4, 0.5)
    p = guessing_probability(model, SourceModel.uniform_illumination(1e-9, 4))
    assert p >= 1 - 1e-8
    rep = conditional_min_entropy(model, SourceModel.uniform_illumination(1e-9, 4))
    assert 0 <= rep.h_conditional <= 2e-8


@pytest.mark.parametrize("M", [1, 2, 5, 9, 64])
def test_single_photon_all_active(M):
    model = DetectorArrayModel(M, 1.0)
    source = SourceModel.fixed(1)
    assert guessing_probability(model, source) == pytest.approx(1 / M, rel=1e-15)
    rep = conditional_min_entropy(model, source)
    assert rep.h_conditional == pytest.approx(math.log2(M), rel=1e-14, abs=1e-15)
    if M <= 16:
        general = conditional_min_entropy_general(DetectorArrayModel(M, (1.0,) * M), source)
        assert general.h_conditional == pytest.approx(math.log2(M), rel=1e-14, abs=1e-15)


def test_security_collapse_at_high_flux():
    rep = conditional_min_entropy(DetectorArrayModel(9, 0.5), SourceModel.uniform_illumination(28, 9))
    assert 6e-13 <= rep.h_conditional <= 6e-11
    assert rep.h_classical == pytest.approx(9.0, abs=1e-10)


def test_brute_force_agreement_fixed_photons():
    for M in (2, 3, 4):
        for eta in (0.3, 0.8, 1.0):
            model = DetectorArrayModel(M, eta)
            for n in range(0, 7):
                expected = brute_force_guess(model, {n: 1.0})
                got = guessing_probability(model, SourceModel.fixed(n))
                assert got == pytest.approx(expected, rel=1e-12)


def test_brute_force_agreement_poisson():
    for M in (2, 3):
        model = DetectorArrayModel(M, 0.6)
        source = SourceModel.poisson(0.2)
        expected = brute_force_guess(model, poisson_weights(0.2))
        # the oracle stops at n = 8, whose tail mass is ~1e-12
        assert guessing_probability(model, source) == pytest.approx(expected, rel=1e-10)


def test_brute_force_agreement_per_pixel():
    model = DetectorArrayModel(3, (0.2, 0.7, 0.95))
    for n in range(0, 6):
        expected = brute_force_guess(model, {n: 1.0})
        rep = conditional_min_entropy_general(model, SourceModel.fixed(n))
        assert rep.p_guess == pytest.approx(expected, rel=1e-12)


def test_binomial_route_matches_status_enumeration():
    for M in range(2, 9):
        for mu_px in (0.05, 0.7, 3.0):
            for eta in (0.25, 0.5, 0.9):
                model = DetectorArrayModel(M, eta)
                source = SourceModel.uniform_illumination(mu_px, M)
                fast = conditional_min_entropy(model, source)
                slow = conditional_min_entropy_general(model, source)
                assert fast.p_guess == pytest.approx(slow.p_guess, rel=1e-12)
                assert fast.h_conditional == pytest.approx(slow.h_conditional, rel=1e-12)


def test_general_rejects_large_arrays():
    with pytest.raises(ResourceLimitError):
        conditional_min_entropy_general(DetectorArrayModel(17, 0.5), SourceModel.poisson(1.0))


def test_all_pixels_dead():
    model = DetectorArrayModel(5, (0.0,) * 5)
    rep = conditional_min_entropy_general(model, SourceModel.uniform_illumination(2.0, 5))
    assert rep.h_conditional == 0.0
    assert rep.p_guess == 1.0


def test_no_photon_info_brute_force():
    for M in (2, 3):
        for eta in (0.4, 1.0):
            model = DetectorArrayModel(M, eta)
            source = SourceModel.poisson(0.2)
            expected = brute_force_no_photon_info(model, poisson_weights(0.2))
            rep = no_source_info_entropy(model, source)
            assert rep.p_guess == pytest.approx(expected, rel=1e-10)


def test_no_photon_info_never_below_full_information():
    for M in range(2, 7):
        for mu_px in (0.1, 1, 5):
            for eta in (0.3, 0.7, 1.0):
                model = DetectorArrayModel(M, eta)
                source = SourceModel.uniform_illumination(mu_px, M)
                with_n = conditional_min_entropy(model, source).h_conditional
                without_n = no_source_info_entropy(model, source).h_conditional
                assert with_n <= without_n * (1 + 1e-12) + 1e-15


def test_no_photon_info_zero_light():
    rep = no_source_info_entropy(DetectorArrayModel(4, 0.6), SourceModel.poisson(0.0))
    assert rep.h_conditional == 0.0


def test_fixed_source_variants_coincide():
    for M in (2, 4, 6):
        for n in (0, 1, 3, 7):
            model = DetectorArrayModel(M, 0.65)
            a = conditional_min_entropy(model, SourceModel.fixed(n))
            b = no_source_info_entropy(model, SourceModel.fixed(n))
            assert a.p_guess == pytest.approx(b.p_guess, rel=1e-13)


def test_classical_entropy_fixed_source_brute_force():
    M, n, eta = 3, 2, 0.6
    model = DetectorArrayModel(M, eta)
    best = 0.0
    for x in product((0, 1), repeat=M):
        px = sum(
            status_config_prob(s, model) * float(cond_prob_oracle(x, n, s))
            for s in product((0, 1), repeat=M)
        )
        best = max(best, px)
    assert classical_entropy_for(model, SourceModel.fixed(n)) == pytest.approx(-math.log2(best), rel=1e-12)
    assert math.isnan(classical_entropy_for(DetectorArrayModel(2, (0.1, 0.2)), SourceModel.fixed(1)))


def test_classical_report_rate():
    model = DetectorArrayModel(1024, 1.0)
    rep = classical_report(model, SourceModel.uniform_illumination(math.log(2), 1024))
    assert rep.h_classical == pytest.approx(1024, rel=1e-12)
    assert rep.secure_rate == pytest.approx(50.176e6, rel=1e-12)


def test_inequality_chain_grid():
    for M in range(2, 7):
        for mu_px in (0.1, 1, 5, 20):
            for eta in (0.3, 0.7, 1.0):
                model = DetectorArrayModel(M, eta)
                source = SourceModel.uniform_illumination(mu_px, M)
                a = conditional_min_entropy(model, source)
                b = no_source_info_entropy(model, source)
                slack = 1e-12 * max(b.h_conditional, 1e-300)
                assert 0 <= a.h_conditional <= b.h_conditional + slack
                assert b.h_conditional <= a.h_classical * (1 + 1e-12) + 1e-300
                assert a.h_classical <= M
                assert 0 < a.p_guess <= 1
                assert a.h_conditional == pytest.approx(-math.log2(a.p_guess), rel=1e-9, abs=1e-15)


def widened(lo, hi, floor, ceil=None):
    width = hi - lo + 1
    new_lo = max(floor, lo - width)
    new_hi = hi + width if ceil is None else min(ceil, hi + width)
    return new_lo, new_hi


def test_truncation_honesty():
    policy = TruncationPolicy(eps_n=1e-6, eps_s=1e-6)
    for M in (3, 6, 40):
        for mu_px in (0.1, 1, 5):
            for eta in (0.0, 0.3, 0.7, 0.95, 1.0):
                model = DetectorArrayModel(M, eta)
                source = SourceModel.uniform_illumination(mu_px, M)
                p, h, bound, n_range, r_range = _uniform_guess(model, source, policy, 1)
                assert bound <= 2e-6
                n2 = widened(*n_range, 0)
                r2 = widened(*r_range, 0, M)
                p2 = _uniform_guess(model, source, policy, 1, n2, r2)[0]
                assert abs(p2 - p) <= bound


def test_intervals():
    lo, hi, tail = photon_interval(SourceModel.poisson(25.6), TruncationPolicy())
    assert lo == 0 and tail <= 1e-15
    assert SourceModel.poisson(25.6).tail_mass(lo, hi - 1) > 1e-15
    lo, hi, tail = status_interval(256, 0.5, 1e-15)
    assert tail <= 1e-15 and lo > 0 and hi < 256
    assert status_interval(10, 1.0, 1e-15) == (0, 0, 0.0)
    assert status_interval(10, 0.0, 1e-15) == (10, 10, 0.0)
    assert photon_interval(SourceModel.fixed(7), TruncationPolicy()) == (7, 7, 0.0)


def test_hard_cap_too_small():
    with pytest.raises(TruncationPolicyError):
        guessing_probability(
            DetectorArrayModel(4, 0.5),
            SourceModel.poisson(20.0),
            TruncationPolicy(hard_n_max=25),
        )


def test_thread_count_does_not_change_result():
    model = DetectorArrayModel(64, 0.6)
    source = SourceModel.uniform_illumination(0.8, 64)
    one = conditional_min_entropy(model, source, threads=1)
    many = conditional_min_entropy(model, source, threads=5)
    assert one == many
    assert one.p_guess == many.p_guess


def test_large_array_evaluates():
    rep = conditional_min_entropy(DetectorArrayModel(256, 0.5), SourceModel.uniform_illumination(0.1, 256))
    assert 0 < rep.h_conditional <= rep.h_classical * (1 + 1e-12) <= 256
    assert rep.truncation_bound <= 2e-15


def test_sweep_shape_m9():
    model = DetectorArrayModel(9, 0.5)
    grid = [0.1, 0.5, 1, 2, 4, 8, 15, 22, 30]
    rows = sweep_mu(grid, model)
    assert [r.mu_px for r in rows] == grid
    hc = [r.h_classical for r in rows]
    hq = [r.h_conditional for r in rows]
    assert all(b >= a for a, b in zip(hc, hc[1:]))
    assert hc[-1] == pytest.approx(9.0, abs=1e-9)
    peak = int(np.argmax(hq))
    assert 0 < peak < len(grid) - 1
    assert hq[-1] < 1e-9 < hq[peak]


def test_sweep_single_point_and_errors(tmp_path):
    model = DetectorArrayModel(4, 0.7)
    rows = sweep_mu([1.5], model)
    direct = conditional_min_entropy(model, SourceModel.uniform_illumination(1.5, 4))
    assert rows == [direct]
    with pytest.raises(ParameterError):
        sweep_mu([], model)
    with pytest.raises(ParameterError):
        sweep_mu([-1.0], model)
    curve = CalibrationCurve([0.5, 2.0], [0.6, 0.8])
    with pytest.raises(CalibrationRangeError):
        sweep_mu([0.1, 1.0], model, calibration=curve)
    rows = sweep_mu([1.25], model, calibration=curve)
    assert rows[0].eta == pytest.approx(0.7)
    path = tmp_path / "sweep.csv"
    write_sweep_csv(path, rows, comments=["version=x"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# version=x"
    assert lines[1] == SWEEP_HEADER
    fields = lines[2].split(",")
    assert len(fields) == 7 and float(fields[1]) == pytest.approx(0.7)


def test_sweep_modes():
    model = DetectorArrayModel(3, 0.8)
    grid = [0.5, 2.0]
    a = sweep_mu(grid, model, mode="classical")
    b = sweep_mu(grid, model, mode="no-photon-info")
    assert all(r.mode == "classical" for r in a)
    assert all(r.mode == "no-photon-info" for r in b)
    with pytest.raises(ParameterError):
        sweep_mu(grid, model, mode="bogus")


def test_optimize_mu_m9():
    model = DetectorArrayModel(9, 0.5)
    mu_star, rate_star = optimize_mu(model, search_range=(0.05, 30.0), resolution=0.5)
    assert rate_star > 0
    # eta = 1/2 admits no unbiased point, so the optimum sits at finite flux
    assert mu_star < 28
    for mu in (0.05, 2.0, 10.0, 28.0):
        rep = conditional_min_entropy(model, SourceModel.uniform_illumination(mu, 9))
        assert rep.secure_rate <= rate_star


def test_optimize_mu_local_maximum():
    model = DetectorArrayModel(4, 1.0)
    mu_star, rate_star = optimize_mu(model, search_range=(0.05, 10.0), resolution=0.25)
    rate_double = conditional_min_entropy(
        model, SourceModel.uniform_illumination(2 * mu_star, 4)
    ).secure_rate
    assert rate_star > rate_double


def test_optimize_mu_degenerate_and_errors():
    model = DetectorArrayModel(4, 1.0)
    mu, rate = optimize_mu(model, search_range=(0.7, 0.7), resolution=0.1)
    assert mu == 0.7 and rate > 0
    with pytest.raises(ParameterError):
        optimize_mu(model, search_range=(2.0, 1.0))
    with pytest.raises(ParameterError):
        optimize_mu(model, search_range=(0.0, 1.0))


def test_reports_are_deterministic():
    model = DetectorArrayModel(7, 0.45)
    source = SourceModel.uniform_illumination(2.5, 7)
    assert conditional_min_entropy(model, source) == conditional_min_entropy(model, source)
    assert no_source_info_entropy(model, source) == no_source_info_entropy(model, source)
