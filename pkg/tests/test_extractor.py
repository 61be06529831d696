import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrng_minentropy.detector import DetectorArrayModel, SourceModel
from qrng_minentropy.errors import ParameterError
from qrng_minentropy.extractor import (
    ExtractorParams,
    ToeplitzHasher,
    monobit_test,
    output_length,
    pack_output,
    read_seed_file,
    runs_test,
    seed_from_hex,
    toeplitz_dense_oracle,
    toeplitz_extract,
    toeplitz_matrix,
    toeplitz_matvec,
)
from qrng_minentropy.simulator import FrameBatch, SimSeed, simulate_frames


@pytest.mark.parametrize(
    "h, eps, m",
    [(500, 2.0**-32, 436), (10, 2.0**-32, 0), (64.9, 0.5, 62), (0, 0.5, 0), (128, 2.0**-64, 0)],
)
def test_output_length(h, eps, m):
    assert output_length(h, eps) == m


def test_output_length_errors():
    with pytest.raises(ParameterError):
        output_length(-1, 0.5)
    with pytest.raises(ParameterError):
        output_length(10, 1.0)
    with pytest.raises(ParameterError):
        output_length(10, 0.0)


def test_small_matrix_by_hand():
    seed = [1, 0, 1, 1, 0, 0, 1]
    T = toeplitz_matrix(seed, 3, 5)
    np.testing.assert_array_equal(T, [[1, 1, 0, 0, 1], [0, 1, 1, 0, 0], [1, 0, 1, 1, 0]])
    x = [1, 0, 1, 1, 0]
    # rows dotted with x: 1, 1, 3 -> parities 1, 1, 1
    np.testing.assert_array_equal(toeplitz_dense_oracle(seed, x, 3), [1, 1, 1])
    np.testing.assert_array_equal(toeplitz_matvec(seed, x, 3), [1, 1, 1])


def test_matrix_is_toeplitz():
    rng = np.random.default_rng(0)
    seed = rng.integers(0, 2, 40)
    T = toeplitz_matrix(seed, 9, 32)
    assert np.all(T[1:, 1:] == T[:-1, :-1])
    np.testing.assert_array_equal(T[0], seed[8:])
    np.testing.assert_array_equal(T[::-1, 0], seed[:9])


def test_zero_and_empty():
    rng = np.random.default_rng(1)
    seed = rng.integers(0, 2, 200)
    assert not toeplitz_matvec(seed, np.zeros(120), 50).any()
    assert toeplitz_matvec(seed, rng.integers(0, 2, 120), 0).size == 0


def test_seed_too_short():
    with pytest.raises(ParameterError):
        toeplitz_matvec([1, 0, 1], [1, 0, 1, 1], 2)
    with pytest.raises(ParameterError):
        ExtractorParams(4, 2, [1, 0, 1, 1, 0, 1, 0])
    with pytest.raises(ParameterError):
        ExtractorParams(4, 5, [0] * 8)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 600), st.data())
def test_linearity(n, data):
    m = data.draw(st.integers(0, n))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    seed = rng.integers(0, 2, n + m)
    a, b = rng.integers(0, 2, n), rng.integers(0, 2, n)
    np.testing.assert_array_equal(
        toeplitz_matvec(seed, a ^ b, m), toeplitz_matvec(seed, a, m) ^ toeplitz_matvec(seed, b, m)
    )


def test_streaming_matches_dense_random_triples():
    rng = np.random.default_rng(20240601)
    for _ in range(200):
        n = int(rng.integers(1, 2**14 + 1))
        m = int(rng.integers(0, n + 1))
        seed = rng.integers(0, 2, n + m)
        x = rng.integers(0, 2, n)
        block = int(rng.integers(1, n + 1))
        np.testing.assert_array_equal(
            toeplitz_matvec(seed, x, m, block_bits=block), toeplitz_dense_oracle(seed, x, m)
        )


def test_chunking_irrelevant():
    rng = np.random.default_rng(4)
    n, m = 5000, 3000
    seed = rng.integers(0, 2, n + m - 1)
    x = rng.integers(0, 2, n)
    ref = toeplitz_dense_oracle(seed, x, m)
    hasher = ToeplitzHasher(ExtractorParams(n, m, seed), block_bits=777)
    cuts = np.sort(rng.choice(np.arange(1, n), 20, replace=False))
    for part in np.split(x, cuts):
        hasher.update(part)
    np.testing.assert_array_equal(hasher.digest(), ref)


def test_hasher_length_checks():
    hasher = ToeplitzHasher(ExtractorParams(4, 2, [1, 0, 1, 1, 0]))
    hasher.update([1, 0])
    with pytest.raises(ParameterError):
        hasher.digest()
    with pytest.raises(ParameterError):
        hasher.update([1, 0, 1])


def test_extract_batch_uses_frame_order():
    rng = np.random.default_rng(7)
    batch = FrameBatch(5, rng.integers(0, 2, (40, 5)))
    seed = rng.integers(0, 2, 500)
    out = toeplitz_extract(batch, 4.0, eps_sec=2.0**-10, seed=seed)
    m = output_length(160.0, 2.0**-10)
    assert out.size == m == 140
    np.testing.assert_array_equal(out, toeplitz_dense_oracle(seed, batch.frames.reshape(-1), m))


def test_extract_rejects():
    batch = FrameBatch(3, np.zeros((10, 3)))
    with pytest.raises(ParameterError):
        toeplitz_extract(batch, 3.5, seed=[0] * 100)
    with pytest.raises(ParameterError):
        toeplitz_extract(batch, 1.0)
    assert toeplitz_extract(batch, 1.0, seed=[1]).size == 0


def test_seed_and_output_bit_order(tmp_path):
    path = tmp_path / "seed.bin"
    path.write_bytes(bytes([0b10000001, 0xF0]))
    np.testing.assert_array_equal(read_seed_file(path), [1, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 0])
    np.testing.assert_array_equal(seed_from_hex("81f0"), read_seed_file(path))
    assert pack_output([1, 0, 1]) == bytes([0b10100000])
    assert pack_output([]) == b""
    with pytest.raises(ParameterError):
        seed_from_hex("zz")


def test_randomness_tests_known_values():
    # frequency-test worked example: 1011010101 -> p = 0.527089
    bits = [1, 0, 1, 1, 0, 1, 0, 1, 0, 1]
    assert monobit_test(bits) == pytest.approx(0.527089, abs=1e-6)
    # runs-test worked example: 1001101011 -> p = 0.147232
    assert runs_test([1, 0, 0, 1, 1, 0, 1, 0, 1, 1]) == pytest.approx(0.147232, abs=1e-6)
    assert runs_test([1] * 100) == 0.0
    assert monobit_test([1] * 100) < 1e-20


def test_extracted_simulation_output_looks_uniform():
    M, mu, eta = 64, 0.69, 0.8
    h = 44.54588525869  # conditional min-entropy per frame at this point, frozen from the engine
    frames = 23600
    batch = simulate_frames(DetectorArrayModel(M, eta), SourceModel.uniform_illumination(mu, M), frames, SimSeed(1))
    seed = np.random.default_rng(5).integers(0, 2, 2 * frames * M)
    out = toeplitz_extract(batch, h, seed=seed)
    assert out.size >= 10**6
    assert monobit_test(out) > 0.001
    assert runs_test(out) > 0.001
