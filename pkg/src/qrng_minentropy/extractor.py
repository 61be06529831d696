"""Seeded Toeplitz hashing over GF(2).

The ``m x n`` matrix is constant along diagonals::

    T[i, j] = seed[j - i + m - 1]

so the first row is ``seed[m-1:]`` and the first column, read bottom-up, is
``seed[:m]``; ``n + m - 1`` seed bits fix the matrix.  The output length
follows leftover-hash sizing, ``m = floor(H - 2 log2(1/eps))``.

:class:`ToeplitzHasher` consumes input in arbitrary chunks and evaluates
each chunk's contribution with an FFT correlation, so the result is
bit-identical to the dense product however the input is split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal, special

from .errors import ParameterError
from .simulator import FrameBatch

__all__ = [
    "DEFAULT_EPS_SEC",
    "ExtractorParams",
    "ToeplitzHasher",
    "output_length",
    "toeplitz_matrix",
    "toeplitz_dense_oracle",
    "toeplitz_matvec",
    "toeplitz_extract",
    "read_seed_file",
    "seed_from_hex",
    "pack_output",
    "monobit_test",
    "runs_test",
]

DEFAULT_EPS_SEC = 2.0**-64
_BLOCK_MIN = 1 << 16
_BLOCK_MAX = 1 << 22


def output_length(total_min_entropy: float, eps_sec: float = DEFAULT_EPS_SEC) -> int:
    if total_min_entropy < 0 or math.isnan(total_min_entropy):
        raise ParameterError("total min-entropy must be nonnegative")
    if not (0 < eps_sec < 1):
        raise ParameterError(f"eps_sec must lie in (0, 1), got {eps_sec}")
    return max(0, math.floor(total_min_entropy - 2.0 * math.log2(1.0 / eps_sec)))


def _bits(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise ParameterError(f"{name} must contain only 0 and 1")
    return arr.astype(np.uint8)


@dataclass(frozen=True, eq=False)
class ExtractorParams:
    """Shape and seed of one extraction; ``seed_bits`` holds exactly ``n + m - 1`` bits."""

    input_bits: int
    output_bits: int
    seed_bits: np.ndarray
    eps_sec: float = DEFAULT_EPS_SEC

    def __post_init__(self) -> None:
        if self.input_bits < 0 or self.output_bits < 0:
            raise ParameterError("bit counts must be nonnegative")
        if self.output_bits > self.input_bits:
            raise ParameterError(f"output bits {self.output_bits} exceed input bits {self.input_bits}")
        if not (0 < self.eps_sec < 1):
            raise ParameterError("eps_sec must lie in (0, 1)")
        seed = _bits(self.seed_bits, "seed")
        if seed.size != self.seed_length:
            raise ParameterError(f"seed has {seed.size} bits, the matrix needs {self.seed_length}")
        seed.setflags(write=False)
        object.__setattr__(self, "seed_bits", seed)

    @property
    def seed_length(self) -> int:
        return self.input_bits + self.output_bits - 1 if self.output_bits else 0

    @classmethod
    def from_seed(cls, input_bits: int, output_bits: int, seed, eps_sec: float = DEFAULT_EPS_SEC):
        """Take the leading ``n + m - 1`` bits of a caller-supplied seed."""
        seed = _bits(seed, "seed")
        need = input_bits + output_bits - 1 if output_bits else 0
        if seed.size < need:
            raise ParameterError(f"seed too short: {seed.size} bits supplied, {need} required")
        return cls(input_bits, output_bits, seed[:need], eps_sec)


def _rows(seed: np.ndarray, m: int, n: int, lo: int, hi: int) -> np.ndarray:
    i = np.arange(lo, hi)[:, None]
    j = np.arange(n)[None, :]
    return seed[j - i + m - 1]


def toeplitz_matrix(seed, m: int, n: int) -> np.ndarray:
    seed = _bits(seed, "seed")
    if seed.size < n + m - 1:
        raise ParameterError("seed too short for the requested shape")
    return _rows(seed, m, n, 0, m)


def toeplitz_dense_oracle(seed, x, m: int) -> np.ndarray:
    """Dense product row by row, the reference for the streaming path."""
    seed = _bits(seed, "seed")
    # float products are exact here: every partial sum is an integer below 2**53
    x = _bits(x, "input").astype(np.float64)
    n = x.size
    if seed.size < n + m - 1:
        raise ParameterError("seed too short for the requested shape")
    if m == 0 or n == 0:
        return np.zeros(m, dtype=np.uint8)
    # windows[w] = seed[w : w + n] is row m - 1 - w of the matrix
    windows = np.lib.stride_tricks.sliding_window_view(seed[: n + m - 1].astype(np.float64), n)
    counts = (windows @ x)[::-1]
    return (counts.astype(np.int64) & 1).astype(np.uint8)


class ToeplitzHasher:
    """Incremental ``T @ x`` over GF(2) for a fixed seed and shape."""

    def __init__(self, params: ExtractorParams, block_bits: int | None = None):
        self.params = params
        m = params.output_bits
        self.block_bits = block_bits or min(max(m, _BLOCK_MIN), _BLOCK_MAX)
        if self.block_bits < 1:
            raise ParameterError("block size must be positive")
        self._acc = np.zeros(m, dtype=np.uint8)
        self._pos = 0
        self._pending = np.zeros(0, dtype=np.uint8)

    @property
    def consumed(self) -> int:
        return self._pos + self._pending.size

    def update(self, chunk) -> None:
        chunk = _bits(chunk, "input")
        if self.consumed + chunk.size > self.params.input_bits:
            raise ParameterError("more input than the extractor was sized for")
        self._pending = np.concatenate([self._pending, chunk]) if self._pending.size else chunk
        while self._pending.size >= self.block_bits:
            self._absorb(self._pending[: self.block_bits])
            self._pending = self._pending[self.block_bits :]

    def _absorb(self, block: np.ndarray) -> None:
        m = self.params.output_bits
        L = block.size
        if m == 0 or L == 0:
            self._pos += L
            return
        o = self._pos
        # z[t] = sum_j seed[o + t + j] * block[j];  output row i takes t = m - 1 - i
        window = self.params.seed_bits[o : o + L + m - 1].astype(np.float64)
        z = signal.fftconvolve(window, block[::-1].astype(np.float64), mode="valid")
        counts = np.rint(z)
        if np.max(np.abs(z - counts), initial=0.0) > 0.25:
            raise ArithmeticError("FFT rounding error too large for an exact GF(2) product")
        self._acc ^= (counts[::-1].astype(np.int64) & 1).astype(np.uint8)
        self._pos += L

    def digest(self) -> np.ndarray:
        if self.consumed != self.params.input_bits:
            raise ParameterError(
                f"extractor expects {self.params.input_bits} input bits, got {self.consumed}"
            )
        if self._pending.size:
            self._absorb(self._pending)
            self._pending = np.zeros(0, dtype=np.uint8)
        return self._acc.copy()


def toeplitz_matvec(seed, x, m: int, block_bits: int | None = None) -> np.ndarray:
    x = _bits(x, "input")
    params = ExtractorParams.from_seed(x.size, m, seed)
    hasher = ToeplitzHasher(params, block_bits)
    hasher.update(x)
    return hasher.digest()


def toeplitz_extract(
    batch: FrameBatch,
    min_entropy_per_frame: float,
    eps_sec: float = DEFAULT_EPS_SEC,
    seed=None,
    block_bits: int | None = None,
) -> np.ndarray:
    """Hash all frames of a batch, concatenated in order, into certified output bits."""
    M = batch.pixels
    if not (0 <= min_entropy_per_frame <= M):
        raise ParameterError(f"min-entropy per frame must lie in [0, {M}]")
    if seed is None:
        raise ParameterError("a seed must be supplied")
    n = len(batch) * M
    m = min(output_length(len(batch) * min_entropy_per_frame, eps_sec), n)
    params = ExtractorParams.from_seed(n, m, seed, eps_sec)
    if m == 0:
        return np.zeros(0, dtype=np.uint8)
    hasher = ToeplitzHasher(params, block_bits)
    rows = max(1, hasher.block_bits // M)
    for lo in range(0, len(batch), rows):
        hasher.update(batch.frames[lo : lo + rows].reshape(-1))
    return hasher.digest()


def read_seed_file(path: str | Path) -> np.ndarray:
    """Raw bytes, most significant bit of each byte first."""
    return np.unpackbits(np.frombuffer(Path(path).read_bytes(), dtype=np.uint8))


def seed_from_hex(text: str) -> np.ndarray:
    try:
        raw = bytes.fromhex(text.strip().removeprefix("0x"))
    except ValueError as exc:
        raise ParameterError(f"malformed hex seed ({exc})") from None
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8))


def pack_output(bits) -> bytes:
    """Pack MSB-first; the final partial byte is zero-padded."""
    return np.packbits(_bits(bits, "output")).tobytes()


def monobit_test(bits) -> float:
    """Frequency test p-value: erfc(|S_n| / sqrt(2n))."""
    bits = _bits(bits, "bits")
    n = bits.size
    if n == 0:
        raise ParameterError("monobit test needs at least one bit")
    s = 2 * int(bits.sum()) - n
    return float(special.erfc(abs(s) / math.sqrt(2.0 * n)))


def runs_test(bits) -> float:
    """Runs test p-value; zero when the monobit prerequisite already fails."""
    bits = _bits(bits, "bits")
    n = bits.size
    if n < 2:
        raise ParameterError("runs test needs at least two bits")
    pi = bits.mean()
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        return 0.0
    runs = 1 + int(np.count_nonzero(bits[1:] != bits[:-1]))
    num = abs(runs - 2.0 * n * pi * (1 - pi))
    return float(special.erfc(num / (2.0 * math.sqrt(2.0 * n) * pi * (1 - pi))))
