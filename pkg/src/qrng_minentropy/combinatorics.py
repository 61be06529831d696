"""Exact combinatorial kernels.

Counts are plain Python ``int`` (arbitrary precision, never rounded).  The
only floating-point boundary is :class:`LogReal`, which carries base-2
logarithms of nonnegative quantities too large or too small for a float.

The central quantity of the package is the scaled r-restricted Stirling
number ``k! * {n+r brace k+r}_r``, the number of ways to drop ``n`` labelled
photons onto ``r + k`` pixels so that ``k`` designated pixels each receive at
least one photon.  It equals the k-th forward difference of ``x**n`` at
``x = r``; :func:`surjection_table` exploits that to produce every ``(k, r)``
value for one ``n`` with integer subtractions only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ParameterError, ResourceLimitError

__all__ = [
    "LogReal",
    "factorial",
    "binomial",
    "stirling2",
    "r_stirling2",
    "scaled_r_stirling2",
    "r_stirling2_recurrence",
    "count_partitions_oracle",
    "bell_oracle",
    "surjection_table",
    "MAX_ORACLE_ELEMENTS",
]

MAX_ORACLE_ELEMENTS = 13


def _check_nonneg(**kwargs: int) -> None:
    for name, value in kwargs.items():
        if value < 0:
            raise ParameterError(f"{name} must be nonnegative, got {value}")


def factorial(n: int) -> int:
    _check_nonneg(n=n)
    return math.factorial(n)


def binomial(n: int, k: int) -> int:
    """C(n, k); zero when ``k > n``."""
    _check_nonneg(n=n, k=k)
    return math.comb(n, k)


def _alternating_power_sum(n: int, k: int, r: int) -> int:
    # sum_j (-1)^(k-j) C(k, j) (r + j)^n, exact; pow() is binary exponentiation
    total = 0
    for j in range(k + 1):
        term = math.comb(k, j) * pow(r + j, n)
        total += -term if (k - j) & 1 else term
    return total


@lru_cache(maxsize=65536)
def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind from the explicit alternating sum."""
    _check_nonneg(n=n, k=k)
    if k > n:
        return 0
    total = _alternating_power_sum(n, k, 0)
    q, rem = divmod(total, math.factorial(k))
    assert rem == 0
    return q


@lru_cache(maxsize=65536)
def scaled_r_stirling2(n: int, k: int, r: int) -> int:
    """``k! * {n+r brace k+r}_r``: photon arrangements counted before dividing by ``M**n``."""
    _check_nonneg(n=n, k=k, r=r)
    if k > n:
        return 0
    return _alternating_power_sum(n, k, r)


def r_stirling2(n: int, k: int, r: int) -> int:
    """r-restricted Stirling number ``{n+r brace k+r}_r``.

    Arguments are shifted so that the call evaluates the symbol with ``n``
    free elements, ``k`` free blocks and ``r`` designated elements, each
    forced into its own block.  The alternating sum is formed in exact
    integers and divided by ``k!`` at the end; the division is exact.
    """
    t = scaled_r_stirling2(n, k, r)
    q, rem = divmod(t, math.factorial(k))
    assert rem == 0
    return q


def r_stirling2_recurrence(n: int, k: int, r: int, p: int) -> int:
    """Unshifted ``{n brace k}_r`` through the reduction over ``p`` designated elements.

    ``{n brace k}_r = sum_i C(n-r, i) {n-p-i brace k-p}_{r-p} p**i`` for any
    ``0 <= p <= r``.  Inner symbols are reduced again with ``p = r`` so the
    evaluation always ends at ordinary Stirling numbers.  With ``p = 0`` and
    ``r > 0`` the identity returns its own left-hand side (only ``i = 0``
    survives), so that single term is evaluated through the ``p = r`` branch.
    """
    _check_nonneg(n=n, k=k, r=r, p=p)
    if p > r:
        raise ParameterError(f"p must satisfy 0 <= p <= r, got p={p}, r={r}")
    if r == 0:
        return stirling2(n, k)
    if n < r or k < r:
        return 0
    if p == 0:
        return r_stirling2_recurrence(n, k, r, r)
    total = 0
    for i in range(n - r + 1):
        inner = r_stirling2_recurrence(n - p - i, k - p, r - p, r - p)
        if inner:
            total += math.comb(n - r, i) * inner * p**i
    return total


def _block_histogram(n: int, r: int) -> list[int]:
    """Count set partitions of ``r`` designated + ``n`` free elements by block count.

    Designated elements open blocks ``0..r-1``; free elements are then placed
    one at a time into an existing block or a new one, so every partition in
    which the designated elements are separated is visited exactly once.
    """
    hist = [0] * (n + r + 2)
    if n == 0:
        hist[r] = 1
        return hist

    def place(remaining: int, blocks: int) -> None:
        if remaining == 1:
            # last element: `blocks` ways to join, one way to open a new block
            hist[blocks] += blocks
            hist[blocks + 1] += 1
            return
        for _ in range(blocks):
            place(remaining - 1, blocks)
        place(remaining - 1, blocks + 1)

    place(n, r)
    return hist


def count_partitions_oracle(n: int, k: int, r: int) -> int:
    """Enumerate partitions of an (n+r)-set into k+r blocks with r designated elements apart."""
    _check_nonneg(n=n, k=k, r=r)
    if n + r > MAX_ORACLE_ELEMENTS:
        raise ResourceLimitError(
            f"partition enumeration limited to n + r <= {MAX_ORACLE_ELEMENTS}, got {n + r}"
        )
    hist = _block_histogram(n, r)
    return hist[k + r] if k + r < len(hist) else 0


def bell_oracle(n: int) -> int:
    """Bell number by exhaustive enumeration (no designated elements)."""
    if n > MAX_ORACLE_ELEMENTS:
        raise ResourceLimitError(f"enumeration limited to n <= {MAX_ORACLE_ELEMENTS}")
    return sum(_block_histogram(n, 0))


def surjection_table(n: int, M: int, r_lo: int = 0, base: np.ndarray | None = None) -> list[np.ndarray]:
    """All scaled r-Stirling counts for ``n`` photons on an ``M``-pixel array.

    Returns ``rows`` with ``rows[k][r - r_lo] == k! * {n+r brace k+r}_r`` for
    ``r_lo <= r <= M - k`` and ``0 <= k <= min(n, M - r_lo)``.  Rows are
    object arrays of exact ints built by repeated forward differencing of
    ``r**n``; no floating point is involved.  ``base`` may supply the powers
    ``[r**n for r in r_lo..M]`` when the caller already holds them.
    """
    _check_nonneg(n=n, M=M, r_lo=r_lo)
    if r_lo > M:
        raise ParameterError("r_lo must not exceed M")
    if base is None:
        row = np.array([pow(r, n) for r in range(r_lo, M + 1)], dtype=object)
    else:
        row = base
    rows = [row]
    for _ in range(min(n, M - r_lo)):
        row = row[1:] - row[:-1]
        rows.append(row)
    return rows


@dataclass(frozen=True, order=False)
class LogReal:
    """Nonnegative real stored as its base-2 logarithm."""

    log2_magnitude: float = -math.inf
    is_zero: bool = True

    def __post_init__(self) -> None:
        if self.is_zero != (self.log2_magnitude == -math.inf):
            raise ParameterError("is_zero must be set exactly when the magnitude is zero")

    @classmethod
    def zero(cls) -> "LogReal":
        return cls(-math.inf, True)

    @classmethod
    def from_float(cls, x: float) -> "LogReal":
        if x < 0:
            raise ParameterError("LogReal represents nonnegative values only")
        if x == 0:
            return cls.zero()
        return cls(math.log2(x), False)

    @classmethod
    def from_int(cls, value: int) -> "LogReal":
        if value < 0:
            raise ParameterError("LogReal represents nonnegative values only")
        if value == 0:
            return cls.zero()
        # math.log2 accepts arbitrarily large ints without overflowing
        return cls(math.log2(value), False)

    @classmethod
    def from_ratio(cls, num: int, den: int) -> "LogReal":
        """log2(num / den) with one rounding when the quotient is a normal float."""
        if den <= 0 or num < 0:
            raise ParameterError("ratio needs num >= 0 and den > 0")
        if num == 0:
            return cls.zero()
        q = num / den  # int true division is correctly rounded
        if q > 2.2250738585072014e-308 and not math.isinf(q):
            return cls(math.log2(q), False)
        return cls(math.log2(num) - math.log2(den), False)

    def to_float(self) -> float:
        if self.is_zero:
            return 0.0
        return 2.0**self.log2_magnitude if self.log2_magnitude < 1024 else math.inf

    def __mul__(self, other: "LogReal") -> "LogReal":
        if self.is_zero or other.is_zero:
            return LogReal.zero()
        return LogReal(self.log2_magnitude + other.log2_magnitude, False)

    def __lt__(self, other: "LogReal") -> bool:
        return self.log2_magnitude < other.log2_magnitude

    def __le__(self, other: "LogReal") -> bool:
        return self.log2_magnitude <= other.log2_magnitude
