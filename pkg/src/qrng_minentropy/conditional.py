"""Probability of an outcome string given the photon number and the gating pattern.

For ``n`` photons spread uniformly over ``M`` pixels, a status vector ``s``
(1 = pixel active) and an outcome ``x`` (1 = click), the probability only
depends on the Hamming weights ``k = |x|`` and ``l = |s|`` once ``x`` is
compatible with ``s`` (no click on an inactive pixel)::

    P(x | n, s) = k! {n+r brace k+r}_r / M**n,   r = M - l,   k <= n

Two numeric modes are offered everywhere: ``exact=True`` returns
:class:`fractions.Fraction` values, the default returns floats derived from
exact integers through :class:`~qrng_minentropy.combinatorics.LogReal`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .combinatorics import LogReal, scaled_r_stirling2, surjection_table
from .errors import ParameterError, ResourceLimitError

__all__ = [
    "CompatibilityClasses",
    "ReducedProbabilityTable",
    "compatibility",
    "cond_prob",
    "cond_prob_oracle",
    "reduced_prob",
    "log_reduced_prob",
    "max_outcome_prob",
    "sierpinski_matrix",
    "write_sierpinski_csv",
    "bits_to_index",
    "index_to_bits",
    "ORACLE_MAX_PIXELS",
    "ORACLE_MAX_PHOTONS",
    "SIERPINSKI_MAX_PIXELS",
]

ORACLE_MAX_PIXELS = 6
ORACLE_MAX_PHOTONS = 8
SIERPINSKI_MAX_PIXELS = 10


def _as_bits(v: Sequence[int], name: str) -> tuple[int, ...]:
    bits = tuple(int(b) for b in v)
    if any(b not in (0, 1) for b in bits):
        raise ParameterError(f"{name} must contain only 0 and 1")
    return bits


def _pair(x, s) -> tuple[tuple[int, ...], tuple[int, ...]]:
    x = _as_bits(x, "x")
    s = _as_bits(s, "s")
    if len(x) != len(s):
        raise ParameterError(f"outcome has {len(x)} pixels but status has {len(s)}")
    if not x:
        raise ParameterError("at least one pixel is required")
    return x, s


def bits_to_index(bits: Sequence[int]) -> int:
    """Lexicographic index with pixel 1 as the most significant bit."""
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def index_to_bits(index: int, M: int) -> tuple[int, ...]:
    return tuple((index >> (M - 1 - i)) & 1 for i in range(M))


@dataclass(frozen=True)
class CompatibilityClasses:
    """Pixel indices (0-based) grouped by their (x_i, s_i) pair."""

    i00: tuple[int, ...]
    i01: tuple[int, ...]
    i10: tuple[int, ...]
    i11: tuple[int, ...]

    @property
    def compatible(self) -> bool:
        return not self.i10

    @property
    def detections(self) -> int:
        return len(self.i10) + len(self.i11)

    @property
    def inactive(self) -> int:
        return len(self.i00) + len(self.i10)


def compatibility(x: Sequence[int], s: Sequence[int]) -> CompatibilityClasses:
    x, s = _pair(x, s)
    groups: dict[tuple[int, int], list[int]] = {(0, 0): [], (0, 1): [], (1, 0): [], (1, 1): []}
    for i, key in enumerate(zip(x, s)):
        groups[key].append(i)
    return CompatibilityClasses(*(tuple(groups[key]) for key in ((0, 0), (0, 1), (1, 0), (1, 1))))


def reduced_prob(k: int, n: int, ell: int, M: int, exact: bool = False):
    """Probability of any one compatible outcome with ``k`` clicks, ``ell`` active pixels."""
    if M < 1 or not (0 <= k <= M and 0 <= ell <= M) or n < 0:
        raise ParameterError(f"need 0 <= k, ell <= M, n >= 0; got k={k}, ell={ell}, M={M}, n={n}")
    if k > min(n, ell):
        return Fraction(0) if exact else 0.0
    t = scaled_r_stirling2(n, k, M - ell)
    if exact:
        return Fraction(t, M**n)
    return LogReal.from_ratio(t, M**n).to_float()


def log_reduced_prob(k: int, n: int, ell: int, M: int) -> LogReal:
    if k > min(n, ell):
        return LogReal.zero()
    return LogReal.from_ratio(scaled_r_stirling2(n, k, M - ell), M**n)


def cond_prob(x: Sequence[int], n: int, s: Sequence[int], exact: bool = False):
    """P(x | n, s) from the r-restricted Stirling closed form."""
    x, s = _pair(x, s)
    if n < 0:
        raise ParameterError("photon number must be nonnegative")
    if any(xi and not si for xi, si in zip(x, s)):
        return Fraction(0) if exact else 0.0
    return reduced_prob(sum(x), n, sum(s), len(x), exact=exact)


@lru_cache(maxsize=64)
def _occupancies(M: int, n: int) -> tuple[np.ndarray, tuple[int, ...]]:
    """Every occupancy vector with ``n`` photons on ``M`` pixels.

    Returns the bitmask of occupied pixels (pixel 1 most significant) and
    the multinomial count ``n! / prod(n_i!)`` of each vector.
    """
    masks: list[int] = []
    weights: list[int] = []
    nfact = math.factorial(n)

    def walk(pixel: int, left: int, mask: int, denom: int) -> None:
        if pixel == M - 1:
            masks.append((mask << 1) | (left > 0))
            weights.append(nfact // (denom * math.factorial(left)))
            return
        for c in range(left + 1):
            walk(pixel + 1, left - c, (mask << 1) | (c > 0), denom * math.factorial(c))

    walk(0, n, 0, 1)
    return np.array(masks, dtype=np.int64), tuple(weights)


def cond_prob_oracle(x: Sequence[int], n: int, s: Sequence[int]) -> Fraction:
    """P(x | n, s) by summing multinomial weights of every compatible arrangement.

    An arrangement ``(n_1..n_M)`` is compatible when each pixel satisfies:
    inactive and dark (anything goes), active and dark (``n_i = 0``), active
    and clicked (``n_i >= 1``); a click on an inactive pixel admits nothing.
    """
    x, s = _pair(x, s)
    M = len(x)
    if M > ORACLE_MAX_PIXELS or n > ORACLE_MAX_PHOTONS:
        raise ResourceLimitError(
            f"multinomial oracle limited to M <= {ORACLE_MAX_PIXELS}, n <= {ORACLE_MAX_PHOTONS}"
        )
    if n < 0:
        raise ParameterError("photon number must be nonnegative")
    masks, weights = _occupancies(M, n)
    xm, sm = bits_to_index(x), bits_to_index(s)
    if xm & ~sm:
        return Fraction(0)
    hits = np.nonzero((masks & sm) == xm)[0]
    return Fraction(sum(weights[i] for i in hits), M**n)


def max_outcome_prob(n: int, ell: int, M: int, exact: bool = False):
    """Most likely click count for ``n`` photons and ``ell`` active pixels.

    Returns ``(k_star, p_star)``.  ``k = 0`` is always a candidate and ties go
    to the smaller ``k``.
    """
    if M < 1 or not (0 <= ell <= M) or n < 0:
        raise ParameterError(f"need 0 <= ell <= M and n >= 0; got ell={ell}, M={M}, n={n}")
    r = M - ell
    best_k, best_t = 0, scaled_r_stirling2(n, 0, r)
    for k in range(1, min(n, ell) + 1):
        t = scaled_r_stirling2(n, k, r)
        if t > best_t:
            best_k, best_t = k, t
    if exact:
        return best_k, Fraction(best_t, M**n)
    return best_k, LogReal.from_ratio(best_t, M**n).to_float()


@dataclass(frozen=True)
class ReducedProbabilityTable:
    """``entries[k, l]`` = probability of one compatible outcome with k clicks, l active pixels."""

    n: int
    M: int
    entries: np.ndarray
    exact: bool = False

    @classmethod
    def build(cls, n: int, M: int, exact: bool = False) -> "ReducedProbabilityTable":
        if M < 1 or n < 0:
            raise ParameterError("need M >= 1 and n >= 0")
        rows = surjection_table(n, M)
        denom = M**n
        dtype = object if exact else float
        entries = np.zeros((M + 1, M + 1), dtype=dtype)
        if exact:
            entries[:] = Fraction(0)
        for k, row in enumerate(rows):
            # row[r] covers r = 0 .. M - k, i.e. ell = M - r >= k
            for r, t in enumerate(row):
                ell = M - r
                if exact:
                    entries[k, ell] = Fraction(t, denom)
                else:
                    entries[k, ell] = LogReal.from_ratio(t, denom).to_float()
        return cls(n, M, entries, exact)

    def __getitem__(self, key):
        return self.entries[key]

    def normalization(self, ell: int):
        """``sum_k C(l, k) entries[k, l]``; one for every ``l``."""
        return sum(math.comb(ell, k) * self.entries[k, ell] for k in range(ell + 1))

    def best(self, ell: int) -> tuple[int, float]:
        col = self.entries[: ell + 1, ell]
        k = int(np.argmax(col)) if not self.exact else max(range(ell + 1), key=lambda i: (col[i], -i))
        return k, col[k]


def sierpinski_matrix(M: int, n: int) -> np.ndarray:
    """Dense ``2**M x 2**M`` grid of P(x | n, s); rows index s, columns index x."""
    if M < 1 or M > SIERPINSKI_MAX_PIXELS:
        raise ResourceLimitError(f"matrix export limited to 1 <= M <= {SIERPINSKI_MAX_PIXELS}")
    if n < 0:
        raise ParameterError("photon number must be nonnegative")
    table = ReducedProbabilityTable.build(n, M)
    idx = np.arange(2**M, dtype=np.int64)
    weight = np.bitwise_count(idx).astype(np.int64)
    s_idx = idx[:, None]
    x_idx = idx[None, :]
    values = table.entries[weight[None, :], weight[:, None]]
    return np.where((x_idx & ~s_idx) == 0, values, 0.0)


def write_sierpinski_csv(path: str | Path, matrix: np.ndarray, comments: Sequence[str] = ()) -> None:
    size = matrix.shape[1]
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write("s_index," + ",".join(f"x_{j}" for j in range(size)) + "\n")
        for i, row in enumerate(matrix):
            fh.write(f"{i}," + ",".join(f"{v:.17g}" for v in row) + "\n")
