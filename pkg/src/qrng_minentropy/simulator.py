"""Monte-Carlo model of the gated array and of the adversary's guesses.

Each frame: the adversary draws the status vector ``s`` (pixel ``i`` active
with probability ``eta_i``), the source emits ``n`` photons, every photon
lands on a pixel drawn uniformly, and an active pixel clicks iff it was hit.

Random numbers come from a Philox counter-based generator keyed by
``(seed, stream_id)``.  Frames are produced in fixed blocks of
:data:`FRAME_BLOCK`; block ``b`` uses counter offset ``b``, so the result is
identical for any thread count and any block scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .conditional import max_outcome_prob
from .detector import DetectorArrayModel, SourceModel
from .errors import ParameterError, ResourceLimitError

__all__ = [
    "FrameBatch",
    "SimSeed",
    "simulate_frames",
    "empirical_bit_prob",
    "pixel_uniformity_pvalue",
    "eve_guesses",
    "empirical_guess_rate",
    "FRAME_BLOCK",
    "GUESS_MAX_PIXELS",
]

FRAME_BLOCK = 4096
GUESS_MAX_PIXELS = 12
# photons routed per numpy call; bounds memory at high flux
_PHOTON_CHUNK = 1 << 22
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class SimSeed:
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if not (0 <= value <= _U64):
                raise ParameterError(f"{name} must be an unsigned 64-bit integer, got {value}")

    def generator(self, block: int) -> np.random.Generator:
        # key = (stream_id, seed); the block index occupies the third counter word
        bitgen = np.random.Philox(key=(self.stream_id << 64) | self.seed, counter=[0, 0, block, 0])
        return np.random.Generator(bitgen)


@dataclass(frozen=True, eq=False)
class FrameBatch:
    """Outcome strings, one row per frame, with optional ``(n, s)`` side information."""

    pixels: int
    frames: np.ndarray
    photons: np.ndarray | None = None
    status: np.ndarray | None = None

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames, dtype=bool).reshape(-1, self.pixels)
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)
        if (self.photons is None) != (self.status is None):
            raise ParameterError("side information needs both photon counts and status vectors")
        if self.photons is not None:
            photons = np.asarray(self.photons, dtype=np.int64)
            status = np.asarray(self.status, dtype=bool).reshape(-1, self.pixels)
            if photons.shape != (len(frames),) or status.shape != frames.shape:
                raise ParameterError("side information must have one record per frame")
            if np.any(frames & ~status):
                raise ParameterError("a frame clicks on a pixel its status marks inactive")
            if np.any(photons < 0):
                raise ParameterError("photon counts must be nonnegative")
            photons.setflags(write=False)
            status.setflags(write=False)
            object.__setattr__(self, "photons", photons)
            object.__setattr__(self, "status", status)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def has_side_info(self) -> bool:
        return self.photons is not None

    def __eq__(self, other) -> bool:
        if not isinstance(other, FrameBatch):
            return NotImplemented
        if self.pixels != other.pixels or not np.array_equal(self.frames, other.frames):
            return False
        if self.has_side_info != other.has_side_info:
            return False
        if not self.has_side_info:
            return True
        return np.array_equal(self.photons, other.photons) and np.array_equal(self.status, other.status)


def _simulate_block(block: int, size: int, eta: np.ndarray, source: SourceModel, seed: SimSeed):
    M = eta.size
    rng = seed.generator(block)
    status = rng.random((size, M)) < eta
    photons = source.sample(rng, size)
    hit = np.zeros((size, M), dtype=bool)
    # route photons frame range by frame range so at most ~_PHOTON_CHUNK are held at once
    ends = np.cumsum(photons)
    start = 0
    while start < size:
        base = ends[start - 1] if start else 0
        stop = int(np.searchsorted(ends, base + _PHOTON_CHUNK, side="right"))
        stop = max(stop, start + 1)
        counts = photons[start:stop]
        owners = np.repeat(np.arange(start, stop), counts)
        hit[owners, rng.integers(0, M, size=owners.size)] = True
        start = stop
    return photons, status, hit & status


def simulate_frames(
    model: DetectorArrayModel,
    source: SourceModel,
    count: int,
    seed: SimSeed = SimSeed(),
    record_side_info: bool = False,
    threads: int | None = 1,
) -> FrameBatch:
    if count < 1:
        raise ParameterError(f"frame count must be at least 1, got {count}")
    eta = model.eta_vector()
    blocks = -(-count // FRAME_BLOCK)

    def run(b: int):
        # always a full block, so frame j depends on (seed, stream_id, j) alone
        return _simulate_block(b, FRAME_BLOCK, eta, source, seed)

    workers = max(1, threads or 1)
    if workers == 1 or blocks == 1:
        parts = [run(b) for b in range(blocks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(blocks)))
    frames = np.concatenate([p[2] for p in parts])[:count]
    if not record_side_info:
        return FrameBatch(model.pixels, frames)
    return FrameBatch(
        model.pixels,
        frames,
        np.concatenate([p[0] for p in parts])[:count],
        np.concatenate([p[1] for p in parts])[:count],
    )


def empirical_bit_prob(batch: FrameBatch) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel click frequency and its binomial standard error."""
    if len(batch) == 0:
        raise ParameterError("batch is empty")
    p1 = batch.frames.mean(axis=0)
    return p1, np.sqrt(p1 * (1.0 - p1) / len(batch))


def pixel_uniformity_pvalue(batch: FrameBatch) -> float:
    """Chi-square test that every pixel shares one click probability."""
    if len(batch) == 0:
        raise ParameterError("batch is empty")
    ones = batch.frames.sum(axis=0)
    table = np.stack([ones, len(batch) - ones])
    if batch.pixels == 1 or np.any(table.sum(axis=1) == 0):
        return 1.0
    return float(stats.chi2_contingency(table, correction=False).pvalue)


def eve_guesses(batch: FrameBatch) -> np.ndarray:
    """The adversary's guess for every frame of a batch carrying side information.

    For each frame she finds the most likely click count ``k*`` given
    ``(n, |s|)`` and bets on the lexicographically first string with ``k*``
    clicks on active pixels, i.e. the ``k*`` highest-indexed active pixels.
    """
    if not batch.has_side_info:
        raise ParameterError("guessing needs recorded (n, s) side information")
    M = batch.pixels
    ell = batch.status.sum(axis=1)
    k_star = np.zeros(len(batch), dtype=np.int64)
    pairs = np.unique(np.stack([batch.photons, ell], axis=1), axis=0)
    for n, l in pairs:
        sel = (batch.photons == n) & (ell == l)
        k_star[sel] = max_outcome_prob(int(n), int(l), M)[0]
    # rank of each active pixel counted from the right end
    rank = np.cumsum(batch.status[:, ::-1], axis=1)[:, ::-1]
    return batch.status & (rank <= k_star[:, None])


def empirical_guess_rate(
    model: DetectorArrayModel,
    source: SourceModel,
    trials: int,
    seed: SimSeed = SimSeed(),
    threads: int | None = 1,
) -> tuple[float, float]:
    """Fraction of frames the adversary guesses exactly, with its standard error."""
    if model.pixels > GUESS_MAX_PIXELS:
        raise ResourceLimitError(f"guess simulation limited to M <= {GUESS_MAX_PIXELS}")
    batch = simulate_frames(model, source, trials, seed, record_side_info=True, threads=threads)
    hits = np.all(eve_guesses(batch) == batch.frames, axis=1)
    freq = float(hits.mean())
    return freq, math.sqrt(freq * (1.0 - freq) / trials)
