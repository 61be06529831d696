"""Binary frame files.

Layout (little-endian)::

    magic  8 bytes   b"QRNGFRM1"  (side-info file: b"QRNGSIDE")
    M      uint32
    count  uint64
    payload

A frame occupies ``ceil(M/8)`` bytes with pixel ``i`` at byte ``i // 8``,
bit ``i % 8`` (bit 0 least significant), padding bits zero.  A side-info
record is a uint32 photon count followed by the status bitmap packed the
same way.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import (
    BadMagicError,
    FrameFormatError,
    ParameterError,
    PixelCountMismatchError,
    TruncatedPayloadError,
)
from .simulator import FrameBatch

__all__ = ["FRAME_MAGIC", "SIDE_MAGIC", "write_frames", "read_frames", "pack_bits", "unpack_bits"]

FRAME_MAGIC = b"QRNGFRM1"
SIDE_MAGIC = b"QRNGSIDE"
_HEADER = struct.Struct("<8sIQ")


def pack_bits(rows: np.ndarray) -> np.ndarray:
    return np.packbits(np.asarray(rows, dtype=bool), axis=1, bitorder="little")


def unpack_bits(packed: np.ndarray, M: int) -> np.ndarray:
    return np.unpackbits(packed, axis=1, count=M, bitorder="little").astype(bool)


def _side_dtype(M: int) -> np.dtype:
    return np.dtype([("n", "<u4"), ("s", "u1", ((M + 7) // 8,))])


def write_frames(batch: FrameBatch, path: str | Path, side_path: str | Path | None = None) -> None:
    M, count = batch.pixels, len(batch)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FRAME_MAGIC, M, count))
        fh.write(pack_bits(batch.frames).tobytes())
    if side_path is None:
        return
    if not batch.has_side_info:
        raise ParameterError("batch carries no side information to write")
    if np.any(batch.photons > 0xFFFFFFFF):
        raise ParameterError("photon count exceeds the 32-bit side-info field")
    records = np.zeros(count, dtype=_side_dtype(M))
    records["n"] = batch.photons
    records["s"] = pack_bits(batch.status)
    with open(side_path, "wb") as fh:
        fh.write(_HEADER.pack(SIDE_MAGIC, M, count))
        fh.write(records.tobytes())


def _read(path, magic: bytes, record_size: Callable[[int], int]) -> tuple[int, int, bytes]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    tag, M, count = _HEADER.unpack_from(data)
    if tag != magic:
        raise BadMagicError(f"{path}: magic {tag!r}, expected {magic!r}")
    if M < 1:
        raise FrameFormatError(f"{path}: pixel count must be positive")
    expected = _HEADER.size + count * record_size(M)
    if len(data) < expected:
        raise TruncatedPayloadError(
            f"{path}: payload has {len(data) - _HEADER.size} bytes, "
            f"header promises {expected - _HEADER.size}"
        )
    if len(data) > expected:
        raise FrameFormatError(f"{path}: {len(data) - expected} trailing bytes after the last record")
    return M, count, data[_HEADER.size:]


def read_frames(
    path: str | Path, side_path: str | Path | None = None, pixels: int | None = None
) -> FrameBatch:
    """Load a frame file and optionally its side-info companion.

    ``pixels``, when given, must match the header; so must the side-info
    header.  Any disagreement raises :class:`PixelCountMismatchError`.
    """
    M, count, payload = _read(path, FRAME_MAGIC, lambda m: (m + 7) // 8)
    if pixels is not None and pixels != M:
        raise PixelCountMismatchError(f"{path}: file has M={M}, expected {pixels}")
    frames = unpack_bits(np.frombuffer(payload, dtype=np.uint8).reshape(count, (M + 7) // 8), M)
    if side_path is None:
        return FrameBatch(M, frames)
    M_side, count_side, side = _read(side_path, SIDE_MAGIC, lambda m: _side_dtype(m).itemsize)
    if M_side != M:
        raise PixelCountMismatchError(f"{side_path}: side info has M={M_side}, frames have M={M}")
    if count_side != count:
        raise FrameFormatError(f"{side_path}: {count_side} side records for {count} frames")
    records = np.frombuffer(side, dtype=_side_dtype(M))
    status = unpack_bits(records["s"].reshape(count, (M + 7) // 8), M)
    try:
        return FrameBatch(M, frames, records["n"].astype(np.int64), status)
    except ParameterError as exc:
        raise FrameFormatError(f"{side_path}: {exc}") from None
