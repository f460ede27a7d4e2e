"""Reader for the IDX format used by the MNIST distribution.

Layout (big-endian): a 4-byte magic whose last two bytes are the element type
(0x08 = unsigned byte) and the number of dimensions, one u32 per dimension,
then the raw bytes. Images are ``0x00000803`` (count, rows, cols), labels
``0x00000801`` (count). Gzip-compressed files are accepted as well.
"""

from __future__ import annotations

import gzip
import math
import struct
from pathlib import Path

import numpy as np

from src.core.errors import FormatError, LabelRangeError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
HEADER_DIMS = {IMAGES_MAGIC: 3, LABELS_MAGIC: 1}
GZIP_MAGIC = b"\x1f\x8b"
MNIST_CLASSES = 10


def _read_bytes(path: Path) -> bytes:
    try:
        raw = path.read_bytes()
    except FileNotFoundError as exc:
        raise FormatError(f"IDX file not found: {path}") from exc
    if raw[:2] == GZIP_MAGIC:
        try:
            raw = gzip.decompress(raw)
        except (OSError, EOFError) as exc:
            raise FormatError(f"corrupt gzip stream in {path}: {exc}", offset=0) from exc
    return raw


def parse_idx(raw: bytes, num_classes: int | None = MNIST_CLASSES) -> np.ndarray:
    """Images come back as float64 in [0, 1] shaped (count, rows, cols); labels as int64."""
    if len(raw) < 4:
        raise FormatError(f"file too short for an IDX magic ({len(raw)} bytes)", offset=len(raw))
    (magic,) = struct.unpack(">I", raw[:4])
    if magic not in HEADER_DIMS:
        raise FormatError(f"bad IDX magic 0x{magic:08x}", offset=0)
    ndim = HEADER_DIMS[magic]
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise FormatError("truncated IDX header", offset=len(raw))
    dims = struct.unpack(f">{ndim}I", raw[4:header_end])
    for position, extent in enumerate(dims):
        if extent == 0:
            raise FormatError(f"dimension {position} is zero", offset=4 + 4 * position)
    payload = math.prod(dims)
    expected = header_end + payload
    if len(raw) < expected:
        raise FormatError(
            f"truncated IDX data: header promises {payload} bytes, found {len(raw) - header_end}",
            offset=len(raw),
        )
    if len(raw) > expected:
        raise FormatError(
            f"{len(raw) - expected} unexpected trailing bytes after IDX data", offset=expected
        )
    data = np.frombuffer(raw, dtype=np.uint8, offset=header_end, count=payload).reshape(dims)

    if magic == IMAGES_MAGIC:
        return data.astype(np.float64) / 255.0
    labels = data.astype(np.int64)
    if num_classes is not None and labels.size and int(labels.max()) >= num_classes:
        position = int(np.argmax(labels >= num_classes))
        raise LabelRangeError(
            f"label {int(labels[position])} outside [0, {num_classes})",
            offset=header_end + position,
        )
    return labels


def load_idx(path: str | Path, num_classes: int | None = MNIST_CLASSES) -> np.ndarray:
    return parse_idx(_read_bytes(Path(path)), num_classes=num_classes)
