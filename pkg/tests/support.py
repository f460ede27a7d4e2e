"""Test helpers that do not depend on the package under test."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

# Two 2x2 images and their labels.
FIXTURE_PIXELS = np.array([[[0, 255], [51, 102]], [[255, 0], [0, 204]]], dtype=np.uint8)
FIXTURE_LABELS = np.array([3, 7], dtype=np.uint8)

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def idx_bytes(array: np.ndarray) -> bytes:
    """Encode a uint8 array as IDX: big-endian magic 0x000008nn, u32 extents, raw bytes."""
    array = np.asarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", n) for n in array.shape)
    return header + array.tobytes(order="C")


def write_idx(path: Path, array: np.ndarray) -> Path:
    path.write_bytes(idx_bytes(array))
    return path


def chain_product(cores: list[np.ndarray], idx: tuple[int, ...]) -> float:
    """Entry of a TT-tensor by explicit matrix-chain multiplication."""
    result = np.eye(1)
    for core, i in zip(cores, idx):
        result = result @ core[:, i, :]
    return float(result[0, 0])
