from __future__ import annotations

from typing import Literal

import numpy as np
import scipy.ndimage

from src.core.errors import DomainError

MNIST_SIDE = 28
PADDED_SIDE = 32

ResizeMode = Literal["pad", "bilinear", "none"]


def _check_mnist(images: np.ndarray) -> np.ndarray:
    images = np.asarray(images)
    if images.ndim != 3 or images.shape[1:] != (MNIST_SIDE, MNIST_SIDE):
        raise DomainError(
            f"expected a stack of {MNIST_SIDE}x{MNIST_SIDE} images, got shape {images.shape}"
        )
    return images


def flatten_column_major(images: np.ndarray) -> np.ndarray:
    """(count, rows, cols) -> (count, rows * cols) with the row index fastest."""
    return images.transpose(0, 2, 1).reshape(images.shape[0], -1)


def pad_to_32(images: np.ndarray) -> np.ndarray:
    """Zero-pad 28x28 images by 2 pixels per border; returns flattened 1024-vectors."""
    images = _check_mnist(images)
    margin = (PADDED_SIDE - MNIST_SIDE) // 2
    padded = np.pad(images, ((0, 0), (margin, margin), (margin, margin)))
    return flatten_column_major(padded)


def resize_bilinear_32(images: np.ndarray) -> np.ndarray:
    images = _check_mnist(images)
    zoom = PADDED_SIDE / MNIST_SIDE
    resized = scipy.ndimage.zoom(images, (1.0, zoom, zoom), order=1)
    return flatten_column_major(np.clip(resized, 0.0, 1.0))


def prepare_images(images: np.ndarray, mode: ResizeMode) -> np.ndarray:
    if mode == "pad":
        return pad_to_32(images)
    if mode == "bilinear":
        return resize_bilinear_32(images)
    return flatten_column_major(np.asarray(images))
