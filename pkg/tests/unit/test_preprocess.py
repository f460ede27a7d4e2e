from __future__ import annotations

import numpy as np
import pytest

from src.core.errors import DomainError, FormatError
from src.data.dataset import DatasetSplit, load_split
from src.data.preprocess import flatten_column_major, pad_to_32, prepare_images, resize_bilinear_32
from tests.support import write_idx


def test_flatten_puts_the_row_index_first() -> None:
    images = np.array([[[1, 2], [3, 4]]])
    np.testing.assert_array_equal(flatten_column_major(images), [[1, 3, 2, 4]])


def test_padding_keeps_pixels_and_adds_a_border(rng) -> None:
    images = rng.uniform(size=(3, 28, 28))
    flat = pad_to_32(images)
    assert flat.shape == (3, 1024)
    square = flat.reshape(3, 32, 32, order="C").transpose(0, 2, 1)
    np.testing.assert_array_equal(square[:, 2:30, 2:30], images)
    assert not square[:, :2].any() and not square[:, 30:].any()
    assert not square[:, :, :2].any() and not square[:, :, 30:].any()


def test_bilinear_resize_stays_in_unit_range(rng) -> None:
    images = rng.uniform(size=(2, 28, 28))
    flat = resize_bilinear_32(images)
    assert flat.shape == (2, 1024)
    assert flat.min() >= 0.0 and flat.max() <= 1.0
    constant = resize_bilinear_32(np.full((1, 28, 28), 0.5))
    np.testing.assert_allclose(constant, 0.5)


def test_resize_modes_need_mnist_sized_images() -> None:
    with pytest.raises(DomainError):
        pad_to_32(np.zeros((1, 2, 2)))
    with pytest.raises(DomainError):
        prepare_images(np.zeros((1, 27, 28)), "bilinear")
    assert prepare_images(np.zeros((1, 2, 2)), "none").shape == (1, 4)


def test_load_split_without_resizing(idx_fixture) -> None:
    split = load_split(idx_fixture["images"], idx_fixture["labels"], resize="none")
    assert len(split) == 2 and split.features == 4
    np.testing.assert_allclose(split.images[0], [0.0, 0.2, 1.0, 0.4])
    np.testing.assert_array_equal(split.labels, [3, 7])


def test_load_split_rejects_swapped_files(idx_fixture) -> None:
    with pytest.raises(DomainError):
        load_split(idx_fixture["labels"], idx_fixture["images"], resize="none")


def test_load_split_rejects_count_mismatch(tmp_path, idx_fixture) -> None:
    labels = write_idx(tmp_path / "three-labels", np.array([1, 2, 3], dtype=np.uint8))
    with pytest.raises(DomainError, match="2 images"):
        load_split(idx_fixture["images"], labels, resize="none")
    with pytest.raises(FormatError):
        load_split(tmp_path / "nope", labels)


def test_split_helpers() -> None:
    split = DatasetSplit(np.arange(12.0).reshape(4, 3), np.array([0, 1, 2, 3]))
    head = split.head(2)
    assert len(head) == 2
    np.testing.assert_array_equal(head.labels, [0, 1])
    assert split.astype(np.float32).images.dtype == np.float32
    with pytest.raises(DomainError):
        DatasetSplit(np.zeros((4, 3)), np.zeros(3))
