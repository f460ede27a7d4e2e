from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.core.errors import DomainError
from src.data.idx import load_idx
from src.data.preprocess import ResizeMode, prepare_images


@dataclass(frozen=True)
class DatasetSplit:
    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        if self.images.ndim != 2:
            raise DomainError(f"images must be (count, features), got {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise DomainError(
                f"{self.images.shape[0]} images but labels have shape {self.labels.shape}"
            )

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def features(self) -> int:
        return int(self.images.shape[1])

    def head(self, count: int) -> "DatasetSplit":
        return DatasetSplit(self.images[:count], self.labels[:count])

    def astype(self, dtype: np.dtype | type) -> "DatasetSplit":
        return DatasetSplit(self.images.astype(dtype), self.labels)


def load_split(
    images_path: str | Path, labels_path: str | Path, resize: ResizeMode = "pad"
) -> DatasetSplit:
    images = load_idx(images_path)
    labels = load_idx(labels_path)
    if images.ndim != 3 or labels.ndim != 1:
        raise DomainError(f"{images_path} must hold images and {labels_path} labels")
    if images.shape[0] != labels.shape[0]:
        raise DomainError(
            f"{images.shape[0]} images in {images_path} "
            f"but {labels.shape[0]} labels in {labels_path}"
        )
    return DatasetSplit(prepare_images(images, resize), labels)
