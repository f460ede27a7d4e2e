from __future__ import annotations

import math
from collections.abc import Sequence

from pydantic import BaseModel, ConfigDict, field_validator

from src.core.errors import DomainError


class MultiIndexMap(BaseModel):
    """Column-major bijection between flat indices and multi-indices.

    flat = mu_1 + n_1 * mu_2 + n_1 * n_2 * mu_3 + ...  (first mode fastest)
    """

    model_config = ConfigDict(frozen=True)

    modes: tuple[int, ...]

    @field_validator("modes")
    @classmethod
    def _positive(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value:
            raise ValueError("at least one mode is required")
        if any(n < 1 for n in value):
            raise ValueError("every mode must be >= 1")
        return value

    @property
    def size(self) -> int:
        return math.prod(self.modes)


def multi_to_flat(index_map: MultiIndexMap, idx: Sequence[int]) -> int:
    if len(idx) != len(index_map.modes):
        raise DomainError(f"expected {len(index_map.modes)} indices, got {len(idx)}")
    flat = 0
    stride = 1
    for k, (i, n) in enumerate(zip(idx, index_map.modes)):
        if not 0 <= i < n:
            raise DomainError(
                f"index {i} out of range for mode {k} of size {n}", {"dimension": k}
            )
        flat += int(i) * stride
        stride *= n
    return flat


def flat_to_multi(index_map: MultiIndexMap, flat: int) -> tuple[int, ...]:
    if not 0 <= flat < index_map.size:
        raise DomainError(f"flat index {flat} out of range [0, {index_map.size})")
    out = []
    for n in index_map.modes:
        flat, rem = divmod(flat, n)
        out.append(rem)
    return tuple(out)
