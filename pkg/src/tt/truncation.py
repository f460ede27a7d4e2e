from __future__ import annotations

import math
from typing import Literal

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.errors import ComputationError


class TruncationPolicy(BaseModel):
    """Rank-selection rule shared by TT-SVD and rounding.

    ``max_rank`` caps every internal rank, ``epsilon`` is a relative Frobenius
    error budget for the whole tensor. When both are set the stricter of the
    two wins at every unfolding.
    """

    model_config = ConfigDict(frozen=True)

    max_rank: int | None = Field(default=None, ge=1)
    epsilon: float | None = Field(default=None, ge=0.0)

    @model_validator(mode="after")
    def _one_criterion(self) -> "TruncationPolicy":
        if self.max_rank is None and self.epsilon is None:
            raise ValueError("truncation policy needs max_rank, epsilon or both")
        return self

    @property
    def mode(self) -> Literal["max_rank", "epsilon", "both"]:
        if self.max_rank is not None and self.epsilon is not None:
            return "both"
        return "max_rank" if self.max_rank is not None else "epsilon"

    @classmethod
    def exact(cls) -> "TruncationPolicy":
        return cls(epsilon=0.0)

    def unfolding_budget(self, total_norm: float, d: int) -> float | None:
        """Absolute discard budget per unfolding: epsilon/sqrt(d-1) of the total norm."""
        if self.epsilon is None:
            return None
        if d <= 1:
            return 0.0
        return self.epsilon * total_norm / math.sqrt(d - 1)


def choose_rank(singular_values: np.ndarray, policy: TruncationPolicy, budget: float | None) -> int:
    """Number of leading singular values to keep.

    Values are discarded from the tail (smallest first); equal values keep the
    lower index. At least one value is always kept.
    """
    count = int(singular_values.shape[0])
    rank = count
    if budget is not None:
        # tail[i] = sqrt(sum of s[j]^2 for j >= i); tail[count] = 0 always fits
        tail = np.append(np.sqrt(np.cumsum(singular_values[::-1] ** 2)[::-1]), 0.0)
        rank = int(np.argmax(tail <= budget))
    if policy.max_rank is not None:
        rank = min(rank, policy.max_rank)
    return max(1, min(rank, count))


def truncated_svd(
    matrix: np.ndarray, policy: TruncationPolicy, budget: float | None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        u, s, vt = scipy.linalg.svd(matrix, full_matrices=False, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ComputationError(f"SVD failed on a {matrix.shape} unfolding: {exc}") from exc
    rank = choose_rank(s, policy, budget)
    return u[:, :rank], s[:rank], vt[:rank, :]
