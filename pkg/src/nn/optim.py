from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.core.errors import DomainError

MOMENTUM_CONVENTION = "velocity"


class LearningRateSchedule(BaseModel):
    """Constant rate with optional step decay at the listed epochs (0-based)."""

    model_config = ConfigDict(frozen=True)

    base_lr: float = Field(default=0.01, ge=0.0)
    decay_factor: float = Field(default=1.0, gt=0.0)
    decay_epochs: tuple[int, ...] = ()

    def lr_at(self, epoch: int) -> float:
        steps = sum(1 for boundary in self.decay_epochs if epoch >= boundary)
        return self.base_lr * self.decay_factor**steps


@dataclass
class SgdMomentumState:
    """Velocity buffers and hyperparameters; updated in place by ``sgd_step``.

    Update rule per parameter array w with gradient g:
        g <- g + weight_decay * w
        v <- momentum * v - lr * g
        w <- w + v
    """

    schedule: LearningRateSchedule = field(default_factory=LearningRateSchedule)
    momentum: float = 0.9
    weight_decay: float = 0.0005
    velocities: list[np.ndarray] = field(default_factory=list)
    learning_rate: float | None = None
    step: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.momentum < 1.0:
            raise DomainError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0.0:
            raise DomainError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.learning_rate is None:
            self.learning_rate = self.schedule.lr_at(0)

    @classmethod
    def for_parameters(
        cls,
        params: Sequence[np.ndarray],
        schedule: LearningRateSchedule | None = None,
        momentum: float = 0.9,
        weight_decay: float = 0.0005,
    ) -> "SgdMomentumState":
        return cls(
            schedule=schedule or LearningRateSchedule(),
            momentum=momentum,
            weight_decay=weight_decay,
            velocities=[np.zeros_like(p) for p in params],
        )

    def start_epoch(self, epoch: int) -> float:
        self.learning_rate = self.schedule.lr_at(epoch)
        return self.learning_rate


def sgd_step(
    params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: SgdMomentumState
) -> list[np.ndarray]:
    """Return the updated parameter arrays; the state's velocities are replaced."""
    if not (len(params) == len(grads) == len(state.velocities)):
        raise DomainError(
            f"parameter, gradient and velocity counts differ: "
            f"{len(params)}, {len(grads)}, {len(state.velocities)}"
        )
    lr = state.learning_rate
    updated = []
    velocities = []
    for position, (w, g, v) in enumerate(zip(params, grads, state.velocities)):
        if w.shape != g.shape or w.shape != v.shape:
            raise DomainError(
                f"shape mismatch at parameter {position}: "
                f"param {w.shape}, grad {g.shape}, velocity {v.shape}"
            )
        g = g + state.weight_decay * w
        v = state.momentum * v - lr * g
        velocities.append(v.astype(w.dtype, copy=False))
        updated.append((w + v).astype(w.dtype, copy=False))
    state.velocities = velocities
    state.step += 1
    return updated
