from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Sequence
from typing import Any, ClassVar

import numpy as np

from src.core.errors import DomainError


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, copy=True)
    out.setflags(write=False)
    return out


def check_block(x: np.ndarray, rows: int, layer: str) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != rows:
        raise DomainError(
            f"{layer} expects an input block with {rows} rows, got shape {x.shape}",
            {"expected_rows": rows, "shape": list(x.shape)},
        )
    return x


class Layer(ABC):
    """A network stage acting on column blocks: inputs are (in_dim, batch)."""

    kind: ClassVar[str]

    @property
    @abstractmethod
    def in_dim(self) -> int | None: ...

    @property
    @abstractmethod
    def out_dim(self) -> int | None: ...

    @abstractmethod
    def forward(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def backward(self, x: np.ndarray, dy: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Return the input gradient and parameter gradients aligned with ``parameters()``."""

    @abstractmethod
    def parameters(self) -> list[np.ndarray]: ...

    @abstractmethod
    def with_parameters(self, params: Sequence[np.ndarray]) -> "Layer": ...

    def param_count(self) -> int:
        return sum(int(p.size) for p in self.parameters())

    def dense_param_count(self) -> int:
        """Parameters of the uncompressed fully-connected layer doing the same map."""
        return self.param_count()

    def summary(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "in_dim": self.in_dim,
            "out_dim": self.out_dim,
            "params": self.param_count(),
            "dense_params": self.dense_param_count(),
        }

    def _check_param_count(self, params: Sequence[np.ndarray]) -> None:
        current = self.parameters()
        if len(params) != len(current):
            raise DomainError(f"{self.kind} layer takes {len(current)} arrays, got {len(params)}")
        for have, new in zip(current, params):
            if have.shape != np.shape(new):
                raise DomainError(
                    f"{self.kind} parameter shape {np.shape(new)} does not match {have.shape}"
                )


class ReLU(Layer):
    kind = "relu"

    @property
    def in_dim(self) -> int | None:
        return None

    @property
    def out_dim(self) -> int | None:
        return None

    def forward(self, x: np.ndarray) -> np.ndarray:
        return np.maximum(x, 0)

    def backward(self, x: np.ndarray, dy: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        return np.where(x > 0, dy, 0), []

    def parameters(self) -> list[np.ndarray]:
        return []

    def with_parameters(self, params: Sequence[np.ndarray]) -> "ReLU":
        self._check_param_count(params)
        return self


class DenseLayer(Layer):
    kind = "dense"

    def __init__(self, weight: np.ndarray, bias: np.ndarray) -> None:
        weight = np.asarray(weight)
        bias = np.asarray(bias)
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            raise DomainError(f"dense weight {weight.shape} and bias {bias.shape} disagree")
        if not (np.all(np.isfinite(weight)) and np.all(np.isfinite(bias))):
            raise DomainError("dense layer parameters must be finite")
        self.weight = _frozen(weight)
        self.bias = _frozen(bias)

    @classmethod
    def init_gaussian(
        cls,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        sigma: float | None = None,
        dtype: np.dtype | type = np.float64,
    ) -> "DenseLayer":
        """Gaussian weights; without ``sigma`` the std is sqrt(2 / in_dim)."""
        std = sigma if sigma is not None else float(np.sqrt(2.0 / in_dim))
        weight = (std * rng.standard_normal((out_dim, in_dim))).astype(dtype)
        return cls(weight, np.zeros(out_dim, dtype=dtype))

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = check_block(x, self.in_dim, "dense layer")
        return self.weight @ x + self.bias[:, None]

    def backward(self, x: np.ndarray, dy: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        x = check_block(x, self.in_dim, "dense layer")
        dy = check_block(dy, self.out_dim, "dense layer gradient")
        return self.weight.T @ dy, [dy @ x.T, dy.sum(axis=1)]

    def parameters(self) -> list[np.ndarray]:
        return [self.weight, self.bias]

    def with_parameters(self, params: Sequence[np.ndarray]) -> "DenseLayer":
        self._check_param_count(params)
        return DenseLayer(params[0], params[1])


class MatrixRankBottleneck(Layer):
    """Rank-r weight realized as two stacked dense maps: y = left @ (right @ x) + bias."""

    kind = "rank"

    def __init__(self, left: np.ndarray, right: np.ndarray, bias: np.ndarray) -> None:
        left = np.asarray(left)
        right = np.asarray(right)
        bias = np.asarray(bias)
        if left.ndim != 2 or right.ndim != 2 or left.shape[1] != right.shape[0]:
            raise DomainError(f"bottleneck factors {left.shape} and {right.shape} do not chain")
        if left.shape[1] < 1:
            raise DomainError("bottleneck rank must be >= 1")
        if bias.shape != (left.shape[0],):
            raise DomainError(f"bias length {bias.shape} does not match {left.shape[0]} outputs")
        self.left = _frozen(left)
        self.right = _frozen(right)
        self.bias = _frozen(bias)

    @classmethod
    def init_gaussian(
        cls,
        in_dim: int,
        out_dim: int,
        rank: int,
        rng: np.random.Generator,
        sigma: float | None = None,
        dtype: np.dtype | type = np.float64,
    ) -> "MatrixRankBottleneck":
        right_std = sigma if sigma is not None else float(np.sqrt(1.0 / in_dim))
        left_std = sigma if sigma is not None else float(np.sqrt(2.0 / rank))
        return cls(
            (left_std * rng.standard_normal((out_dim, rank))).astype(dtype),
            (right_std * rng.standard_normal((rank, in_dim))).astype(dtype),
            np.zeros(out_dim, dtype=dtype),
        )

    @property
    def rank(self) -> int:
        return int(self.left.shape[1])

    @property
    def in_dim(self) -> int:
        return int(self.right.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.left.shape[0])

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = check_block(x, self.in_dim, "rank bottleneck")
        return self.left @ (self.right @ x) + self.bias[:, None]

    def backward(self, x: np.ndarray, dy: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        x = check_block(x, self.in_dim, "rank bottleneck")
        dy = check_block(dy, self.out_dim, "rank bottleneck gradient")
        hidden = self.right @ x
        dhidden = self.left.T @ dy
        return self.right.T @ dhidden, [dy @ hidden.T, dhidden @ x.T, dy.sum(axis=1)]

    def parameters(self) -> list[np.ndarray]:
        return [self.left, self.right, self.bias]

    def with_parameters(self, params: Sequence[np.ndarray]) -> "MatrixRankBottleneck":
        self._check_param_count(params)
        return MatrixRankBottleneck(params[0], params[1], params[2])

    def dense_param_count(self) -> int:
        return self.in_dim * self.out_dim + self.out_dim

    def summary(self) -> dict[str, Any]:
        return {**super().summary(), "rank": self.rank}
