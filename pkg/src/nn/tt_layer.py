"""Fully-connected layer whose weight matrix lives in the TT format.

y = W x + b with W a TtMatrix and b dense. Batches are column blocks: x is
N x B and y is M x B. Gradients over a batch are sums over its samples.

The backward pass runs two sweeps over the cores and never forms W or any
M x N Jacobian:

* right to left, the partial sums R_k: cores k+1..d contracted with the
  input, laid out (N_<k, n_k, B, M_>k, r_k);
* left to right, the prefix products U_k: cores 1..k-1 contracted with the
  upstream gradient, laid out (N_<k, r_{k-1}, B, m_k, M_>k).

The gradient of core k is the contraction of U_k with R_k over everything
but the core's own four axes. The final left-to-right step yields W^T dy.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.core.errors import DomainError, ResourceError
from src.core.settings import DEFAULT_MATERIALIZE_CAP
from src.nn.layers import DenseLayer, Layer, check_block
from src.tt.matrix import (
    ShapePair,
    TtMatrix,
    contract_right_to_left,
    matrix_from_dense,
    matrix_param_count,
    resolve_ranks,
)
from src.tt.truncation import TruncationPolicy


class SigmaRule(BaseModel):
    """Standard deviation of the Gaussian core initialization.

    ``fixed`` draws every core entry with the same ``sigma``. ``scaled`` uses
    sigma_k = s / sqrt(n_k r_{k-1} r_k) with the gain s picked so that a unit
    variance input gives outputs of variance ``target_variance``.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["scaled", "fixed"] = "scaled"
    sigma: float = Field(default=0.02, ge=0.0)
    target_variance: float = Field(default=1.0, gt=0.0)

    def core_sigmas(self, shape: ShapePair, ranks: Sequence[int]) -> list[float]:
        if self.kind == "fixed":
            return [self.sigma] * shape.d
        internal = math.prod(ranks[1:-1])
        gain = (self.target_variance * internal) ** (1.0 / (2 * shape.d))
        return [
            gain / math.sqrt(n * ranks[k] * ranks[k + 1]) for k, n in enumerate(shape.col_modes)
        ]


@dataclass(frozen=True)
class LayerGradients:
    core_grads: list[np.ndarray]
    bias_grad: np.ndarray
    input_grad: np.ndarray


@dataclass(frozen=True)
class BackwardWorkspace:
    prefix_products: list[np.ndarray]
    partial_sums: list[np.ndarray]
    input_grad: np.ndarray

    @property
    def postfix_products(self) -> list[np.ndarray]:
        # Postfix core products only ever appear contracted with the input,
        # which is exactly what the partial sums hold.
        return self.partial_sums

    def aux_scalars(self) -> int:
        return sum(int(a.size) for a in self.prefix_products) + sum(
            int(a.size) for a in self.partial_sums
        )


class TtLayer(Layer):
    kind = "tt"

    def __init__(self, weights: TtMatrix, bias: np.ndarray) -> None:
        bias = np.array(bias, copy=True)
        if bias.shape != (weights.shape.rows,):
            raise DomainError(
                f"bias length {bias.shape} does not match {weights.shape.rows} outputs"
            )
        bias.setflags(write=False)
        self.weights = weights
        self.bias = bias

    @classmethod
    def from_dense(
        cls,
        weight: np.ndarray,
        bias: np.ndarray,
        shape: ShapePair,
        policy: TruncationPolicy,
    ) -> "TtLayer":
        return cls(matrix_from_dense(weight, shape, policy), bias)

    @classmethod
    def from_dense_layer(
        cls, layer: DenseLayer, shape: ShapePair, policy: TruncationPolicy
    ) -> "TtLayer":
        return cls.from_dense(layer.weight, layer.bias, shape, policy)

    @property
    def shape(self) -> ShapePair:
        return self.weights.shape

    @property
    def ranks(self) -> tuple[int, ...]:
        return self.weights.ranks

    @property
    def in_dim(self) -> int:
        return self.shape.cols

    @property
    def out_dim(self) -> int:
        return self.shape.rows

    def forward(self, x: np.ndarray) -> np.ndarray:
        return forward(self, x)

    def backward(self, x: np.ndarray, dy: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        grads = backward(self, x, dy)
        return grads.input_grad, [*grads.core_grads, grads.bias_grad]

    def parameters(self) -> list[np.ndarray]:
        return [*self.weights.cores, self.bias]

    def with_parameters(self, params: Sequence[np.ndarray]) -> "TtLayer":
        self._check_param_count(params)
        return TtLayer(TtMatrix(self.shape, params[:-1]), params[-1])

    def param_count(self) -> int:
        return matrix_param_count(self.weights) + self.out_dim

    def dense_param_count(self) -> int:
        return self.in_dim * self.out_dim + self.out_dim

    def summary(self) -> dict[str, Any]:
        return {
            **super().summary(),
            "row_modes": list(self.shape.row_modes),
            "col_modes": list(self.shape.col_modes),
            "ranks": list(self.ranks),
        }


def forward(layer: TtLayer, x: np.ndarray) -> np.ndarray:
    x = check_block(x, layer.in_dim, "TT-layer")
    ys, _ = contract_right_to_left(layer.weights, x)
    return ys + layer.bias[:, None]


def backward_workspace(layer: TtLayer, x: np.ndarray, dy: np.ndarray) -> BackwardWorkspace:
    x = check_block(x, layer.in_dim, "TT-layer")
    dy = check_block(dy, layer.out_dim, "TT-layer gradient")
    if x.shape[1] != dy.shape[1]:
        raise DomainError(f"batch sizes differ: input {x.shape[1]}, gradient {dy.shape[1]}")

    shape = layer.shape
    d = shape.d
    batch = x.shape[1]
    _, partial_sums = contract_right_to_left(layer.weights, x, keep_states=True)

    prefix: list[np.ndarray] = []
    carry = dy.reshape(shape.row_modes[0], -1, batch, order="F").transpose(2, 0, 1)[None, None]
    input_grad = None
    for k, core in enumerate(layer.weights.cores):
        prefix.append(carry)
        # (N_<k, r_{k-1}, B, m_k, M_>k) x (r_{k-1}, m_k, n_k, r_k) -> (N_<k, n_k, r_k, B, M_>k)
        step = np.einsum("pabiq,aijs->pjsbq", carry, core, optimize=True)
        if k == d - 1:
            input_grad = step.reshape(shape.cols, batch, order="F")
        else:
            carry = step.reshape(
                -1,
                core.shape[3],
                batch,
                shape.row_modes[k + 1],
                math.prod(shape.row_modes[k + 2 :]),
                order="F",
            )
    return BackwardWorkspace(
        prefix_products=prefix,
        partial_sums=partial_sums,
        input_grad=np.ascontiguousarray(input_grad),
    )


def backward(layer: TtLayer, x: np.ndarray, dy: np.ndarray) -> LayerGradients:
    workspace = backward_workspace(layer, x, dy)
    core_grads = [
        np.einsum("pabiq,pjbqs->aijs", u, r, optimize=True)
        for u, r in zip(workspace.prefix_products, workspace.partial_sums)
    ]
    return LayerGradients(
        core_grads=core_grads,
        bias_grad=np.asarray(dy).sum(axis=1),
        input_grad=workspace.input_grad,
    )


def init_gaussian(
    shape: ShapePair,
    ranks: int | Sequence[int],
    sigma_rule: SigmaRule,
    rng: np.random.Generator,
    dtype: np.dtype | type = np.float64,
) -> TtLayer:
    ranks = resolve_ranks(shape, ranks)
    sigmas = sigma_rule.core_sigmas(shape, ranks)
    cores = [
        (sigmas[k] * rng.standard_normal((ranks[k], m, n, ranks[k + 1]))).astype(dtype)
        for k, (m, n) in enumerate(zip(shape.row_modes, shape.col_modes))
    ]
    return TtLayer(TtMatrix(shape, cores), np.zeros(shape.rows, dtype=dtype))


def grads_to_tt_update(
    dense_grad: np.ndarray,
    shape: ShapePair,
    policy: TruncationPolicy,
    max_elements: int = DEFAULT_MATERIALIZE_CAP,
) -> TtMatrix:
    """Compress a dense weight gradient into a TT-matrix.

    This is the memory-heavy alternative to core gradients: it needs the full
    M x N gradient in memory.
    """
    dense_grad = np.asarray(dense_grad)
    if dense_grad.size > max_elements:
        raise ResourceError(
            f"a dense {dense_grad.shape} gradient exceeds the cap of {max_elements}",
            {"size": int(dense_grad.size), "cap": max_elements},
        )
    return matrix_from_dense(dense_grad, shape, policy)
