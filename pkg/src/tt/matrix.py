"""Matrices in the TT format.

An M x N matrix with M = prod(m_k) and N = prod(n_k) is viewed as a d-way
tensor whose k-th mode fuses the k-th row factor i_k and column factor j_k.
Row and column indices map to their multi-indices column-major (first factor
fastest), and the fused mode index is ``i_k + m_k * j_k``.

Cores are 4-way arrays (r_{k-1}, m_k, n_k, r_k); ``core[:, i, j, :]`` is the
matrix G_k[i, j].

Products with dense operands contract core d first and core 1 last. Every
intermediate of that sweep is laid out as (J, j_k, B, I, r_k) where J
flattens the column factors left of k and I the row factors right of k, each
column-major.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from fractions import Fraction

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from src.core.errors import DomainError, ResourceError
from src.core.settings import DEFAULT_MATERIALIZE_CAP
from src.tt import tensor as tt
from src.tt.tensor import TtTensor, uniform_ranks
from src.tt.truncation import TruncationPolicy


class ShapePair(BaseModel):
    model_config = ConfigDict(frozen=True)

    row_modes: tuple[int, ...]
    col_modes: tuple[int, ...]

    @model_validator(mode="after")
    def _consistent(self) -> "ShapePair":
        if not self.row_modes or not self.col_modes:
            raise ValueError("row_modes and col_modes must be nonempty")
        if len(self.row_modes) != len(self.col_modes):
            raise ValueError(
                f"row_modes and col_modes must have the same length, "
                f"got {len(self.row_modes)} and {len(self.col_modes)}"
            )
        if any(m < 1 for m in self.row_modes) or any(n < 1 for n in self.col_modes):
            raise ValueError("every mode must be >= 1")
        return self

    @property
    def d(self) -> int:
        return len(self.row_modes)

    @property
    def rows(self) -> int:
        return math.prod(self.row_modes)

    @property
    def cols(self) -> int:
        return math.prod(self.col_modes)

    @property
    def fused_modes(self) -> tuple[int, ...]:
        return tuple(m * n for m, n in zip(self.row_modes, self.col_modes))

    def transposed(self) -> "ShapePair":
        return ShapePair(row_modes=self.col_modes, col_modes=self.row_modes)


def resolve_ranks(shape: ShapePair, ranks: int | Sequence[int]) -> tuple[int, ...]:
    """Accept a single internal rank or the full list r_0..r_d."""
    if isinstance(ranks, (int, np.integer)):
        return uniform_ranks(shape.d, int(ranks))
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != shape.d + 1:
        raise DomainError(f"expected {shape.d + 1} ranks, got {len(ranks)}")
    if ranks[0] != 1 or ranks[-1] != 1:
        raise DomainError("boundary ranks must be 1")
    if any(r < 1 for r in ranks):
        raise DomainError("ranks must be >= 1")
    return ranks


class TtMatrix:
    __slots__ = ("_shape", "_cores", "_ranks")

    def __init__(self, shape: ShapePair, cores: Sequence[np.ndarray]) -> None:
        if len(cores) != shape.d:
            raise DomainError(f"expected {shape.d} cores, got {len(cores)}")
        frozen = []
        prev_rank = 1
        for k, core in enumerate(cores):
            core = np.array(core, copy=True)
            if not np.issubdtype(core.dtype, np.floating):
                core = core.astype(np.float64)
            expected = (shape.row_modes[k], shape.col_modes[k])
            if core.ndim != 4 or core.shape[1:3] != expected or core.shape[0] != prev_rank:
                raise DomainError(
                    f"core {k} has shape {core.shape}, expected "
                    f"({prev_rank}, {expected[0]}, {expected[1]}, r_{k + 1})"
                )
            prev_rank = core.shape[3]
            core.setflags(write=False)
            frozen.append(core)
        if prev_rank != 1:
            raise DomainError("the last rank must be 1")
        self._shape = shape
        self._cores = tuple(frozen)
        self._ranks = (1,) + tuple(int(c.shape[3]) for c in frozen)

    @property
    def shape(self) -> ShapePair:
        return self._shape

    @property
    def cores(self) -> tuple[np.ndarray, ...]:
        return self._cores

    @property
    def ranks(self) -> tuple[int, ...]:
        return self._ranks

    @property
    def dtype(self) -> np.dtype:
        return self._cores[0].dtype

    def __repr__(self) -> str:
        return (
            f"TtMatrix(rows={self._shape.row_modes}, cols={self._shape.col_modes}, "
            f"ranks={self._ranks})"
        )

    def astype(self, dtype: np.dtype | type) -> "TtMatrix":
        return TtMatrix(self._shape, [c.astype(dtype) for c in self._cores])


def identity_matrix(modes: Sequence[int]) -> TtMatrix:
    shape = ShapePair(row_modes=tuple(modes), col_modes=tuple(modes))
    return TtMatrix(shape, [np.eye(m).reshape(1, m, m, 1) for m in modes])


def zeros_matrix(shape: ShapePair) -> TtMatrix:
    return TtMatrix(
        shape, [np.zeros((1, m, n, 1)) for m, n in zip(shape.row_modes, shape.col_modes)]
    )


def random_matrix(
    shape: ShapePair,
    ranks: int | Sequence[int],
    rng: np.random.Generator,
    scale: float = 1.0,
) -> TtMatrix:
    ranks = resolve_ranks(shape, ranks)
    return TtMatrix(
        shape,
        [
            scale * rng.standard_normal((ranks[k], m, n, ranks[k + 1]))
            for k, (m, n) in enumerate(zip(shape.row_modes, shape.col_modes))
        ],
    )


def as_tensor(w: TtMatrix) -> TtTensor:
    return TtTensor(
        [c.reshape(c.shape[0], c.shape[1] * c.shape[2], c.shape[3], order="F") for c in w.cores]
    )


def from_tensor(t: TtTensor, shape: ShapePair) -> TtMatrix:
    if t.mode_sizes != shape.fused_modes:
        raise DomainError(
            f"tensor modes {t.mode_sizes} do not fuse shape {shape.row_modes}x{shape.col_modes}"
        )
    return TtMatrix(
        shape,
        [
            c.reshape(c.shape[0], m, n, c.shape[2], order="F")
            for c, m, n in zip(t.cores, shape.row_modes, shape.col_modes)
        ],
    )


def dense_to_fused(w: np.ndarray, shape: ShapePair) -> np.ndarray:
    d = shape.d
    full = w.reshape(shape.row_modes + shape.col_modes, order="F")
    interleave = [axis for k in range(d) for axis in (k, d + k)]
    return full.transpose(interleave).reshape(shape.fused_modes, order="F")


def matrix_from_dense(w: np.ndarray, shape: ShapePair, policy: TruncationPolicy) -> TtMatrix:
    w = np.asarray(w)
    if w.ndim != 2 or w.shape != (shape.rows, shape.cols):
        raise DomainError(
            f"matrix of shape {w.shape} does not match {shape.rows}x{shape.cols} "
            f"from modes {shape.row_modes}x{shape.col_modes}"
        )
    return from_tensor(tt.tt_svd(dense_to_fused(w, shape), policy), shape)


def residual_norm(w: TtMatrix, a: np.ndarray) -> float:
    """||a - W||_F from inner products, never forming W.

    Cancellation limits the accuracy to about sqrt(machine eps) * ||a||; use
    ``to_dense`` when that matters and the matrix fits.
    """
    a = np.asarray(a)
    if a.shape != (w.shape.rows, w.shape.cols):
        raise DomainError(f"matrix of shape {a.shape} does not match {w.shape.rows}x{w.shape.cols}")
    cross = tt.dense_dot(as_tensor(w), dense_to_fused(a, w.shape))
    squared = float(np.vdot(a, a)) - 2.0 * cross + matrix_frobenius_norm(w) ** 2
    return math.sqrt(max(squared, 0.0))


def to_dense(w: TtMatrix, max_elements: int = DEFAULT_MATERIALIZE_CAP) -> np.ndarray:
    shape = w.shape
    total = shape.rows * shape.cols
    if total > max_elements:
        raise ResourceError(
            f"a dense {shape.rows}x{shape.cols} matrix exceeds the cap of {max_elements}",
            {"size": total, "cap": max_elements},
        )
    result = w.cores[0][0]
    for core in w.cores[1:]:
        result = np.tensordot(result, core, axes=([-1], [0]))
    # axes now (i_1, j_1, ..., i_d, j_d, 1)
    d = shape.d
    result = result[..., 0].transpose([2 * k for k in range(d)] + [2 * k + 1 for k in range(d)])
    return result.reshape(shape.rows, shape.cols, order="F")


def contract_right_to_left(
    w: TtMatrix, xs: np.ndarray, keep_states: bool = False
) -> tuple[np.ndarray, list[np.ndarray]]:
    """W @ xs for an N x B block, contracting core d first.

    With ``keep_states`` the list holds, for every core k, the partial sums of
    cores k+1..d against the input: arrays shaped (N_<k, n_k, B, M_>k, r_k).
    """
    shape = w.shape
    d = shape.d
    batch = xs.shape[1]
    cols_before = [math.prod(shape.col_modes[:k]) for k in range(d)]

    state = xs.reshape(cols_before[d - 1], shape.col_modes[d - 1], batch, 1, 1, order="F")
    states: list[np.ndarray] = []
    for k in range(d - 1, -1, -1):
        if keep_states:
            states.append(state)
        core = w.cores[k]
        contracted = np.einsum("pjbqs,aijs->pbiqa", state, core, optimize=True)
        if k == 0:
            ys = contracted.reshape(batch, shape.rows, order="F").T
            return ys, states[::-1]
        state = contracted.reshape(
            cols_before[k - 1],
            shape.col_modes[k - 1],
            batch,
            -1,
            core.shape[0],
            order="F",
        )
    raise AssertionError("unreachable")


def matvec_batch(w: TtMatrix, xs: np.ndarray) -> np.ndarray:
    xs = np.asarray(xs)
    if xs.ndim != 2 or xs.shape[0] != w.shape.cols:
        raise DomainError(
            f"input block of shape {xs.shape} needs {w.shape.cols} rows",
            {"expected_rows": w.shape.cols},
        )
    ys, _ = contract_right_to_left(w, xs)
    return np.ascontiguousarray(ys)


def matvec(w: TtMatrix, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != w.shape.cols:
        raise DomainError(f"vector of length {x.shape} does not match {w.shape.cols} columns")
    return matvec_batch(w, x[:, None])[:, 0]


def transpose(w: TtMatrix) -> TtMatrix:
    return TtMatrix(w.shape.transposed(), [c.transpose(0, 2, 1, 3) for c in w.cores])


def rmatvec_batch(w: TtMatrix, ys: np.ndarray) -> np.ndarray:
    return matvec_batch(transpose(w), ys)


def tt_matrix_param_count(shape: ShapePair, ranks: int | Sequence[int]) -> int:
    ranks = resolve_ranks(shape, ranks)
    return sum(
        m * n * ranks[k] * ranks[k + 1]
        for k, (m, n) in enumerate(zip(shape.row_modes, shape.col_modes))
    )


def matrix_param_count(w: TtMatrix) -> int:
    return tt_matrix_param_count(w.shape, w.ranks)


def compression_factor(shape: ShapePair, ranks: int | Sequence[int]) -> Fraction:
    return Fraction(shape.rows * shape.cols, tt_matrix_param_count(shape, ranks))


def matvec_workspace_size(shape: ShapePair, ranks: int | Sequence[int], batch: int = 1) -> int:
    """Peak auxiliary scalars of ``contract_right_to_left`` (one state plus the
    contraction result and its reshaped copy)."""
    ranks = resolve_ranks(shape, ranks)
    d = shape.d
    peak = 0
    for k in range(d):
        state = (
            batch
            * math.prod(shape.col_modes[: k + 1])
            * math.prod(shape.row_modes[k + 1 :])
            * ranks[k + 1]
        )
        contracted = (
            batch * math.prod(shape.col_modes[:k]) * math.prod(shape.row_modes[k:]) * ranks[k]
        )
        peak = max(peak, state + 2 * contracted)
    return peak


def matrix_add(a: TtMatrix, b: TtMatrix) -> TtMatrix:
    if a.shape != b.shape:
        raise DomainError("TT-matrices must share row and column modes to be added")
    return from_tensor(tt.add(as_tensor(a), as_tensor(b)), a.shape)


def matrix_scale(a: TtMatrix, c: float) -> TtMatrix:
    return from_tensor(tt.scale(as_tensor(a), c), a.shape)


def matrix_round(a: TtMatrix, policy: TruncationPolicy) -> TtMatrix:
    return from_tensor(tt.round(as_tensor(a), policy), a.shape)


def matrix_frobenius_norm(a: TtMatrix) -> float:
    return tt.frobenius_norm(as_tensor(a))
