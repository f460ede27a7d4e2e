"""Tensors in the tensor-train (TT) format.

A d-dimensional tensor with mode sizes n_1..n_d is stored as d cores; core k
is a 3-way array of extents (r_{k-1}, n_k, r_k) and the slice ``core[:, j, :]``
is the matrix G_k[j]. Boundary ranks r_0 and r_d are always 1, so an element
is the 1x1 product G_1[j_1] G_2[j_2] ... G_d[j_d].

All indices are 0-based. Cores are copied on construction and marked
read-only, so a TtTensor can be shared freely between readers.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np
import scipy.linalg

from src.core.errors import ComputationError, DomainError, ResourceError
from src.core.settings import DEFAULT_MATERIALIZE_CAP
from src.tt.truncation import TruncationPolicy, truncated_svd

logger = logging.getLogger(__name__)


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, copy=True)
    out.setflags(write=False)
    return out


class TtTensor:
    __slots__ = ("_cores", "_mode_sizes", "_ranks")

    def __init__(self, cores: Sequence[np.ndarray]) -> None:
        if len(cores) == 0:
            raise DomainError("a TT-tensor needs at least one core")
        frozen = []
        for k, core in enumerate(cores):
            core = np.asarray(core)
            if core.ndim != 3:
                raise DomainError(f"core {k} must be 3-way, got shape {core.shape}")
            if not np.issubdtype(core.dtype, np.floating):
                core = core.astype(np.float64)
            frozen.append(_frozen(core))

        if frozen[0].shape[0] != 1 or frozen[-1].shape[2] != 1:
            raise DomainError(
                "boundary ranks must be 1",
                {"r_0": int(frozen[0].shape[0]), "r_d": int(frozen[-1].shape[2])},
            )
        for k in range(1, len(frozen)):
            if frozen[k - 1].shape[2] != frozen[k].shape[0]:
                raise DomainError(
                    f"rank mismatch between core {k - 1} and core {k}: "
                    f"{frozen[k - 1].shape[2]} != {frozen[k].shape[0]}"
                )
        for k, core in enumerate(frozen):
            if min(core.shape) < 1:
                raise DomainError(f"core {k} has an empty extent {core.shape}")

        self._cores = tuple(frozen)
        self._mode_sizes = tuple(int(c.shape[1]) for c in frozen)
        self._ranks = (1,) + tuple(int(c.shape[2]) for c in frozen)

    @property
    def cores(self) -> tuple[np.ndarray, ...]:
        return self._cores

    @property
    def mode_sizes(self) -> tuple[int, ...]:
        return self._mode_sizes

    @property
    def ranks(self) -> tuple[int, ...]:
        return self._ranks

    @property
    def d(self) -> int:
        return len(self._cores)

    @property
    def dtype(self) -> np.dtype:
        return self._cores[0].dtype

    def __repr__(self) -> str:
        return f"TtTensor(mode_sizes={self._mode_sizes}, ranks={self._ranks})"

    @classmethod
    def zeros(cls, mode_sizes: Sequence[int]) -> "TtTensor":
        return cls([np.zeros((1, int(n), 1)) for n in mode_sizes])

    @classmethod
    def ones(cls, mode_sizes: Sequence[int]) -> "TtTensor":
        return cls([np.ones((1, int(n), 1)) for n in mode_sizes])

    @classmethod
    def random(
        cls,
        mode_sizes: Sequence[int],
        ranks: Sequence[int],
        rng: np.random.Generator,
        scale: float = 1.0,
    ) -> "TtTensor":
        if len(ranks) != len(mode_sizes) + 1:
            raise DomainError(
                f"expected {len(mode_sizes) + 1} ranks for {len(mode_sizes)} modes, "
                f"got {len(ranks)}"
            )
        return cls(
            [
                scale * rng.standard_normal((int(ranks[k]), int(n), int(ranks[k + 1])))
                for k, n in enumerate(mode_sizes)
            ]
        )


def uniform_ranks(d: int, rank: int) -> tuple[int, ...]:
    """(1, r, ..., r, 1) for d cores."""
    if d < 1:
        raise DomainError("d must be at least 1")
    return (1,) + (int(rank),) * (d - 1) + (1,)


def _check_same_modes(a: TtTensor, b: TtTensor) -> None:
    if a.mode_sizes != b.mode_sizes:
        raise DomainError(f"mode sizes differ: {a.mode_sizes} vs {b.mode_sizes}")


def element(t: TtTensor, idx: Sequence[int]) -> float:
    if len(idx) != t.d:
        raise DomainError(f"index has {len(idx)} entries, tensor has {t.d} dimensions")
    row = np.ones((1, 1), dtype=t.dtype)
    for k, (j, core) in enumerate(zip(idx, t.cores)):
        j = int(j)
        if not 0 <= j < core.shape[1]:
            raise DomainError(
                f"index {j} out of range for dimension {k} of size {core.shape[1]}",
                {"dimension": k, "index": j, "size": int(core.shape[1])},
            )
        row = row @ core[:, j, :]
    return float(row[0, 0])


def materialize(t: TtTensor, max_elements: int = DEFAULT_MATERIALIZE_CAP) -> np.ndarray:
    total = math.prod(t.mode_sizes)
    if total > max_elements:
        raise ResourceError(
            f"materializing {total} scalars exceeds the cap of {max_elements}",
            {"size": total, "cap": max_elements},
        )
    # running result: (n_1 * ... * n_k, r_k), C-order over the leading modes
    result = t.cores[0].reshape(t.mode_sizes[0], t.ranks[1])
    for core in t.cores[1:]:
        r_prev, n, r_next = core.shape
        result = (result @ core.reshape(r_prev, n * r_next)).reshape(-1, r_next)
    return result.reshape(t.mode_sizes)


def tt_svd(a: np.ndarray, policy: TruncationPolicy) -> TtTensor:
    a = np.asarray(a)
    if a.size == 0 or a.ndim == 0:
        raise DomainError("tt_svd needs a nonempty array with at least one dimension")
    if not np.issubdtype(a.dtype, np.floating):
        a = a.astype(np.float64)
    modes = a.shape
    d = len(modes)
    if d == 1:
        return TtTensor([a.reshape(1, modes[0], 1)])

    budget = policy.unfolding_budget(float(np.linalg.norm(a)), d)
    cores = []
    rank = 1
    remainder = a
    for k in range(d - 1):
        unfolding = remainder.reshape(rank * modes[k], -1)
        u, s, vt = truncated_svd(unfolding, policy, budget)
        next_rank = s.shape[0]
        cores.append(u.reshape(rank, modes[k], next_rank))
        remainder = s[:, None] * vt
        rank = next_rank
    cores.append(remainder.reshape(rank, modes[-1], 1))
    result = TtTensor(cores)
    logger.debug("tt_svd modes=%s ranks=%s", modes, result.ranks)
    return result


def orthogonalize_right(t: TtTensor) -> TtTensor:
    """Make cores 2..d right-orthogonal; the norm ends up in the first core."""
    cores = [np.array(c) for c in t.cores]
    for k in range(t.d - 1, 0, -1):
        r_prev, n, r_next = cores[k].shape
        try:
            q, r = scipy.linalg.qr(
                cores[k].reshape(r_prev, n * r_next).T, mode="economic", check_finite=False
            )
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise ComputationError(f"QR failed on core {k}: {exc}") from exc
        new_rank = q.shape[1]
        cores[k] = q.T.reshape(new_rank, n, r_next)
        cores[k - 1] = np.tensordot(cores[k - 1], r.T, axes=([2], [0]))
    return TtTensor(cores)


def round(t: TtTensor, policy: TruncationPolicy) -> TtTensor:  # noqa: A001
    if t.d == 1:
        return t
    ortho = orthogonalize_right(t)
    cores = [np.array(c) for c in ortho.cores]
    budget = policy.unfolding_budget(float(np.linalg.norm(cores[0])), t.d)
    for k in range(t.d - 1):
        r_prev, n, r_next = cores[k].shape
        u, s, vt = truncated_svd(cores[k].reshape(r_prev * n, r_next), policy, budget)
        new_rank = s.shape[0]
        cores[k] = u.reshape(r_prev, n, new_rank)
        cores[k + 1] = np.tensordot(s[:, None] * vt, cores[k + 1], axes=([1], [0]))
    result = TtTensor(cores)
    logger.debug("round ranks %s -> %s", t.ranks, result.ranks)
    return result


def add(a: TtTensor, b: TtTensor) -> TtTensor:
    _check_same_modes(a, b)
    if a.d == 1:
        return TtTensor([a.cores[0] + b.cores[0]])
    dtype = np.result_type(a.dtype, b.dtype)
    cores = []
    for k, (ca, cb) in enumerate(zip(a.cores, b.cores)):
        ra0, n, ra1 = ca.shape
        rb0, _, rb1 = cb.shape
        if k == 0:
            core = np.concatenate([ca, cb], axis=2)
        elif k == a.d - 1:
            core = np.concatenate([ca, cb], axis=0)
        else:
            core = np.zeros((ra0 + rb0, n, ra1 + rb1), dtype=dtype)
            core[:ra0, :, :ra1] = ca
            core[ra0:, :, ra1:] = cb
        cores.append(core)
    return TtTensor(cores)


def hadamard(a: TtTensor, b: TtTensor) -> TtTensor:
    _check_same_modes(a, b)
    cores = []
    for ca, cb in zip(a.cores, b.cores):
        ra0, n, ra1 = ca.shape
        rb0, _, rb1 = cb.shape
        # slice j is kron(ca[:, j, :], cb[:, j, :])
        core = np.einsum("ajb,cjd->acjbd", ca, cb).reshape(ra0 * rb0, n, ra1 * rb1)
        cores.append(core)
    return TtTensor(cores)


def scale(a: TtTensor, c: float) -> TtTensor:
    cores = list(a.cores)
    cores[0] = cores[0] * c
    return TtTensor(cores)


def sum_elements(t: TtTensor) -> float:
    row = np.ones((1, 1), dtype=t.dtype)
    for core in t.cores:
        row = row @ core.sum(axis=1)
    return float(row[0, 0])


def dot(a: TtTensor, b: TtTensor) -> float:
    """Inner product sum(a * b) by contracting the two trains core by core."""
    _check_same_modes(a, b)
    carry = np.ones((1, 1), dtype=np.result_type(a.dtype, b.dtype))
    for ca, cb in zip(a.cores, b.cores):
        carry = np.einsum("ab,ajc,bjd->cd", carry, ca, cb, optimize=True)
    return float(carry[0, 0])


def dense_dot(t: TtTensor, a: np.ndarray) -> float:
    """Inner product of a TT-tensor with a dense array of the same shape."""
    a = np.asarray(a)
    if tuple(a.shape) != t.mode_sizes:
        raise DomainError(f"dense shape {a.shape} does not match mode sizes {t.mode_sizes}")
    # carry: (r_k, n_{k+1} * ... * n_d)
    carry = a.reshape(1, -1)
    for core in t.cores:
        r_prev, n, r_next = core.shape
        carry = carry.reshape(r_prev * n, -1)
        carry = core.reshape(r_prev * n, r_next).T @ carry
    return float(carry[0, 0])


def frobenius_norm(t: TtTensor) -> float:
    return math.sqrt(max(dot(t, t), 0.0))


def param_count(t: TtTensor) -> int:
    return sum(n * t.ranks[k] * t.ranks[k + 1] for k, n in enumerate(t.mode_sizes))
