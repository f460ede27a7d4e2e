from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.errors import DomainError, ResourceError
from src.tt.matrix import (
    ShapePair,
    TtMatrix,
    compression_factor,
    identity_matrix,
    matrix_add,
    matrix_frobenius_norm,
    matrix_from_dense,
    matrix_param_count,
    matrix_round,
    matrix_scale,
    matvec,
    matvec_batch,
    matvec_workspace_size,
    random_matrix,
    residual_norm,
    rmatvec_batch,
    to_dense,
    transpose,
    tt_matrix_param_count,
    zeros_matrix,
)
from src.tt.truncation import TruncationPolicy

VGG_SHAPE = ShapePair(row_modes=(4, 4, 4, 4, 4, 4), col_modes=(2, 7, 8, 8, 7, 4))


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def test_shape_pair_validation() -> None:
    with pytest.raises(ValidationError):
        ShapePair(row_modes=(2, 2), col_modes=(2,))
    with pytest.raises(ValidationError):
        ShapePair(row_modes=(), col_modes=())
    with pytest.raises(ValidationError):
        ShapePair(row_modes=(2, 0), col_modes=(2, 2))
    shape = ShapePair(row_modes=(2, 3), col_modes=(4, 5))
    assert (shape.rows, shape.cols, shape.d) == (6, 20, 2)
    assert shape.fused_modes == (8, 15)


def test_core_shapes_are_checked() -> None:
    shape = ShapePair(row_modes=(2, 2), col_modes=(3, 3))
    with pytest.raises(DomainError):
        TtMatrix(shape, [np.ones((1, 2, 3, 2)), np.ones((1, 2, 3, 1))])
    with pytest.raises(DomainError):
        TtMatrix(shape, [np.ones((1, 2, 3, 1))])


# ---- dense conversion ------------------------------------------------------


def test_scalar_matrix_round_trip() -> None:
    shape = ShapePair(row_modes=(1,), col_modes=(1,))
    w = matrix_from_dense(np.array([[2.5]]), shape, TruncationPolicy.exact())
    assert w.ranks == (1, 1)
    assert to_dense(w)[0, 0] == 2.5


def test_kronecker_product_has_unit_rank(rng) -> None:
    a, b = rng.standard_normal((4, 4)), rng.standard_normal((4, 4))
    shape = ShapePair(row_modes=(4, 4), col_modes=(4, 4))
    dense = np.kron(a, b)
    w = matrix_from_dense(dense, shape, TruncationPolicy(epsilon=1e-12))
    assert w.ranks == (1, 1, 1)
    assert _rel(to_dense(w), dense) <= 1e-10
    # first factor is fastest, so the first core holds the right Kronecker factor
    direct = TtMatrix(shape, [b.reshape(1, 4, 4, 1), a.reshape(1, 4, 4, 1)])
    np.testing.assert_allclose(to_dense(direct), dense, rtol=1e-12, atol=1e-12)


def test_dense_round_trip_without_truncation(rng) -> None:
    dense = rng.standard_normal((8, 8))
    square = ShapePair(row_modes=(2, 4), col_modes=(2, 4))
    w = matrix_from_dense(dense, square, TruncationPolicy.exact())
    assert _rel(to_dense(w), dense) <= 1e-10

    rect = rng.standard_normal((12, 18))
    shape = ShapePair(row_modes=(2, 3, 2), col_modes=(3, 2, 3))
    assert _rel(to_dense(matrix_from_dense(rect, shape, TruncationPolicy.exact())), rect) <= 1e-10


def test_from_dense_rejects_shape_mismatch(rng) -> None:
    with pytest.raises(DomainError):
        matrix_from_dense(
            rng.standard_normal((6, 6)),
            ShapePair(row_modes=(2, 2), col_modes=(3, 2)),
            TruncationPolicy.exact(),
        )


def test_to_dense_identity_single_core_and_cap(rng) -> None:
    np.testing.assert_array_equal(to_dense(identity_matrix((2, 3, 2))), np.eye(12))
    core = rng.standard_normal((1, 3, 5, 1))
    w = TtMatrix(ShapePair(row_modes=(3,), col_modes=(5,)), [core])
    np.testing.assert_array_equal(to_dense(w), core[0, :, :, 0])
    with pytest.raises(ResourceError):
        to_dense(identity_matrix((10, 10)), max_elements=9999)


# ---- products --------------------------------------------------------------


def test_identity_and_zero_matvec(rng) -> None:
    x = rng.standard_normal(12)
    np.testing.assert_allclose(matvec(identity_matrix((2, 3, 2)), x), x)
    zero = zeros_matrix(ShapePair(row_modes=(2, 2), col_modes=(3, 4)))
    np.testing.assert_array_equal(matvec(zero, x), np.zeros(4))


def test_matvec_matches_dense(rng) -> None:
    shape = ShapePair(row_modes=(2, 3, 2), col_modes=(3, 2, 4))
    w = random_matrix(shape, (1, 2, 3, 1), rng)
    x = rng.standard_normal(shape.cols)
    assert _rel(matvec(w, x), to_dense(w) @ x) <= 1e-10


def test_matvec_batch_cases(rng) -> None:
    shape = ShapePair(row_modes=(2, 3, 2), col_modes=(3, 2, 4))
    w = random_matrix(shape, (1, 2, 3, 1), rng)
    dense = to_dense(w)
    x = rng.standard_normal((shape.cols, 1))
    np.testing.assert_allclose(matvec_batch(w, x)[:, 0], matvec(w, x[:, 0]), rtol=1e-12)
    block = rng.standard_normal((shape.cols, 4))
    assert _rel(matvec_batch(w, block), dense @ block) <= 1e-10
    duplicated = np.repeat(block[:, :1], 3, axis=1)
    out = matvec_batch(w, duplicated)
    np.testing.assert_array_equal(out[:, 0], out[:, 1])
    np.testing.assert_array_equal(out[:, 0], out[:, 2])


def test_matvec_rejects_wrong_length(rng) -> None:
    w = identity_matrix((2, 2))
    with pytest.raises(DomainError):
        matvec(w, np.ones(5))
    with pytest.raises(DomainError):
        matvec_batch(w, np.ones((5, 2)))


def test_matvec_oracle_on_random_instances(rng) -> None:
    for _ in range(200):
        d = int(rng.integers(1, 5))
        row_modes = tuple(int(m) for m in rng.integers(1, 5, size=d))
        col_modes = tuple(int(n) for n in rng.integers(1, 5, size=d))
        shape = ShapePair(row_modes=row_modes, col_modes=col_modes)
        ranks = (1,) + tuple(int(r) for r in rng.integers(1, 4, size=d - 1)) + (1,)
        w = random_matrix(shape, ranks, rng)
        xs = rng.standard_normal((shape.cols, int(rng.integers(1, 4))))
        expected = to_dense(w) @ xs
        got = matvec_batch(w, xs)
        scale = max(float(np.max(np.abs(expected))), 1e-300)
        assert float(np.max(np.abs(got - expected))) / scale <= 1e-10


def test_transpose(rng) -> None:
    shape = ShapePair(row_modes=(2, 3), col_modes=(4, 2))
    w = random_matrix(shape, 2, rng)
    back = transpose(transpose(w))
    for original, twice in zip(w.cores, back.cores):
        np.testing.assert_array_equal(original, twice)
    np.testing.assert_allclose(to_dense(transpose(w)), to_dense(w).T, rtol=1e-12)

    sym = rng.standard_normal((9, 9))
    sym = sym + sym.T
    square = ShapePair(row_modes=(3, 3), col_modes=(3, 3))
    ws = matrix_from_dense(sym, square, TruncationPolicy.exact())
    assert _rel(to_dense(transpose(ws)), sym) <= 1e-10
    np.testing.assert_array_equal(to_dense(transpose(identity_matrix((2, 2)))), np.eye(4))


def test_rmatvec_batch(rng) -> None:
    shape = ShapePair(row_modes=(2, 3), col_modes=(4, 2))
    w = random_matrix(shape, 3, rng)
    ys = rng.standard_normal((shape.rows, 2))
    assert _rel(rmatvec_batch(w, ys), to_dense(w).T @ ys) <= 1e-10


# ---- counting --------------------------------------------------------------


def test_param_count_of_known_layer_shapes() -> None:
    assert tt_matrix_param_count(VGG_SHAPE, 2) == 528
    cifar = ShapePair(row_modes=(5, 5, 5, 5, 5), col_modes=(4, 4, 4, 4, 4))
    assert tt_matrix_param_count(cifar, 8) == 4160
    assert tt_matrix_param_count(ShapePair(row_modes=(3,), col_modes=(7,)), 5) == 21


def test_compression_factor() -> None:
    factor = compression_factor(VGG_SHAPE, 2)
    assert VGG_SHAPE.rows * VGG_SHAPE.cols == 102_760_448
    assert factor == Fraction(102_760_448, 528)
    assert int(factor) == 194_622
    assert compression_factor(ShapePair(row_modes=(3,), col_modes=(7,)), 1) == 1


def test_compression_factor_mnist_layer_matches_stored_scalars(rng) -> None:
    shape = ShapePair(row_modes=(4,) * 5, col_modes=(4,) * 5)
    w = random_matrix(shape, 8, rng)
    stored = sum(core.size for core in w.cores)
    assert matrix_param_count(w) == stored
    assert compression_factor(shape, 8) == Fraction(1024 * 1024, stored)


def test_workspace_size_grows_linearly_in_rank_for_fixed_shape() -> None:
    shape = ShapePair(row_modes=(4,) * 5, col_modes=(4,) * 5)
    sizes = [matvec_workspace_size(shape, r) for r in (1, 2, 4, 8)]
    assert sizes == sorted(sizes)
    assert sizes[-1] <= 3 * 8 * max(shape.rows, shape.cols)


# ---- algebra ---------------------------------------------------------------


def test_matrix_algebra_matches_dense(rng) -> None:
    shape = ShapePair(row_modes=(2, 3), col_modes=(3, 2))
    a, b = random_matrix(shape, 2, rng), random_matrix(shape, 3, rng)
    da, db = to_dense(a), to_dense(b)
    total = matrix_add(a, b)
    assert total.ranks == (1, 5, 1)
    np.testing.assert_allclose(to_dense(total), da + db, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(to_dense(matrix_scale(a, -2.0)), -2.0 * da, rtol=1e-12)
    assert matrix_frobenius_norm(a) == pytest.approx(np.linalg.norm(da), rel=1e-10)
    rounded = matrix_round(matrix_add(a, a), TruncationPolicy(epsilon=1e-12))
    assert rounded.ranks == a.ranks
    np.testing.assert_allclose(to_dense(rounded), 2 * da, rtol=1e-9, atol=1e-12)


def test_matrix_add_rejects_mismatched_shapes(rng) -> None:
    a = random_matrix(ShapePair(row_modes=(2, 3), col_modes=(3, 2)), 2, rng)
    b = random_matrix(ShapePair(row_modes=(3, 2), col_modes=(3, 2)), 2, rng)
    with pytest.raises(DomainError):
        matrix_add(a, b)


def test_residual_norm_without_materializing(rng) -> None:
    shape = ShapePair(row_modes=(2, 3), col_modes=(3, 4))
    dense = rng.standard_normal((shape.rows, shape.cols))
    w = matrix_from_dense(dense, shape, TruncationPolicy(max_rank=1))
    expected = np.linalg.norm(dense - to_dense(w))
    assert residual_norm(w, dense) == pytest.approx(expected, rel=1e-6)
