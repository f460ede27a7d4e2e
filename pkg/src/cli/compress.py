from __future__ import annotations

import argparse
import logging
import math
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from src.cli.train import compression_fields
from src.core.errors import ConfigError, DomainError, FormatError
from src.core.settings import get_settings
from src.data.checkpoint import Checkpoint, save_checkpoint, tt_matrix_record
from src.schemas.config import RunConfig
from src.tt.matrix import (
    ShapePair,
    TtMatrix,
    compression_factor,
    matrix_from_dense,
    matrix_param_count,
    resolve_ranks,
    residual_norm,
    to_dense,
    tt_matrix_param_count,
)
from src.tt.truncation import TruncationPolicy

logger = logging.getLogger(__name__)


def _shape(args: argparse.Namespace) -> ShapePair:
    try:
        return ShapePair(row_modes=args.row_modes, col_modes=args.col_modes)
    except ValidationError as exc:
        raise DomainError(exc.errors()[0]["msg"]) from exc


def _policy(args: argparse.Namespace) -> TruncationPolicy:
    try:
        return TruncationPolicy(max_rank=args.rank, epsilon=args.eps)
    except ValidationError as exc:
        raise ConfigError("compress needs --rank and/or --eps", ["--rank", "--eps"]) from exc


def _load_matrix(args: argparse.Namespace, shape: ShapePair, seed: int) -> np.ndarray:
    if args.random:
        rng = np.random.default_rng(seed)
        return rng.standard_normal((shape.rows, shape.cols))
    path = Path(args.matrix)
    try:
        matrix = np.load(path, allow_pickle=False)
    except FileNotFoundError as exc:
        raise FormatError(f"matrix file not found: {path}") from exc
    except ValueError as exc:
        raise FormatError(f"{path} is not a readable .npy array: {exc}") from exc
    if matrix.ndim != 2:
        raise DomainError(f"{path} holds a {matrix.ndim}-D array, expected a matrix")
    return matrix.astype(np.float64, copy=False)


def relative_error(w: TtMatrix, matrix: np.ndarray, max_elements: int) -> float:
    norm = float(np.linalg.norm(matrix))
    if matrix.size <= max_elements:
        residual = float(np.linalg.norm(matrix - to_dense(w, max_elements)))
    else:
        residual = residual_norm(w, matrix)
    return residual / norm if norm > 0 else residual


def _report(shape: ShapePair, ranks: tuple[int, ...], params: int) -> None:
    print(f"shape={shape.rows}x{shape.cols}")
    print(f"ranks={','.join(str(r) for r in ranks)}")
    print(f"tt_params={params}")
    print(f"dense_params={shape.rows * shape.cols}")
    print(compression_fields(compression_factor(shape, ranks)))


def cmd_compress(args: argparse.Namespace, config: RunConfig) -> int:
    shape = _shape(args)
    if args.count_only:
        if args.rank is None:
            raise ConfigError("--count-only needs --rank", ["--rank"])
        ranks = resolve_ranks(shape, args.rank)
        _report(shape, ranks, tt_matrix_param_count(shape, ranks))
        return 0

    policy = _policy(args)
    matrix = _load_matrix(args, shape, config.seed)
    if matrix.shape != (shape.rows, shape.cols):
        raise DomainError(
            f"matrix is {matrix.shape[0]}x{matrix.shape[1]} but the modes give "
            f"{shape.rows}x{shape.cols}"
        )
    w = matrix_from_dense(matrix, shape, policy)
    _report(shape, w.ranks, matrix_param_count(w))
    error = relative_error(w, matrix, get_settings().materialize_cap)
    if not math.isfinite(error):
        raise DomainError("reconstruction error is not finite; does the matrix hold NaN/Inf?")
    print(f"rel_error={error:.6e}")

    if args.out:
        save_checkpoint(args.out, Checkpoint(layers=[tt_matrix_record(w)]))
        logger.info("wrote TT-matrix record to %s", args.out)
    return 0
