"""Dense vs. TT forward timings.

Each configuration is run ``warmup`` times untimed, then ``reps`` times; the
median is reported. ``param_bytes`` is the weight storage, ``aux_bytes`` the
extra memory one forward call needs besides weights and input.
"""

from __future__ import annotations

import argparse
import csv
import logging
import statistics
import sys
import time
from collections.abc import Callable
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ValidationError

from src.core.errors import DomainError
from src.schemas.config import RunConfig
from src.tt.matrix import (
    ShapePair,
    matvec_batch,
    matvec_workspace_size,
    random_matrix,
    resolve_ranks,
    tt_matrix_param_count,
)

logger = logging.getLogger(__name__)

BENCH_HEADER = ["rows", "cols", "rank", "batch", "impl", "median_ms", "param_bytes", "aux_bytes"]
BENCH_FILE = "bench.csv"


class BenchRow(BaseModel):
    rows: int
    cols: int
    rank: int
    batch: int
    impl: str
    median_ms: float
    param_bytes: int
    aux_bytes: int

    def as_csv(self) -> list[str]:
        return [
            str(self.rows),
            str(self.cols),
            str(self.rank),
            str(self.batch),
            self.impl,
            f"{self.median_ms:.4f}",
            str(self.param_bytes),
            str(self.aux_bytes),
        ]


def median_ms(run: Callable[[], object], reps: int, warmup: int) -> float:
    if reps < 1:
        raise DomainError(f"reps must be >= 1, got {reps}")
    if warmup < 0:
        raise DomainError(f"warmup must be >= 0, got {warmup}")
    for _ in range(warmup):
        run()
    timings = []
    for _ in range(reps):
        started = time.perf_counter()
        run()
        timings.append((time.perf_counter() - started) * 1000.0)
    return statistics.median(timings)


def bench_tt(
    shape: ShapePair,
    rank: int,
    batch: int,
    reps: int,
    warmup: int,
    rng: np.random.Generator,
    dtype: np.dtype | type,
) -> BenchRow:
    itemsize = np.dtype(dtype).itemsize
    ranks = resolve_ranks(shape, rank)
    w = random_matrix(shape, ranks, rng).astype(dtype)
    x = rng.standard_normal((shape.cols, batch)).astype(dtype)
    return BenchRow(
        rows=shape.rows,
        cols=shape.cols,
        rank=rank,
        batch=batch,
        impl="tt",
        median_ms=median_ms(lambda: matvec_batch(w, x), reps, warmup),
        param_bytes=tt_matrix_param_count(shape, ranks) * itemsize,
        aux_bytes=matvec_workspace_size(shape, ranks, batch) * itemsize,
    )


def bench_dense(
    weight: np.ndarray, batch: int, reps: int, warmup: int, rng: np.random.Generator
) -> BenchRow:
    rows, cols = weight.shape
    itemsize = weight.dtype.itemsize
    x = rng.standard_normal((cols, batch)).astype(weight.dtype)
    return BenchRow(
        rows=rows,
        cols=cols,
        rank=0,
        batch=batch,
        impl="dense",
        median_ms=median_ms(lambda: weight @ x, reps, warmup),
        param_bytes=weight.size * itemsize,
        aux_bytes=rows * batch * itemsize,
    )


def cmd_bench(args: argparse.Namespace, config: RunConfig) -> int:
    try:
        shape = ShapePair(row_modes=args.row_modes, col_modes=args.col_modes)
    except ValidationError as exc:
        raise DomainError(exc.errors()[0]["msg"]) from exc
    if args.reps < 1:
        raise DomainError(f"--reps must be >= 1, got {args.reps}")
    if not args.ranks or not args.batch or min(args.batch) < 1 or min(args.ranks) < 1:
        raise DomainError("--ranks and --batch need positive entries")
    dtype = np.dtype(args.precision).type
    rng = np.random.default_rng(config.seed)

    weight = None
    if not args.no_dense:
        weight = rng.standard_normal((shape.rows, shape.cols), dtype=np.float32)
        weight = weight.astype(dtype, copy=False)

    rows: list[BenchRow] = []
    for batch in args.batch:
        if weight is not None:
            rows.append(bench_dense(weight, batch, args.reps, args.warmup, rng))
        for rank in args.ranks:
            rows.append(bench_tt(shape, rank, batch, args.reps, args.warmup, rng, dtype))
            logger.info("rank %d batch %d: %.3f ms", rank, batch, rows[-1].median_ms)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / BENCH_FILE).open("w", newline="", encoding="utf-8") as handle:
        for stream in (handle, sys.stdout):
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(BENCH_HEADER)
            writer.writerows(row.as_csv() for row in rows)
    return 0
