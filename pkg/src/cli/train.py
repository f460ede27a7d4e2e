from __future__ import annotations

import csv
import logging
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from src.cli.config_file import dump_flat
from src.core.errors import ConfigError, NonFiniteLossError
from src.data.checkpoint import network_to_checkpoint, save_checkpoint
from src.data.dataset import DatasetSplit, load_split
from src.nn.builder import build_network
from src.nn.network import (
    Network,
    network_compression,
    network_dense_param_count,
    network_param_count,
)
from src.nn.optim import LearningRateSchedule, SgdMomentumState
from src.nn.training import EpochMetrics, evaluate, train_epoch
from src.schemas.config import DataConfig, RunConfig

logger = logging.getLogger(__name__)

METRICS_HEADER = ["epoch", "step", "train_loss", "train_err", "test_err", "lr", "wall_s"]
METRICS_FILE = "metrics.csv"
CHECKPOINT_FILE = "model.ttnet"
RESOLVED_CONFIG_FILE = "resolved_config.txt"


def require_path(data: DataConfig, field: str) -> Path:
    path = getattr(data, field)
    if path is None:
        raise ConfigError(f"data.{field} is not set", [f"data.{field}"])
    if not Path(path).is_file():
        raise ConfigError(f"data.{field} does not exist: {path}", [f"data.{field}"])
    return Path(path)


def load_test_split(config: RunConfig, dtype: np.dtype | type) -> DatasetSplit:
    data = config.data
    split = load_split(
        require_path(data, "test_images"), require_path(data, "test_labels"), data.resize
    )
    return split.astype(dtype)


def format_fraction(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def compression_fields(value: Fraction) -> str:
    """Exact ratio and its floor, e.g. ``compression=6422528/33 compression_floor=194622``."""
    return f"compression={format_fraction(value)} compression_floor={math.floor(value)}"


def print_parameter_report(net: Network) -> None:
    for position, layer in enumerate(net.layers):
        if not layer.parameters():
            continue
        print(
            f"layer {position} {layer.kind}: params={layer.param_count()} "
            f"dense_equivalent={layer.dense_param_count()}"
        )
    print(
        f"total_params={network_param_count(net)} "
        f"dense_equivalent_params={network_dense_param_count(net)} "
        f"{compression_fields(network_compression(net))}"
    )


def _metrics_row(epoch: int, step: int, metrics: EpochMetrics, test_err: float) -> list[str]:
    return [
        str(epoch),
        str(step),
        f"{metrics.train_loss:.10g}",
        f"{metrics.train_err:.6f}",
        f"{test_err:.6f}",
        f"{metrics.lr:.10g}",
        f"{metrics.wall_s:.3f}",
    ]


def cmd_train(config: RunConfig) -> int:
    dtype = np.dtype(config.precision).type
    data = config.data
    train = load_split(
        require_path(data, "train_images"), require_path(data, "train_labels"), data.resize
    ).astype(dtype)
    if data.limit is not None:
        train = train.head(data.limit)
    test = load_test_split(config, dtype)

    num_classes = int(max(train.labels.max(initial=0), test.labels.max(initial=0))) + 1
    rng = np.random.default_rng(config.seed)
    net = build_network(
        config.network, rng, dtype, input_dim=train.features, num_classes=num_classes
    )
    print_parameter_report(net)

    optimizer = config.optimizer
    state = SgdMomentumState.for_parameters(
        net.parameters(),
        LearningRateSchedule(
            base_lr=optimizer.lr,
            decay_factor=optimizer.lr_decay_factor,
            decay_epochs=tuple(optimizer.lr_decay_epochs),
        ),
        momentum=optimizer.momentum,
        weight_decay=optimizer.weight_decay,
    )

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = dump_flat(config)
    (out_dir / RESOLVED_CONFIG_FILE).write_text(resolved, encoding="utf-8")

    with (out_dir / METRICS_FILE).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for epoch in range(config.epochs):
            lr = state.start_epoch(epoch)
            metrics = train_epoch(net, train, state, rng, batch_size=config.batch_size)
            test_err = evaluate(
                net, test, batch_size=config.eval_batch_size, threads=max(config.threads, 1)
            )
            if not math.isfinite(metrics.train_loss):
                raise NonFiniteLossError(f"epoch {epoch} mean loss is {metrics.train_loss}")
            writer.writerow(_metrics_row(epoch, state.step, metrics, test_err))
            handle.flush()
            logger.info(
                "epoch %d loss=%.6f train_err=%.4f test_err=%.4f lr=%g wall=%.1fs",
                epoch,
                metrics.train_loss,
                metrics.train_err,
                test_err,
                lr,
                metrics.wall_s,
            )

    save_checkpoint(
        out_dir / CHECKPOINT_FILE, network_to_checkpoint(net, state, config_text=resolved)
    )
    print(f"test_err={test_err:.6f}")
    return 0
