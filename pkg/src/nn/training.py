from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from pydantic import BaseModel

from src.core.errors import NonFiniteLossError
from src.data.dataset import DatasetSplit
from src.nn.network import Network, network_backward, network_forward, predict, softmax_xent
from src.nn.optim import SgdMomentumState, sgd_step

logger = logging.getLogger(__name__)


class EpochMetrics(BaseModel):
    train_loss: float
    train_err: float
    wall_s: float
    steps: int
    lr: float


def train_epoch(
    net: Network,
    data: DatasetSplit,
    state: SgdMomentumState,
    rng: np.random.Generator,
    batch_size: int = 100,
) -> EpochMetrics:
    """One pass over a fresh permutation of ``data``; mutates ``net`` and ``state``."""
    started = time.perf_counter()
    order = rng.permutation(len(data))
    total_loss = 0.0
    mistakes = 0
    steps = 0
    for start in range(0, len(order), batch_size):
        batch = order[start : start + batch_size]
        x = data.images[batch].T
        labels = data.labels[batch]

        trace = network_forward(net, x)
        loss, dlogits = softmax_xent(trace.logits, labels)
        if not math.isfinite(loss):
            raise NonFiniteLossError(
                f"loss became {loss} at step {state.step}", {"step": state.step}
            )
        grads, _ = network_backward(net, trace, dlogits)
        net.set_parameters(sgd_step(net.parameters(), grads, state))

        total_loss += loss * len(batch)
        mistakes += int(np.count_nonzero(np.argmax(trace.logits, axis=0) != labels))
        steps += 1

    count = max(len(data), 1)
    metrics = EpochMetrics(
        train_loss=total_loss / count,
        train_err=mistakes / count,
        wall_s=time.perf_counter() - started,
        steps=steps,
        lr=float(state.learning_rate),
    )
    logger.debug(
        "pass over %d samples: %d steps, loss=%.6f, %.2fs",
        len(data),
        steps,
        metrics.train_loss,
        metrics.wall_s,
    )
    return metrics


def _count_errors(net: Network, data: DatasetSplit, start: int, stop: int) -> int:
    predictions = predict(net, data.images[start:stop].T)
    return int(np.count_nonzero(predictions != data.labels[start:stop]))


def evaluate(net: Network, data: DatasetSplit, batch_size: int = 1000, threads: int = 1) -> float:
    """Fraction of misclassified samples; shards are reduced in a fixed order."""
    if len(data) == 0:
        return 0.0
    bounds = [(s, min(s + batch_size, len(data))) for s in range(0, len(data), batch_size)]
    if threads <= 1 or len(bounds) == 1:
        errors = sum(_count_errors(net, data, s, e) for s, e in bounds)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            errors = sum(pool.map(lambda b: _count_errors(net, data, *b), bounds))
    return errors / len(data)
