from __future__ import annotations

import argparse
import logging

import numpy as np
from pydantic import ValidationError

from src.core.errors import DomainError
from src.nn.gradcheck import GradcheckReport, layer_gradcheck, network_gradcheck
from src.nn.layers import DenseLayer, Layer, ReLU
from src.nn.network import Network
from src.nn.tt_layer import SigmaRule, init_gaussian
from src.schemas.config import RunConfig
from src.tt.matrix import ShapePair

logger = logging.getLogger(__name__)

LAYER_TOLERANCE = 1e-6
NETWORK_TOLERANCE = 1e-5
NETWORK_MODES = (4, 4)
NETWORK_CLASSES = 4


def _random_bias(layer: Layer, rng: np.random.Generator) -> Layer:
    params = layer.parameters()
    params[-1] = rng.standard_normal(params[-1].shape)
    return layer.with_parameters(params)


def tiny_network(
    rng: np.random.Generator, batch: int = 3
) -> tuple[Network, np.ndarray, np.ndarray]:
    """TT 16->16 (ranks 2), ReLU, dense 16->4 with a random input batch and labels."""
    shape = ShapePair(row_modes=NETWORK_MODES, col_modes=NETWORK_MODES)
    tt_layer = _random_bias(init_gaussian(shape, 2, SigmaRule(kind="fixed", sigma=0.5), rng), rng)
    dense = _random_bias(DenseLayer.init_gaussian(shape.rows, NETWORK_CLASSES, rng), rng)
    net = Network([tt_layer, ReLU(), dense])
    x = rng.standard_normal((shape.cols, batch))
    labels = rng.integers(0, NETWORK_CLASSES, size=batch)
    return net, x, labels


def run_layer_check(args: argparse.Namespace, rng: np.random.Generator) -> GradcheckReport:
    try:
        shape = ShapePair(row_modes=args.row_modes, col_modes=args.col_modes)
    except ValidationError as exc:
        raise DomainError(exc.errors()[0]["msg"]) from exc
    if args.batch < 1:
        raise DomainError(f"--batch must be >= 1, got {args.batch}")
    layer = _random_bias(
        init_gaussian(shape, args.rank, SigmaRule(kind="fixed", sigma=0.5), rng), rng
    )
    x = rng.standard_normal((shape.cols, args.batch))
    upstream = (
        np.zeros((shape.rows, args.batch))
        if args.zero_upstream
        else rng.standard_normal((shape.rows, args.batch))
    )
    return layer_gradcheck(layer, x, upstream, step=args.step, analytic_offset=args.perturb)


def cmd_gradcheck(args: argparse.Namespace, config: RunConfig) -> int:
    rng = np.random.default_rng(config.seed)
    if args.network:
        net, x, labels = tiny_network(rng, args.batch)
        report = network_gradcheck(net, x, labels, step=args.step)
        tolerance = args.tolerance if args.tolerance is not None else NETWORK_TOLERANCE
    else:
        report = run_layer_check(args, rng)
        tolerance = args.tolerance if args.tolerance is not None else LAYER_TOLERANCE

    for name, deviation in report.deviations.items():
        print(f"{name}={deviation:.3e}")
    print(f"checked_entries={report.checked_entries}")
    print(f"max_rel_deviation={report.max_deviation:.3e}")
    passed = report.passed(tolerance)
    print(f"result={'pass' if passed else 'fail'} tolerance={tolerance:g}")
    if not passed:
        logger.warning("gradient check failed: %.3e > %g", report.max_deviation, tolerance)
    return 0 if passed else 1
