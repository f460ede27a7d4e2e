from __future__ import annotations

import logging

import numpy as np
from pydantic import ValidationError

from src.core.errors import ConfigError, DomainError
from src.nn.layers import DenseLayer, Layer, MatrixRankBottleneck, ReLU
from src.nn.network import Network
from src.nn.tt_layer import SigmaRule, init_gaussian
from src.schemas.config import (
    DenseLayerSpec,
    LayerSpec,
    NetworkConfig,
    RankLayerSpec,
    TtLayerSpec,
)
from src.tt.matrix import ShapePair, resolve_ranks

logger = logging.getLogger(__name__)

FIXED_SIGMA = 0.02


def _spec_dims(spec: LayerSpec, path: str) -> tuple[int | None, int | None]:
    if isinstance(spec, TtLayerSpec):
        try:
            shape = ShapePair(row_modes=spec.row_modes, col_modes=spec.col_modes)
        except ValidationError as exc:
            raise ConfigError(
                f"{path}: {exc.errors()[0]['msg']}", [f"{path}.row_modes", f"{path}.col_modes"]
            ) from exc
        try:
            resolve_ranks(shape, spec.ranks)
        except DomainError as exc:
            raise ConfigError(f"{path}.ranks: {exc.message}", [f"{path}.ranks"]) from exc
        return shape.cols, shape.rows
    if isinstance(spec, (DenseLayerSpec, RankLayerSpec)):
        return spec.in_dim, spec.out_dim
    return None, None


def check_network_config(
    config: NetworkConfig, input_dim: int | None = None, num_classes: int | None = None
) -> None:
    """Raise ``ConfigError`` unless the layer list chains from ``input_dim`` to ``num_classes``."""
    width = input_dim
    last_path = None
    for index, spec in enumerate(config.layers):
        path = f"network.layers.{index}"
        in_dim, out_dim = _spec_dims(spec, path)
        if in_dim is not None and width is not None and in_dim != width:
            field = "col_modes" if isinstance(spec, TtLayerSpec) else "in_dim"
            source = "the data" if last_path is None else last_path
            raise ConfigError(
                f"{path} takes {in_dim} inputs but {source} provides {width}",
                [f"{path}.{field}"],
            )
        if out_dim is not None:
            width = out_dim
            last_path = path
    if num_classes is not None and width is not None and width < num_classes:
        raise ConfigError(
            f"the network emits {width} logits but the labels need {num_classes} classes",
            [f"{last_path}.out_dim" if last_path else "network.layers"],
        )


def build_layer(spec: LayerSpec, rng: np.random.Generator, dtype: np.dtype | type) -> Layer:
    if isinstance(spec, TtLayerSpec):
        shape = ShapePair(row_modes=spec.row_modes, col_modes=spec.col_modes)
        rule = SigmaRule(kind=spec.init, sigma=spec.sigma, target_variance=spec.target_variance)
        return init_gaussian(shape, spec.ranks, rule, rng, dtype)
    sigma = getattr(spec, "sigma", None)
    if getattr(spec, "init", "scaled") == "fixed" and sigma is None:
        sigma = FIXED_SIGMA
    if isinstance(spec, DenseLayerSpec):
        return DenseLayer.init_gaussian(spec.in_dim, spec.out_dim, rng, sigma, dtype)
    if isinstance(spec, RankLayerSpec):
        return MatrixRankBottleneck.init_gaussian(
            spec.in_dim, spec.out_dim, spec.rank, rng, sigma, dtype
        )
    return ReLU()


def build_network(
    config: NetworkConfig,
    rng: np.random.Generator,
    dtype: np.dtype | type = np.float64,
    input_dim: int | None = None,
    num_classes: int | None = None,
) -> Network:
    check_network_config(config, input_dim, num_classes)
    net = Network([build_layer(spec, rng, dtype) for spec in config.layers])
    logger.debug("built network with %d layers", len(net.layers))
    return net
