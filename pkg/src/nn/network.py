from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from src.core.errors import DomainError
from src.nn.layers import Layer


class Network:
    """Ordered stack of layers. Training swaps in new layer objects via ``set_parameters``."""

    def __init__(self, layers: Sequence[Layer]) -> None:
        self.layers: list[Layer] = list(layers)
        width: int | None = None
        for position, layer in enumerate(self.layers):
            if layer.in_dim is not None and width is not None and layer.in_dim != width:
                raise DomainError(
                    f"layer {position} ({layer.kind}) expects {layer.in_dim} inputs "
                    f"but receives {width}",
                    {"layer": position},
                )
            if layer.out_dim is not None:
                width = layer.out_dim

    @property
    def in_dim(self) -> int | None:
        for layer in self.layers:
            if layer.in_dim is not None:
                return layer.in_dim
        return None

    @property
    def out_dim(self) -> int | None:
        for layer in reversed(self.layers):
            if layer.out_dim is not None:
                return layer.out_dim
        return None

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.parameters()]

    def set_parameters(self, params: Sequence[np.ndarray]) -> None:
        offset = 0
        layers = []
        for layer in self.layers:
            count = len(layer.parameters())
            layers.append(layer.with_parameters(params[offset : offset + count]))
            offset += count
        if offset != len(params):
            raise DomainError(f"network takes {offset} parameter arrays, got {len(params)}")
        self.layers = layers


@dataclass(frozen=True)
class ForwardTrace:
    inputs: list[np.ndarray]
    logits: np.ndarray


def network_forward(net: Network, x: np.ndarray) -> ForwardTrace:
    x = np.asarray(x)
    if x.ndim != 2:
        raise DomainError(f"network input must be a (features, batch) block, got {x.shape}")
    if net.in_dim is not None and x.shape[0] != net.in_dim:
        raise DomainError(
            f"network expects {net.in_dim} input features, got {x.shape[0]}",
            {"expected": net.in_dim, "got": int(x.shape[0])},
        )
    inputs = []
    current = x
    for layer in net.layers:
        inputs.append(current)
        current = layer.forward(current)
    return ForwardTrace(inputs=inputs, logits=current)


def network_backward(
    net: Network, trace: ForwardTrace, dlogits: np.ndarray
) -> tuple[list[np.ndarray], np.ndarray]:
    """Parameter gradients (aligned with ``net.parameters()``) and the input gradient."""
    grads_per_layer: list[list[np.ndarray]] = []
    upstream = dlogits
    for layer, x in zip(reversed(net.layers), reversed(trace.inputs)):
        upstream, grads = layer.backward(x, upstream)
        grads_per_layer.append(grads)
    flat = [g for grads in reversed(grads_per_layer) for g in grads]
    return flat, upstream


def softmax_xent(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. the (classes, batch) logits."""
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    classes, batch = logits.shape
    if labels.shape != (batch,):
        raise DomainError(f"expected {batch} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise DomainError(
            f"labels must lie in [0, {classes}), got range [{labels.min()}, {labels.max()}]"
        )
    shifted = logits - logits.max(axis=0, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=0, keepdims=True))
    log_probs = shifted - log_norm
    columns = np.arange(batch)
    loss = float(-log_probs[labels, columns].mean())
    dlogits = np.exp(log_probs)
    dlogits[labels, columns] -= 1.0
    return loss, dlogits / batch


def predict(net: Network, x: np.ndarray) -> np.ndarray:
    """Argmax class per column; ties go to the lowest class index."""
    return np.argmax(network_forward(net, x).logits, axis=0)


def network_param_count(net: Network) -> int:
    return sum(layer.param_count() for layer in net.layers)


def network_dense_param_count(net: Network) -> int:
    return sum(layer.dense_param_count() for layer in net.layers)


def network_compression(net: Network) -> Fraction:
    """Dense-equivalent parameter count over the actual one."""
    actual = network_param_count(net)
    if actual == 0:
        return Fraction(1)
    return Fraction(network_dense_param_count(net), actual)
