"""Central finite-difference checks of analytic gradients."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
from pydantic import BaseModel

from src.nn.network import Network, network_backward, network_forward, softmax_xent
from src.nn.tt_layer import TtLayer, backward


class GradcheckReport(BaseModel):
    deviations: dict[str, float]
    checked_entries: int

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values(), default=0.0)

    def passed(self, tolerance: float) -> bool:
        return self.max_deviation <= tolerance


def relative_deviation(numeric: np.ndarray, analytic: np.ndarray) -> float:
    if numeric.size == 0:
        return 0.0
    scale = np.maximum(1.0, np.abs(analytic))
    return float(np.max(np.abs(numeric - analytic) / scale))


def _central_differences(
    loss: Callable[[np.ndarray], float], point: np.ndarray, step: float
) -> np.ndarray:
    grad = np.zeros(point.shape, dtype=np.float64)
    probe = np.array(point, dtype=np.float64, copy=True)
    for idx in np.ndindex(point.shape):
        original = probe[idx]
        probe[idx] = original + step
        upper = loss(probe)
        probe[idx] = original - step
        lower = loss(probe)
        probe[idx] = original
        grad[idx] = (upper - lower) / (2.0 * step)
    return grad


def layer_gradcheck(
    layer: TtLayer,
    x: np.ndarray,
    upstream: np.ndarray,
    step: float = 1e-5,
    analytic_offset: float = 0.0,
) -> GradcheckReport:
    """Check every core, bias and input gradient for L = sum(upstream * layer(x)).

    ``analytic_offset`` is added to the analytic core gradients; a nonzero value
    must make the check fail.
    """
    grads = backward(layer, x, upstream)
    params = layer.parameters()
    deviations: dict[str, float] = {}
    checked = 0

    def loss_with(position: int) -> Callable[[np.ndarray], float]:
        def _loss(value: np.ndarray) -> float:
            swapped = list(params)
            swapped[position] = value
            return float(np.sum(upstream * layer.with_parameters(swapped).forward(x)))

        return _loss

    core_dev = 0.0
    for k, analytic in enumerate(grads.core_grads):
        numeric = _central_differences(loss_with(k), params[k], step)
        core_dev = max(core_dev, relative_deviation(numeric, analytic + analytic_offset))
        checked += numeric.size
    deviations["cores"] = core_dev

    numeric_bias = _central_differences(loss_with(len(params) - 1), params[-1], step)
    deviations["bias"] = relative_deviation(numeric_bias, grads.bias_grad)
    checked += numeric_bias.size

    numeric_input = _central_differences(
        lambda value: float(np.sum(upstream * layer.forward(value))), x, step
    )
    deviations["input"] = relative_deviation(numeric_input, grads.input_grad)
    checked += numeric_input.size
    return GradcheckReport(deviations=deviations, checked_entries=checked)


def network_gradcheck(
    net: Network, x: np.ndarray, labels: np.ndarray, step: float = 1e-5
) -> GradcheckReport:
    """Check every parameter and the input gradient of the mean cross-entropy."""
    trace = network_forward(net, x)
    _, dlogits = softmax_xent(trace.logits, labels)
    grads, input_grad = network_backward(net, trace, dlogits)
    params = net.parameters()

    def loss_at(position: int) -> Callable[[np.ndarray], float]:
        def _loss(value: np.ndarray) -> float:
            swapped = list(params)
            swapped[position] = value
            probe = Network(net.layers)
            probe.set_parameters(swapped)
            return softmax_xent(network_forward(probe, x).logits, labels)[0]

        return _loss

    deviations: dict[str, float] = {}
    checked = 0
    for position, analytic in enumerate(grads):
        numeric = _central_differences(loss_at(position), params[position], step)
        deviations[f"param_{position}"] = relative_deviation(numeric, analytic)
        checked += numeric.size

    numeric_input = _central_differences(
        lambda value: softmax_xent(network_forward(net, value).logits, labels)[0], x, step
    )
    deviations["input"] = relative_deviation(numeric_input, input_grad)
    checked += numeric_input.size
    return GradcheckReport(deviations=deviations, checked_entries=checked)
