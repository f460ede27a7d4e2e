from __future__ import annotations

import numpy as np
from fastapi import APIRouter, Depends, HTTPException
from scipy.special import softmax

from src.core.errors import DomainError
from src.nn.network import (
    network_compression,
    network_dense_param_count,
    network_forward,
    network_param_count,
)
from src.schemas.model import (
    LayerSummarySchema,
    ModelSummarySchema,
    PredictRequest,
    PredictResponse,
)
from src.utils.deps import LoadedModel, get_model

router = APIRouter(tags=["model"])


@router.get("/model", response_model=ModelSummarySchema)
def describe_model(model: LoadedModel = Depends(get_model)) -> ModelSummarySchema:
    net = model.network
    return ModelSummarySchema(
        source=model.source,
        precision=model.precision,
        input_dim=net.in_dim,
        output_dim=net.out_dim,
        params=network_param_count(net),
        dense_params=network_dense_param_count(net),
        compression=float(network_compression(net)),
        layers=[LayerSummarySchema(**layer.summary()) for layer in net.layers],
    )


@router.post("/predict", response_model=PredictResponse)
def predict(payload: PredictRequest, model: LoadedModel = Depends(get_model)) -> PredictResponse:
    widths = {len(row) for row in payload.inputs}
    if len(widths) != 1:
        raise HTTPException(status_code=422, detail="all input rows must have the same length")
    x = np.asarray(payload.inputs, dtype=model.precision).T
    if not np.all(np.isfinite(x)):
        raise DomainError("inputs must be finite")
    logits = network_forward(model.network, x).logits
    probabilities = softmax(logits.astype(np.float64), axis=0)
    return PredictResponse(
        labels=[int(label) for label in np.argmax(logits, axis=0)],
        probabilities=probabilities.T.tolist(),
    )
