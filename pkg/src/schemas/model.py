from __future__ import annotations

from pydantic import BaseModel, Field


class LayerSummarySchema(BaseModel):
    kind: str
    in_dim: int | None = None
    out_dim: int | None = None
    params: int
    dense_params: int
    rank: int | None = None
    row_modes: list[int] | None = None
    col_modes: list[int] | None = None
    ranks: list[int] | None = None


class ModelSummarySchema(BaseModel):
    source: str
    precision: str
    input_dim: int | None = None
    output_dim: int | None = None
    params: int
    dense_params: int
    compression: float
    layers: list[LayerSummarySchema] = Field(default_factory=list)


class PredictRequest(BaseModel):
    """Flattened inputs, one row per sample, already preprocessed (e.g. padded to 32x32)."""

    inputs: list[list[float]] = Field(min_length=1)


class PredictResponse(BaseModel):
    labels: list[int]
    probabilities: list[list[float]]
