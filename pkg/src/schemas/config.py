from __future__ import annotations

from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field

InitRule = Literal["scaled", "fixed"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TtLayerSpec(_Strict):
    kind: Literal["tt"] = "tt"
    row_modes: tuple[int, ...]
    col_modes: tuple[int, ...]
    ranks: int | list[int] = 8
    init: InitRule = "scaled"
    sigma: float = Field(default=0.02, ge=0.0)
    target_variance: float = Field(default=1.0, gt=0.0)


class DenseLayerSpec(_Strict):
    kind: Literal["dense"] = "dense"
    in_dim: int = Field(ge=1)
    out_dim: int = Field(ge=1)
    init: InitRule = "scaled"
    sigma: float | None = Field(default=None, ge=0.0)


class RankLayerSpec(_Strict):
    kind: Literal["rank"] = "rank"
    in_dim: int = Field(ge=1)
    out_dim: int = Field(ge=1)
    rank: int = Field(ge=1)
    init: InitRule = "scaled"
    sigma: float | None = Field(default=None, ge=0.0)


class ReluLayerSpec(_Strict):
    kind: Literal["relu"] = "relu"


LayerSpec = Annotated[
    Union[TtLayerSpec, DenseLayerSpec, RankLayerSpec, ReluLayerSpec],
    Field(discriminator="kind"),
]
LAYER_KINDS = ("tt", "dense", "rank", "relu")


def _default_layers() -> list[LayerSpec]:
    return [
        TtLayerSpec(row_modes=(4, 4, 4, 4, 4), col_modes=(4, 4, 4, 4, 4), ranks=8),
        ReluLayerSpec(),
        DenseLayerSpec(in_dim=1024, out_dim=10),
    ]


class NetworkConfig(_Strict):
    layers: list[LayerSpec] = Field(default_factory=_default_layers, min_length=1)


class DataConfig(_Strict):
    train_images: Path | None = None
    train_labels: Path | None = None
    test_images: Path | None = None
    test_labels: Path | None = None
    resize: Literal["pad", "bilinear", "none"] = "pad"
    limit: int | None = Field(default=None, ge=1)


class OptimizerConfig(_Strict):
    lr: float = Field(default=0.01, ge=0.0)
    momentum: float = Field(default=0.9, ge=0.0, lt=1.0)
    weight_decay: float = Field(default=0.0005, ge=0.0)
    lr_decay_factor: float = Field(default=1.0, gt=0.0)
    lr_decay_epochs: list[int] = Field(default_factory=list)
    # Written to resolved_config.txt; only the velocity form is implemented.
    momentum_convention: Literal["velocity"] = "velocity"


class RunConfig(_Strict):
    seed: int = 0
    epochs: int = Field(default=1, ge=1)
    batch_size: int = Field(default=100, ge=1)
    eval_batch_size: int = Field(default=1000, ge=1)
    threads: int = Field(default=0, ge=0)
    out_dir: Path = Path("runs/latest")
    precision: Literal["float64", "float32"] = "float64"
    data: DataConfig = Field(default_factory=DataConfig)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
