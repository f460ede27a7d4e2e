from __future__ import annotations

from dataclasses import dataclass

from fastapi import HTTPException, Request

from src.core.settings import Settings
from src.nn.network import Network


@dataclass(frozen=True)
class LoadedModel:
    network: Network
    source: str
    precision: str


def get_settings(request: Request) -> Settings:
    return request.app.state.settings


def get_model(request: Request) -> LoadedModel:
    model = getattr(request.app.state, "model", None)
    if model is None:
        raise HTTPException(status_code=503, detail="no model loaded; set TTNET_CHECKPOINT_PATH")
    return model
