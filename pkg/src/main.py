from __future__ import annotations

import logging
import uuid
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from src.core.errors import DomainError, TtNetError
from src.core.logging import configure_logging
from src.core.settings import Settings, get_settings
from src.data.checkpoint import checkpoint_to_network, load_checkpoint
from src.routers.health import router as health_router
from src.routers.model import router as model_router
from src.utils.deps import LoadedModel

logger = logging.getLogger(__name__)


def load_model(settings: Settings) -> LoadedModel | None:
    path = settings.checkpoint_file
    if path is None:
        logger.info("TTNET_CHECKPOINT_PATH not set; serving without a model")
        return None
    try:
        checkpoint = load_checkpoint(path)
        network = checkpoint_to_network(checkpoint)
    except TtNetError:
        logger.exception("could not load checkpoint %s", path)
        return None
    logger.info("loaded checkpoint %s with %d layers", path, len(network.layers))
    return LoadedModel(
        network=network, source=str(path), precision=np.dtype(checkpoint.precision).name
    )


@asynccontextmanager
async def lifespan(app: FastAPI):
    settings = get_settings()
    configure_logging(getattr(logging, settings.log_level.upper(), logging.INFO))

    app.state.settings = settings
    app.state.model = load_model(settings)
    yield


app = FastAPI(title="ttnet", version="0.1.0", lifespan=lifespan)


@app.middleware("http")
async def request_id_middleware(request: Request, call_next):
    settings: Settings = get_settings()
    request_id = request.headers.get(settings.request_id_header) or str(uuid.uuid4())
    request.state.request_id = request_id

    response = await call_next(request)
    response.headers[settings.request_id_header] = request_id
    return response


@app.exception_handler(DomainError)
async def domain_error_handler(request: Request, exc: DomainError) -> JSONResponse:
    return JSONResponse(status_code=422, content={"detail": exc.to_dict()})


@app.get("/")
def root() -> dict[str, str]:
    return {"service": "ttnet", "status": "ok"}


app.include_router(health_router)
app.include_router(model_router)
