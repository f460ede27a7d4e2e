from __future__ import annotations

import argparse
import os

import uvicorn

from src.core.settings import get_settings


def cmd_serve(args: argparse.Namespace) -> int:
    if args.checkpoint:
        os.environ["TTNET_CHECKPOINT_PATH"] = args.checkpoint
        get_settings.cache_clear()
    settings = get_settings()
    uvicorn.run(
        "src.main:app",
        host=args.host or settings.host,
        port=args.port or settings.port,
        log_level=settings.log_level.lower(),
    )
    return 0
