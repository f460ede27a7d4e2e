from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from src.core.settings import get_settings
from main import app
from tests.support import FIXTURE_LABELS, FIXTURE_PIXELS, MNIST_FILES, write_idx


@pytest.fixture(autouse=True)
def _fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20150901)


@pytest.fixture
def idx_fixture(tmp_path: Path) -> dict[str, Path]:
    return {
        "images": write_idx(tmp_path / "images-idx3-ubyte", FIXTURE_PIXELS),
        "labels": write_idx(tmp_path / "labels-idx1-ubyte", FIXTURE_LABELS),
    }


@pytest.fixture
def mnist_dir() -> Path:
    raw = os.environ.get("TTNET_MNIST_DIR")
    if not raw:
        pytest.skip("TTNET_MNIST_DIR is not set")
    root = Path(raw)
    missing = [name for name in MNIST_FILES.values() if not (root / name).is_file()]
    if missing:
        pytest.skip(f"MNIST files missing from {root}: {', '.join(missing)}")
    return root


@pytest.fixture
def client_factory(monkeypatch: pytest.MonkeyPatch):
    def _factory(checkpoint: Path | None = None) -> TestClient:
        if checkpoint is None:
            monkeypatch.delenv("TTNET_CHECKPOINT_PATH", raising=False)
        else:
            monkeypatch.setenv("TTNET_CHECKPOINT_PATH", str(checkpoint))
        get_settings.cache_clear()
        return TestClient(app)

    return _factory
