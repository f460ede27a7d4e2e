from __future__ import annotations

import csv
import os
from pathlib import Path

import pytest

from src.cli.main import EXIT_INVALID, EXIT_OK, THREAD_ENV_VARS, main
from src.cli.train import CHECKPOINT_FILE, METRICS_FILE, METRICS_HEADER, RESOLVED_CONFIG_FILE
from src.data.checkpoint import (
    Checkpoint,
    LayerKind,
    LayerRecord,
    checkpoint_to_network,
    load_checkpoint,
    save_checkpoint,
)

TINY_NETWORK = """
data.resize = none
eval_batch_size = 1
batch_size = 1
epochs = 3
network.layers.0.kind = tt
network.layers.0.row_modes = 2,2
network.layers.0.col_modes = 2,2
network.layers.0.ranks = 2
network.layers.1.kind = relu
network.layers.2.kind = dense
network.layers.2.in_dim = 4
network.layers.2.out_dim = 10
"""


@pytest.fixture
def run_config(tmp_path: Path, idx_fixture) -> Path:
    # the two-image fixture serves as both train and test split
    data = "".join(
        f"data.{split}_{kind} = {idx_fixture[kind]}\n"
        for split in ("train", "test")
        for kind in ("images", "labels")
    )
    path = tmp_path / "run.txt"
    path.write_text(TINY_NETWORK + data, encoding="utf-8")
    return path


def _rows(path: Path) -> list[list[str]]:
    with path.open(newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


def _last_line(text: str, prefix: str) -> str:
    return [line for line in text.splitlines() if line.startswith(prefix)][-1]


def test_train_writes_metrics_checkpoint_and_config(tmp_path, run_config, capsys) -> None:
    out_dir = tmp_path / "run-a"
    code = main(["train", "--config", str(run_config), "--out-dir", str(out_dir), "--seed", "3"])
    assert code == EXIT_OK

    rows = _rows(out_dir / METRICS_FILE)
    assert rows[0] == METRICS_HEADER
    assert [row[0] for row in rows[1:]] == ["0", "1", "2"]
    assert [row[1] for row in rows[1:]] == ["2", "4", "6"]
    assert (out_dir / CHECKPOINT_FILE).is_file()

    resolved = (out_dir / RESOLVED_CONFIG_FILE).read_text(encoding="utf-8")
    assert "seed = 3\n" in resolved
    assert "optimizer.momentum = 0.9\n" in resolved
    assert load_checkpoint(out_dir / CHECKPOINT_FILE).config_text == resolved

    stdout = capsys.readouterr().out
    assert "total_params=" in stdout
    assert "compression_floor=" in stdout
    assert _last_line(stdout, "test_err=") == f"test_err={rows[-1][4]}"


def test_train_is_reproducible_for_a_seed(tmp_path, run_config) -> None:
    runs = []
    for name in ("a", "b"):
        out_dir = tmp_path / name
        assert main(["train", "--config", str(run_config), "--out-dir", str(out_dir)]) == EXIT_OK
        # wall_s is the only column allowed to differ
        runs.append([row[:-1] for row in _rows(out_dir / METRICS_FILE)])
    assert runs[0] == runs[1]

    nets = [checkpoint_to_network(load_checkpoint(tmp_path / n / CHECKPOINT_FILE)) for n in "ab"]
    for left, right in zip(nets[0].parameters(), nets[1].parameters()):
        assert (left == right).all()


def test_eval_reproduces_the_final_test_error(tmp_path, run_config, capsys) -> None:
    out_dir = tmp_path / "run"
    assert main(["train", "--config", str(run_config), "--out-dir", str(out_dir)]) == EXIT_OK
    final = _rows(out_dir / METRICS_FILE)[-1][4]
    capsys.readouterr()

    assert main(["eval", "--checkpoint", str(out_dir / CHECKPOINT_FILE)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == f"test_err={final}"


def test_eval_accepts_explicit_data(tmp_path, run_config, idx_fixture, capsys) -> None:
    out_dir = tmp_path / "run"
    assert main(["train", "--config", str(run_config), "--out-dir", str(out_dir)]) == EXIT_OK
    capsys.readouterr()
    code = main(
        [
            "eval",
            "--checkpoint",
            str(out_dir / CHECKPOINT_FILE),
            "--images",
            str(idx_fixture["images"]),
            "--labels",
            str(idx_fixture["labels"]),
        ]
    )
    assert code == EXIT_OK
    assert capsys.readouterr().out.startswith("test_err=")


def test_train_without_data_paths_is_a_config_error(tmp_path, capsys) -> None:
    code = main(["train", "--out-dir", str(tmp_path / "out")])
    assert code == EXIT_INVALID
    assert "data.train_images" in capsys.readouterr().err


def test_missing_config_file_exits_invalid(tmp_path, capsys) -> None:
    code = main(["train", "--config", str(tmp_path / "absent.txt")])
    assert code == EXIT_INVALID
    assert "--config" in capsys.readouterr().err


def test_network_that_does_not_fit_the_data(tmp_path, run_config, capsys) -> None:
    code = main(
        [
            "train",
            "--config",
            str(run_config),
            "--out-dir",
            str(tmp_path / "out"),
            "--set",
            "network.layers.0.col_modes=4,4",
        ]
    )
    assert code == EXIT_INVALID
    assert "network.layers.0.col_modes" in capsys.readouterr().err


def test_eval_of_a_corrupt_checkpoint(tmp_path, capsys) -> None:
    broken = tmp_path / "broken.ttnet"
    broken.write_bytes(b"not a checkpoint")
    assert main(["eval", "--checkpoint", str(broken)]) == EXIT_INVALID
    assert "format error" in capsys.readouterr().err


def test_eval_exports_the_thread_limit_before_loading(tmp_path, monkeypatch) -> None:
    for name in THREAD_ENV_VARS:
        monkeypatch.setenv(name, "1")
    broken = tmp_path / "broken.ttnet"
    broken.write_bytes(b"not a checkpoint")
    assert main(["eval", "--checkpoint", str(broken), "--threads", "3"]) == EXIT_INVALID
    assert all(os.environ[name] == "3" for name in THREAD_ENV_VARS)


def test_eval_of_a_checkpoint_with_an_empty_tt_record(tmp_path, capsys) -> None:
    path = tmp_path / "empty-tt.ttnet"
    save_checkpoint(path, Checkpoint(layers=[LayerRecord(LayerKind.TT)]))
    assert main(["eval", "--checkpoint", str(path)]) == EXIT_INVALID
    assert "format error" in capsys.readouterr().err
