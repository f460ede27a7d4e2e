from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from src.cli.config_file import (
    dump_flat,
    load_run_config,
    parse_flat,
    parse_overrides,
    unflatten,
    validate_config,
)
from src.core.errors import ConfigError
from src.nn.builder import FIXED_SIGMA, build_network, check_network_config
from src.nn.layers import DenseLayer, MatrixRankBottleneck, ReLU
from src.nn.tt_layer import TtLayer
from src.schemas.config import DenseLayerSpec, NetworkConfig, RunConfig, TtLayerSpec

SMALL_NETWORK = """
# a tiny two-layer net
network.layers.0.kind = tt
network.layers.0.row_modes = 2,2
network.layers.0.col_modes = 2,2
network.layers.0.ranks = 2
network.layers.1.kind = relu
network.layers.2.kind = dense
network.layers.2.in_dim = 4
network.layers.2.out_dim = 10
"""


# ---- flat files ------------------------------------------------------------


def test_parse_flat_strips_comments_and_blanks() -> None:
    flat = parse_flat("a = 1  # one\n\n  # only a comment\nb.c=x\n")
    assert flat == {"a": "1", "b.c": "x"}


def test_parse_flat_rejects_lines_without_equals() -> None:
    with pytest.raises(ConfigError, match="line 2"):
        parse_flat("a = 1\njust words\n")


def test_overrides_need_key_value_pairs() -> None:
    overrides = parse_overrides(["seed=4", "optimizer.lr = 0.1"])
    assert overrides == {"seed": "4", "optimizer.lr": "0.1"}
    with pytest.raises(ConfigError):
        parse_overrides(["seed"])


def test_unflatten_builds_lists_from_numbered_keys() -> None:
    tree = unflatten(parse_flat(SMALL_NETWORK))
    layers = tree["network"]["layers"]
    assert [layer["kind"] for layer in layers] == ["tt", "relu", "dense"]
    assert layers[0]["row_modes"] == ["2", "2"]
    assert unflatten({"optimizer.lr_decay_epochs": "3"}) == {
        "optimizer": {"lr_decay_epochs": ["3"]}
    }
    assert unflatten({"data.limit": ""}) == {"data": {"limit": None}}


def test_unflatten_rejects_gaps_and_clashes() -> None:
    with pytest.raises(ConfigError):
        unflatten({"network.layers.0.kind": "relu", "network.layers.2.kind": "relu"})
    with pytest.raises(ConfigError):
        unflatten({"data": "x", "data.limit": "3"})


# ---- validation ------------------------------------------------------------


def test_defaults_describe_the_mnist_network() -> None:
    config = RunConfig()
    first = config.network.layers[0]
    assert isinstance(first, TtLayerSpec)
    assert first.row_modes == (4, 4, 4, 4, 4) and first.ranks == 8
    assert (config.optimizer.lr, config.optimizer.momentum) == (0.01, 0.9)
    assert config.optimizer.weight_decay == 0.0005
    assert config.data.resize == "pad"


def test_validation_errors_name_the_field() -> None:
    with pytest.raises(ConfigError) as info:
        validate_config(unflatten({"optimizer.momentum": "1.5"}))
    assert info.value.field_paths == ["optimizer.momentum"]

    tree = unflatten({**parse_flat(SMALL_NETWORK), "network.layers.2.bogus": "1"})
    with pytest.raises(ConfigError) as info:
        validate_config(tree)
    assert info.value.field_paths == ["network.layers.2.bogus"]


def test_missing_config_file(tmp_path: Path) -> None:
    with pytest.raises(ConfigError) as info:
        load_run_config(tmp_path / "absent.txt")
    assert info.value.field_paths == ["--config"]


def test_overrides_win_over_the_file(tmp_path: Path) -> None:
    path = tmp_path / "run.txt"
    path.write_text(SMALL_NETWORK + "seed = 5\nepochs = 2\n", encoding="utf-8")
    config = load_run_config(path, {"seed": "9"})
    assert (config.seed, config.epochs) == (9, 2)
    assert len(config.network.layers) == 3


def test_dump_then_load_reproduces_the_config(tmp_path: Path) -> None:
    original = RunConfig(seed=11, data={"limit": 20, "resize": "none"})
    path = tmp_path / "resolved_config.txt"
    path.write_text(dump_flat(original), encoding="utf-8")
    assert load_run_config(path) == original
    assert "optimizer.momentum_convention = velocity\n" in dump_flat(original)


# ---- network building ------------------------------------------------------


def test_build_default_network(rng) -> None:
    net = build_network(RunConfig().network, rng, input_dim=1024, num_classes=10)
    assert [type(layer) for layer in net.layers] == [TtLayer, ReLU, DenseLayer]
    assert net.layers[0].ranks == (1, 8, 8, 8, 8, 1)
    assert (net.in_dim, net.out_dim) == (1024, 10)


def test_chain_errors_point_at_the_offending_field() -> None:
    config = validate_config(unflatten(parse_flat(SMALL_NETWORK))).network
    with pytest.raises(ConfigError) as info:
        check_network_config(config, input_dim=1024)
    assert info.value.field_paths == ["network.layers.0.col_modes"]

    broken = NetworkConfig(
        layers=[DenseLayerSpec(in_dim=4, out_dim=6), DenseLayerSpec(in_dim=5, out_dim=10)]
    )
    with pytest.raises(ConfigError) as info:
        check_network_config(broken)
    assert info.value.field_paths == ["network.layers.1.in_dim"]

    with pytest.raises(ConfigError) as info:
        check_network_config(config, input_dim=4, num_classes=12)
    assert info.value.field_paths == ["network.layers.2.out_dim"]


def test_bad_tt_shapes_become_config_errors() -> None:
    mismatched = NetworkConfig(layers=[TtLayerSpec(row_modes=(2, 2), col_modes=(2,))])
    with pytest.raises(ConfigError) as info:
        check_network_config(mismatched)
    assert "network.layers.0.row_modes" in info.value.field_paths

    bad_ranks = NetworkConfig(
        layers=[TtLayerSpec(row_modes=(2, 2), col_modes=(2, 2), ranks=[1, 2])]
    )
    with pytest.raises(ConfigError) as info:
        check_network_config(bad_ranks)
    assert info.value.field_paths == ["network.layers.0.ranks"]


def test_fixed_init_without_sigma_uses_the_default_spread(rng) -> None:
    config = NetworkConfig(
        layers=[
            DenseLayerSpec(in_dim=500, out_dim=200, init="fixed"),
            {"kind": "rank", "in_dim": 200, "out_dim": 10, "rank": 3, "sigma": 0.1},
        ]
    )
    net = build_network(config, rng, dtype=np.float32)
    dense, bottleneck = net.layers
    assert isinstance(bottleneck, MatrixRankBottleneck)
    assert np.std(dense.weight) == pytest.approx(FIXED_SIGMA, rel=0.05)
    assert np.std(bottleneck.right) == pytest.approx(0.1, rel=0.1)
    assert dense.weight.dtype == np.float32
