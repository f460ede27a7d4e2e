"""Binary checkpoints for networks, optimizer state and standalone TT-matrices.

File layout, little-endian throughout::

    b"TTNETCK1" | u32 version | u64 payload length | payload

    payload   = u8 precision (0 f64, 1 f32)
                u32 layer count, layer*
                u8 has optimizer, [f64 lr, f64 momentum, f64 weight decay,
                                   u64 step, f64 base lr, f64 decay factor,
                                   u32 decay count, u32 decay epoch*,
                                   u32 count, array*]
                u32 config length, utf-8 config text
    layer     = u8 kind, u32 meta count, u32 meta*, u32 array count, array*
    array     = u32 ndim, u32 extent*, f64 data (C order)

Parameters are written as f64, so f32 runs round-trip bit-exactly too.
"""

from __future__ import annotations

import io
import logging
import math
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from src.core.errors import FormatError
from src.nn.layers import DenseLayer, Layer, MatrixRankBottleneck, ReLU
from src.nn.network import Network
from src.nn.optim import LearningRateSchedule, SgdMomentumState
from src.nn.tt_layer import TtLayer
from src.tt.matrix import ShapePair, TtMatrix

logger = logging.getLogger(__name__)

MAGIC = b"TTNETCK1"
VERSION = 1
PRECISIONS = {0: np.float64, 1: np.float32}


class LayerKind(IntEnum):
    RELU = 0
    DENSE = 1
    RANK = 2
    TT = 3
    TT_MATRIX = 4


@dataclass
class LayerRecord:
    kind: LayerKind
    meta: list[int] = field(default_factory=list)
    arrays: list[np.ndarray] = field(default_factory=list)


@dataclass
class OptimizerRecord:
    learning_rate: float
    momentum: float
    weight_decay: float
    step: int
    base_lr: float | None = None
    decay_factor: float = 1.0
    decay_epochs: list[int] = field(default_factory=list)
    velocities: list[np.ndarray] = field(default_factory=list)


@dataclass
class Checkpoint:
    layers: list[LayerRecord] = field(default_factory=list)
    optimizer: OptimizerRecord | None = None
    config_text: str = ""
    precision: np.dtype | type = np.float64
    version: int = VERSION


# ---- conversions -----------------------------------------------------------


def _tt_meta(w: TtMatrix) -> list[int]:
    return [w.shape.d, *w.shape.row_modes, *w.shape.col_modes, *w.ranks]


def _tt_from_meta(meta: list[int], cores: list[np.ndarray]) -> TtMatrix:
    if not meta:
        raise FormatError("TT record has no meta values")
    d = meta[0]
    if len(meta) != 1 + 3 * d + 1:
        raise FormatError(f"TT record meta has {len(meta)} values, expected {3 * d + 2}")
    shape = ShapePair(row_modes=tuple(meta[1 : 1 + d]), col_modes=tuple(meta[1 + d : 1 + 2 * d]))
    return TtMatrix(shape, cores)


def layer_to_record(layer: Layer) -> LayerRecord:
    if isinstance(layer, ReLU):
        return LayerRecord(LayerKind.RELU)
    if isinstance(layer, DenseLayer):
        return LayerRecord(LayerKind.DENSE, [layer.out_dim, layer.in_dim], layer.parameters())
    if isinstance(layer, MatrixRankBottleneck):
        return LayerRecord(
            LayerKind.RANK, [layer.out_dim, layer.rank, layer.in_dim], layer.parameters()
        )
    if isinstance(layer, TtLayer):
        return LayerRecord(LayerKind.TT, _tt_meta(layer.weights), layer.parameters())
    raise FormatError(f"no checkpoint record for layer kind {layer.kind!r}")


def record_to_layer(record: LayerRecord, dtype: np.dtype | type) -> Layer:
    arrays = [a.astype(dtype) for a in record.arrays]
    try:
        if record.kind == LayerKind.RELU:
            return ReLU()
        if record.kind == LayerKind.DENSE:
            return DenseLayer(*arrays)
        if record.kind == LayerKind.RANK:
            return MatrixRankBottleneck(*arrays)
        if record.kind == LayerKind.TT:
            if not arrays:
                raise FormatError("TT record has no arrays; expected cores and a bias")
            return TtLayer(_tt_from_meta(record.meta, arrays[:-1]), arrays[-1])
    except (TypeError, ValueError) as exc:
        raise FormatError(f"inconsistent {record.kind.name} record: {exc}") from exc
    raise FormatError(f"record kind {record.kind.name} is not a network layer")


def tt_matrix_record(w: TtMatrix) -> LayerRecord:
    return LayerRecord(LayerKind.TT_MATRIX, _tt_meta(w), list(w.cores))


def record_to_tt_matrix(record: LayerRecord) -> TtMatrix:
    if record.kind != LayerKind.TT_MATRIX:
        raise FormatError(f"expected a TT-matrix record, got {record.kind.name}")
    try:
        return _tt_from_meta(record.meta, record.arrays)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"inconsistent TT_MATRIX record: {exc}") from exc


def network_to_checkpoint(
    net: Network, state: SgdMomentumState | None = None, config_text: str = ""
) -> Checkpoint:
    params = net.parameters()
    precision = params[0].dtype.type if params else np.float64
    optimizer = None
    if state is not None:
        optimizer = OptimizerRecord(
            learning_rate=float(state.learning_rate),
            momentum=state.momentum,
            weight_decay=state.weight_decay,
            step=state.step,
            base_lr=state.schedule.base_lr,
            decay_factor=state.schedule.decay_factor,
            decay_epochs=list(state.schedule.decay_epochs),
            velocities=list(state.velocities),
        )
    return Checkpoint(
        layers=[layer_to_record(layer) for layer in net.layers],
        optimizer=optimizer,
        config_text=config_text,
        precision=precision,
    )


def checkpoint_to_network(checkpoint: Checkpoint) -> Network:
    return Network([record_to_layer(r, checkpoint.precision) for r in checkpoint.layers])


def checkpoint_to_optimizer(checkpoint: Checkpoint) -> SgdMomentumState | None:
    record = checkpoint.optimizer
    if record is None:
        return None
    try:
        schedule = LearningRateSchedule(
            base_lr=record.learning_rate if record.base_lr is None else record.base_lr,
            decay_factor=record.decay_factor,
            decay_epochs=tuple(record.decay_epochs),
        )
    except ValidationError as exc:
        raise FormatError(f"inconsistent learning-rate schedule: {exc}") from exc
    return SgdMomentumState(
        schedule=schedule,
        momentum=record.momentum,
        weight_decay=record.weight_decay,
        velocities=[v.astype(checkpoint.precision) for v in record.velocities],
        learning_rate=record.learning_rate,
        step=record.step,
    )


# ---- encoding --------------------------------------------------------------


def _write_array(out: io.BytesIO, array: np.ndarray) -> None:
    array = np.asarray(array)
    out.write(struct.pack("<I", array.ndim))
    out.write(struct.pack(f"<{array.ndim}I", *array.shape))
    out.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    precision_tag = {np.dtype(v): k for k, v in PRECISIONS.items()}.get(
        np.dtype(checkpoint.precision)
    )
    if precision_tag is None:
        raise FormatError(f"unsupported precision {checkpoint.precision}")

    body = io.BytesIO()
    body.write(struct.pack("<BI", precision_tag, len(checkpoint.layers)))
    for record in checkpoint.layers:
        body.write(struct.pack("<BI", int(record.kind), len(record.meta)))
        body.write(struct.pack(f"<{len(record.meta)}I", *record.meta))
        body.write(struct.pack("<I", len(record.arrays)))
        for array in record.arrays:
            _write_array(body, array)

    optimizer = checkpoint.optimizer
    if optimizer is None:
        body.write(struct.pack("<B", 0))
    else:
        base_lr = optimizer.learning_rate if optimizer.base_lr is None else optimizer.base_lr
        body.write(
            struct.pack(
                "<BdddQdd",
                1,
                optimizer.learning_rate,
                optimizer.momentum,
                optimizer.weight_decay,
                optimizer.step,
                base_lr,
                optimizer.decay_factor,
            )
        )
        epochs = optimizer.decay_epochs
        body.write(struct.pack(f"<I{len(epochs)}I", len(epochs), *epochs))
        body.write(struct.pack("<I", len(optimizer.velocities)))
        for array in optimizer.velocities:
            _write_array(body, array)

    config = checkpoint.config_text.encode("utf-8")
    body.write(struct.pack("<I", len(config)))
    body.write(config)

    payload = body.getvalue()
    return MAGIC + struct.pack("<IQ", checkpoint.version, len(payload)) + payload


class _Reader:
    def __init__(self, raw: bytes, offset: int) -> None:
        self._raw = raw
        self.offset = offset

    def take(self, count: int) -> bytes:
        if count < 0 or self.offset + count > len(self._raw):
            raise FormatError(
                f"checkpoint truncated: wanted {count} bytes, {len(self._raw) - self.offset} left",
                offset=self.offset,
            )
        chunk = self._raw[self.offset : self.offset + count]
        self.offset += count
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self) -> np.ndarray:
        (ndim,) = self.unpack("<I")
        if ndim > 8:
            raise FormatError(f"array rank {ndim} is implausible", offset=self.offset - 4)
        shape = self.unpack(f"<{ndim}I")
        count = math.prod(shape)
        data = np.frombuffer(self.take(8 * count), dtype="<f8")
        return data.reshape(shape).astype(np.float64)


def decode_checkpoint(raw: bytes) -> Checkpoint:
    if raw[: len(MAGIC)] != MAGIC:
        raise FormatError("not a ttnet checkpoint (bad magic)", offset=0)
    reader = _Reader(raw, len(MAGIC))
    version, length = reader.unpack("<IQ")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=len(MAGIC))
    if reader.offset + length != len(raw):
        raise FormatError(
            f"payload length {length} does not match the {len(raw) - reader.offset} bytes present",
            offset=reader.offset,
        )

    precision_tag, layer_count = reader.unpack("<BI")
    if precision_tag not in PRECISIONS:
        raise FormatError(f"unknown precision tag {precision_tag}", offset=reader.offset - 5)
    layers = []
    for _ in range(layer_count):
        kind_offset = reader.offset
        kind_tag, meta_count = reader.unpack("<BI")
        try:
            kind = LayerKind(kind_tag)
        except ValueError as exc:
            raise FormatError(f"unknown layer kind {kind_tag}", offset=kind_offset) from exc
        meta = list(reader.unpack(f"<{meta_count}I"))
        (array_count,) = reader.unpack("<I")
        arrays = [reader.array() for _ in range(array_count)]
        layers.append(LayerRecord(kind, meta, arrays))

    optimizer = None
    (has_optimizer,) = reader.unpack("<B")
    if has_optimizer:
        lr, momentum, weight_decay, step, base_lr, decay_factor = reader.unpack("<dddQdd")
        (decay_count,) = reader.unpack("<I")
        decay_epochs = list(reader.unpack(f"<{decay_count}I"))
        (count,) = reader.unpack("<I")
        optimizer = OptimizerRecord(
            learning_rate=lr,
            momentum=momentum,
            weight_decay=weight_decay,
            step=step,
            base_lr=base_lr,
            decay_factor=decay_factor,
            decay_epochs=decay_epochs,
            velocities=[reader.array() for _ in range(count)],
        )

    (config_length,) = reader.unpack("<I")
    config_offset = reader.offset
    try:
        config_text = reader.take(config_length).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(
            f"config text is not valid utf-8: {exc.reason}", offset=config_offset + exc.start
        ) from exc
    if reader.offset != len(raw):
        raise FormatError("trailing bytes after checkpoint payload", offset=reader.offset)
    return Checkpoint(
        layers=layers,
        optimizer=optimizer,
        config_text=config_text,
        precision=PRECISIONS[precision_tag],
        version=version,
    )


def save_checkpoint(path: str | Path, checkpoint: Checkpoint) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(checkpoint))
    logger.info("wrote checkpoint %s (%d layer records)", path, len(checkpoint.layers))


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError as exc:
        raise FormatError(f"checkpoint not found: {path}") from exc
    return decode_checkpoint(raw)
