"""Binary model container.

Layout (all integers little-endian)::

    magic      4 bytes  b"KTHB"
    version    u32      FORMAT_VERSION
    config     u32 length + UTF-8 JSON (sorted keys)
    components u32 count, then per component:
        name         u32 length + UTF-8
        labels       u32 length + UTF-8 JSON list
        rows, dim    u32, u32
        epochs       u32
        seed         u64
        bias         rows x float32
        weights      rows x dim x float32, row-major
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from ..errors import ModelFormatError
from .linear import LinearModel
from .model import ParserConfig, ParserModel

MAGIC = b"KTHB"
FORMAT_VERSION = 1
COMPONENTS = ("tagger", "arc_scorer", "labeler")


def _write_blob(f: BinaryIO, data: bytes) -> None:
    f.write(struct.pack("<I", len(data)))
    f.write(data)


def _read_exact(f: BinaryIO, n: int) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise ModelFormatError("truncated model file")
    return data


def _read_blob(f: BinaryIO) -> bytes:
    (n,) = struct.unpack("<I", _read_exact(f, 4))
    return _read_exact(f, n)


def dump_model(m: ParserModel, f: BinaryIO) -> None:
    f.write(MAGIC)
    f.write(struct.pack("<I", FORMAT_VERSION))
    _write_blob(f, json.dumps(m.config.to_dict(), sort_keys=True).encode("utf-8"))
    f.write(struct.pack("<I", len(COMPONENTS)))
    for name in COMPONENTS:
        comp: LinearModel = getattr(m, name)
        _write_blob(f, name.encode("utf-8"))
        _write_blob(f, json.dumps(comp.class_labels, ensure_ascii=False).encode("utf-8"))
        rows, dim = comp.weights.shape
        f.write(struct.pack("<IIIQ", rows, dim, comp.trained_epochs, comp.seed))
        f.write(comp.bias.astype("<f4").tobytes())
        for r in range(rows):
            f.write(comp.weights[r].astype("<f4").tobytes())


def load_model_stream(f: BinaryIO) -> ParserModel:
    if _read_exact(f, 4) != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    (version,) = struct.unpack("<I", _read_exact(f, 4))
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}", code="BAD_MODEL_VERSION")
    try:
        config = ParserConfig(**json.loads(_read_blob(f).decode("utf-8")))
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"bad config block: {exc}") from exc
    (count,) = struct.unpack("<I", _read_exact(f, 4))
    if count != len(COMPONENTS):
        raise ModelFormatError(f"expected {len(COMPONENTS)} components, found {count}")
    parts = {}
    for expected in COMPONENTS:
        name = _read_blob(f).decode("utf-8")
        if name != expected:
            raise ModelFormatError(f"expected component {expected!r}, found {name!r}")
        labels = json.loads(_read_blob(f).decode("utf-8"))
        rows, dim, epochs, seed = struct.unpack("<IIIQ", _read_exact(f, 20))
        bias = np.frombuffer(_read_exact(f, 4 * rows), dtype="<f4").astype(np.float32)
        weights = np.frombuffer(_read_exact(f, 4 * rows * dim), dtype="<f4").astype(np.float32)
        try:
            parts[name] = LinearModel(labels, weights.reshape(rows, dim), bias, epochs, seed)
        except ValueError as exc:
            raise ModelFormatError(f"component {name}: {exc}") from exc
    try:
        return ParserModel(config=config, **parts)
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from exc


def save_model(m: ParserModel, path: str | Path) -> None:
    with open(path, "wb") as f:
        dump_model(m, f)


def load_model(path: str | Path) -> ParserModel:
    with open(path, "rb") as f:
        return load_model_stream(f)


def model_bytes(m: ParserModel) -> bytes:
    buf = io.BytesIO()
    dump_model(m, buf)
    return buf.getvalue()
