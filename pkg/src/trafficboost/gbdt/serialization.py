"""
Versioned little-endian binary format for boosted tree ensembles.

Layout:
    magic b"TBGB" | major u16 | minor u16 | header length u32 | header (JSON)
    | base scores f8[num_outputs]
    | per tree: node count u32, then feature i4, threshold f8, default_left u1,
      left i4, right i4, value f8, gain f8, count i8 (each node-count long)
"""

import os
import struct
import tempfile
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ValidationError

from .base import SerializationError
from .models import GbdtModel, GbdtParams, Objective, Tree

MAGIC = b"TBGB"
FORMAT_MAJOR = 1
FORMAT_MINOR = 0

_PREAMBLE = struct.Struct("<4sHHI")
_COUNT = struct.Struct("<I")
_TREE_ARRAYS = (
    ("feature", "<i4"),
    ("threshold", "<f8"),
    ("default_left", "u1"),
    ("left", "<i4"),
    ("right", "<i4"),
    ("value", "<f8"),
    ("gain", "<f8"),
    ("count", "<i8"),
)
_NATIVE = {
    "feature": np.int32,
    "threshold": np.float64,
    "default_left": bool,
    "left": np.int32,
    "right": np.int32,
    "value": np.float64,
    "gain": np.float64,
    "count": np.int64,
}


class ModelHeader(BaseModel):
    """Everything but the numeric arrays"""

    objective: Objective
    params: GbdtParams
    best_round: int
    feature_names: tuple[str, ...]
    num_trees: int
    train_history: tuple[float, ...] = ()
    valid_history: tuple[float, ...] = ()


def serialize(model: GbdtModel) -> bytes:
    """Encode a model; equal models always give equal bytes"""
    header = ModelHeader(
        objective=model.objective,
        params=model.params,
        best_round=model.best_round,
        feature_names=model.feature_names,
        num_trees=len(model.trees),
        train_history=model.train_history,
        valid_history=model.valid_history,
    ).model_dump_json().encode("utf-8")

    parts = [_PREAMBLE.pack(MAGIC, FORMAT_MAJOR, FORMAT_MINOR, len(header)), header]
    parts.append(np.asarray(model.base_score, dtype="<f8").tobytes())
    for tree in model.trees:
        parts.append(_COUNT.pack(tree.n_nodes))
        for name, dtype in _TREE_ARRAYS:
            parts.append(np.asarray(getattr(tree, name)).astype(dtype).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.payload):
            raise SerializationError(
                f"Truncated payload: need {end} bytes, have {len(self.payload)}"
            )
        chunk = self.payload[self.offset : end]
        self.offset = end
        return chunk

    def array(self, dtype: str, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt)


def deserialize(payload: bytes) -> GbdtModel:
    """Decode bytes produced by `serialize`.

    Raises:
        SerializationError: bad magic, unsupported major version, truncated or trailing data,
            or an unreadable header.
    """
    reader = _Reader(payload)
    magic, major, minor, header_len = _PREAMBLE.unpack(reader.take(_PREAMBLE.size))
    if magic != MAGIC:
        raise SerializationError(f"Not a model payload (magic {magic!r})")
    if major != FORMAT_MAJOR:
        raise SerializationError(
            f"Unsupported format version {major}.{minor}; expected {FORMAT_MAJOR}.x"
        )
    try:
        header = ModelHeader.model_validate_json(reader.take(header_len))
    except ValidationError as e:
        raise SerializationError(f"Malformed model header: {e}")

    k = header.objective.num_outputs
    base_score = tuple(reader.array("<f8", k).tolist())
    trees = []
    for _ in range(header.num_trees):
        (n_nodes,) = _COUNT.unpack(reader.take(_COUNT.size))
        arrays = {
            name: reader.array(dtype, n_nodes).astype(_NATIVE[name])
            for name, dtype in _TREE_ARRAYS
        }
        try:
            trees.append(Tree(**arrays))
        except ValidationError as e:
            raise SerializationError(f"Malformed tree: {e}")
    if reader.offset != len(payload):
        raise SerializationError(f"{len(payload) - reader.offset} trailing bytes after model")

    try:
        return GbdtModel(
            objective=header.objective,
            params=header.params,
            base_score=base_score,
            trees=tuple(trees),
            best_round=header.best_round,
            feature_names=header.feature_names,
            train_history=header.train_history,
            valid_history=header.valid_history,
        )
    except ValidationError as e:
        raise SerializationError(f"Inconsistent model payload: {e}")


def atomic_write_bytes(path: Path, payload: bytes) -> None:
    """Write via a temporary file in the same directory, then rename over `path`"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(model: GbdtModel, path: Path) -> None:
    atomic_write_bytes(path, serialize(model))


def load_model(path: Path) -> GbdtModel:
    return deserialize(Path(path).read_bytes())
