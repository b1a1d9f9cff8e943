"""Versioned binary container for tensors; checkpoint save/load on top of it.

Layout: 8-byte magic, uint32 format version, uint64 JSON header length,
UTF-8 JSON header, then the raw tensor payload. The header carries a
``kind`` tag, arbitrary JSON metadata, and an index table of tensor
records (name, shape, byte offset into the payload). All tensors are
stored as little-endian IEEE-754 float64 in C order, so a round trip is
byte-exact and resumed training replays identically.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"MLCSCBIN"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIQ")


def save_arrays(path, kind: str, arrays: dict[str, np.ndarray], meta: dict) -> None:
    """Write named float64 tensors plus JSON metadata to ``path``."""
    records = []
    blobs = []
    offset = 0
    for name, arr in arrays.items():
        blob = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        records.append({"name": name, "shape": list(np.shape(arr)), "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "meta": meta,
        "tensors": records,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)


def load_arrays(path) -> tuple[str, dict[str, np.ndarray], dict]:
    """Read a container; returns ``(kind, arrays, meta)``."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"container not found: {path}")
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise DataError(f"{path}: too short to be a container")
    magic, version, header_len = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported format version {version}")
    try:
        header = json.loads(data[_HEADER.size : _HEADER.size + header_len])
    except ValueError as exc:
        raise DataError(f"{path}: corrupt header: {exc}") from exc
    payload = data[_HEADER.size + header_len :]
    arrays = {}
    for rec in header["tensors"]:
        shape = tuple(rec["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = rec["offset"]
        end = start + 8 * count
        if end > len(payload):
            raise DataError(f"{path}: tensor {rec['name']!r} extends past payload")
        arrays[rec["name"]] = (
            np.frombuffer(payload[start:end], dtype="<f8").reshape(shape).copy()
        )
    return header["kind"], arrays, header["meta"]


def save_checkpoint(path, state, config_text: str) -> None:
    """Persist a training state (model, epoch, metrics, RNG) plus its config.

    ``config_text`` is the serialized run configuration, embedded verbatim
    so a checkpoint is self-describing.
    """
    arrays = {
        f"layer_{lyr.layer_index}_atoms": lyr.atoms for lyr in state.model.layers
    }
    meta = {
        "epoch": state.epoch,
        "input_shape": list(state.model.input_shape)
        if state.model.input_shape
        else None,
        "metrics_history": [
            {
                "mse": m.mse,
                "dict_density": list(m.dict_density),
                "code_density": m.code_density,
                "mean_fista_iters": m.mean_fista_iters,
            }
            for m in state.metrics_history
        ],
        "rng_state": state.rng.bit_generator.state,
        "config": config_text,
    }
    save_arrays(path, "checkpoint", arrays, meta)


def load_checkpoint(path):
    """Rebuild ``(TrainingState, config_text)`` from :func:`save_checkpoint` output."""
    from .model import LayerDictionary, MlcscModel
    from .training import EpochMetrics, TrainingState

    kind, arrays, meta = load_arrays(path)
    if kind != "checkpoint":
        raise DataError(f"{path}: container holds {kind!r}, not a checkpoint")
    layers = []
    for index in range(1, len(arrays) + 1):
        name = f"layer_{index}_atoms"
        if name not in arrays:
            raise DataError(f"{path}: missing tensor {name!r}")
        layers.append(LayerDictionary(atoms=arrays[name], layer_index=index))
    input_shape = meta.get("input_shape")
    model = MlcscModel(
        layers=tuple(layers),
        input_shape=tuple(input_shape) if input_shape else None,
    )
    metrics = [
        EpochMetrics(
            mse=m["mse"],
            dict_density=tuple(m["dict_density"]),
            code_density=m["code_density"],
            mean_fista_iters=m["mean_fista_iters"],
        )
        for m in meta["metrics_history"]
    ]
    rng = np.random.default_rng()
    rng.bit_generator.state = meta["rng_state"]
    state = TrainingState(
        model=model, epoch=meta["epoch"], metrics_history=metrics, rng=rng
    )
    return state, meta["config"]
