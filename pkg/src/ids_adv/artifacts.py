"""Deterministic on-disk artifact formats.

Binary containers use fixed little-endian headers (documented in the README)
and float64 row-major payloads, so re-runs with identical seeds produce
byte-identical files. JSON artifacts are dumped with sorted keys and no
non-finite literals; non-finite floats serialize as null.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .data import Dataset, ScalerParams
from .errors import IoFailure, MissingArtifact

_DATA_MAGIC = b"IDSDATA1"
_ADV_MAGIC = b"IDSADV01"
_FORMAT_VERSION = 1


def _sanitize(obj):
    """Make an object JSON-serializable and deterministic."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    return obj


def write_json(path, obj) -> None:
    payload = json.dumps(_sanitize(obj), sort_keys=True, indent=2) + "\n"
    Path(path).write_text(payload, encoding="utf-8")


def read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"missing artifact: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def require(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"missing artifact: {path}")
    return path


def save_dataset(path, dataset: Dataset, meta: dict | None = None) -> None:
    """data file: magic, u32 version, u64 n, u64 d, X float64 C-order, y int64."""
    path = Path(path)
    n, d = dataset.X.shape
    blob = bytearray()
    blob += _DATA_MAGIC
    blob += struct.pack("<I", _FORMAT_VERSION)
    blob += struct.pack("<QQ", n, d)
    blob += np.ascontiguousarray(dataset.X, dtype="<f8").tobytes()
    blob += np.ascontiguousarray(dataset.y, dtype="<i8").tobytes()
    path.write_bytes(bytes(blob))
    sidecar = {
        "format_version": _FORMAT_VERSION,
        "feature_names": dataset.feature_names,
        "scaler": None
        if dataset.scaler is None
        else {"min": dataset.scaler.minimum, "max": dataset.scaler.maximum},
        "n_rows": n,
        "n_features": d,
    }
    if meta:
        sidecar.update(meta)
    write_json(path.with_suffix(".json"), sidecar)


def load_dataset(path) -> Dataset:
    path = require(path)
    blob = path.read_bytes()
    if blob[:8] != _DATA_MAGIC:
        raise IoFailure(f"{path}: not a dataset snapshot")
    (version,) = struct.unpack_from("<I", blob, 8)
    if version != _FORMAT_VERSION:
        raise IoFailure(f"{path}: unsupported dataset version {version}")
    n, d = struct.unpack_from("<QQ", blob, 12)
    offset = 28
    X = np.frombuffer(blob, dtype="<f8", count=n * d, offset=offset).reshape(n, d).copy()
    offset += 8 * n * d
    y = np.frombuffer(blob, dtype="<i8", count=n, offset=offset).copy()
    sidecar = read_json(path.with_suffix(".json"))
    scaler = None
    if sidecar.get("scaler"):
        scaler = ScalerParams(
            minimum=np.asarray(sidecar["scaler"]["min"], dtype=np.float64),
            maximum=np.asarray(sidecar["scaler"]["max"], dtype=np.float64),
        )
    return Dataset(X=X, y=y, feature_names=list(sidecar["feature_names"]), scaler=scaler)


def save_adv_batch(path, batch, meta: dict | None = None) -> None:
    """adv file: magic, u32 version, u64 n, u64 d, X_adv float64 C-order."""
    path = Path(path)
    n, d = batch.x_adv.shape
    blob = bytearray()
    blob += _ADV_MAGIC
    blob += struct.pack("<I", _FORMAT_VERSION)
    blob += struct.pack("<QQ", n, d)
    blob += np.ascontiguousarray(batch.x_adv, dtype="<f8").tobytes()
    path.write_bytes(bytes(blob))
    sidecar = {
        "format_version": _FORMAT_VERSION,
        "attack": batch.attack_tag,
        "attack_config": batch.config.to_dict(),
        "success": batch.success,
        "l0": batch.l0,
        "l2": batch.l2,
        "linf": batch.linf,
    }
    if meta:
        sidecar.update(meta)
    write_json(path.with_suffix(".json"), sidecar)


def load_adv_batch(path):
    from .attacks import AdversarialBatch, attack_config_from_dict

    path = require(path)
    blob = path.read_bytes()
    if blob[:8] != _ADV_MAGIC:
        raise IoFailure(f"{path}: not an adversarial batch")
    (version,) = struct.unpack_from("<I", blob, 8)
    if version != _FORMAT_VERSION:
        raise IoFailure(f"{path}: unsupported batch version {version}")
    n, d = struct.unpack_from("<QQ", blob, 12)
    x_adv = np.frombuffer(blob, dtype="<f8", count=n * d, offset=28).reshape(n, d).copy()
    sidecar = read_json(path.with_suffix(".json"))
    return AdversarialBatch(
        x_adv=x_adv,
        success=np.asarray(sidecar["success"], dtype=bool),
        l0=np.asarray(sidecar["l0"], dtype=np.int64),
        l2=np.asarray(sidecar["l2"], dtype=np.float64),
        linf=np.asarray(sidecar["linf"], dtype=np.float64),
        attack_tag=sidecar["attack"],
        config=attack_config_from_dict(sidecar["attack_config"]),
    )
