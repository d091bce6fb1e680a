"""Checkpoint directories: ``manifest.json`` plus one raw float32 blob.

Every parameter (and, when given, every Adam moment) is stored as
little-endian float32 at a recorded byte offset with its own SHA-256, so a
damaged or truncated blob is reported against the tensor it breaks.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..corpus.speed import SpeedBucketBoundaries
from ..model.acoustic import AcousticModel
from ..model.config import ModelConfig
from ..numerics.optim import Adam, AdamState

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
BLOB = "tensors.f32"


class CheckpointError(RuntimeError):
    def __init__(self, message: str, tensor: str | None = None):
        self.tensor = tensor
        super().__init__(message if tensor is None else f"{message} (tensor {tensor!r})")


@dataclass
class LoadedCheckpoint:
    model: AcousticModel
    optimizer_states: dict[str, AdamState]
    manifest: dict
    warnings: list[str] = field(default_factory=list)

    @property
    def checkpoint_id(self) -> str:
        return self.manifest["blob_sha256"]


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_checkpoint(model: AcousticModel, path: str | Path, optimizer: Adam | None = None,
                    extra: dict | None = None) -> dict:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    chunks: list[bytes] = []
    offset = 0

    def add(name: str, array: np.ndarray) -> dict:
        nonlocal offset
        raw = np.ascontiguousarray(array, dtype="<f4").tobytes()
        entry = {"name": name, "shape": list(array.shape), "offset": offset, "nbytes": len(raw),
                 "sha256": _sha(raw)}
        chunks.append(raw)
        offset += len(raw)
        return entry

    tensors = [add(p.name, p.data) for p in model.store]
    opt_entries = []
    if optimizer is not None:
        for name, state in optimizer.states.items():
            opt_entries.append({
                "param": name,
                "step_count": state.step_count,
                "beta1": state.beta1,
                "beta2": state.beta2,
                "epsilon": state.epsilon,
                "learning_rate": state.learning_rate,
                "m": add(f"adam.m.{name}", state.m),
                "v": add(f"adam.v.{name}", state.v),
            })
    blob = b"".join(chunks)
    manifest = {
        "format_version": FORMAT_VERSION,
        "blob": BLOB,
        "blob_bytes": len(blob),
        "blob_sha256": _sha(blob),
        "tensors": tensors,
        "optimizer": opt_entries,
        "stage_history": list(model.stage_history),
        "model_config": model.config.to_dict(),
        "config_hash": model.config.digest(),
        "seed": model.seed,
        "vocabulary": model.vocabulary,
        "speakers": model.speakers,
        "use_moe": model.use_moe,
        "speed_boundaries": None if model.speed_boundaries is None
        else [float(model.speed_boundaries.t1), float(model.speed_boundaries.t2)],
        "extra": extra or {},
    }
    (out / BLOB).write_bytes(blob)
    (out / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def read_manifest(path: str | Path) -> dict:
    mpath = Path(path) / MANIFEST
    if not mpath.exists():
        raise CheckpointError(f"no checkpoint manifest at {mpath}")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"manifest {mpath} is not valid JSON: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {manifest.get('format_version')!r}")
    return manifest


def _slice(blob: bytes, entry: dict) -> np.ndarray:
    start, size = entry["offset"], entry["nbytes"]
    if start + size > len(blob):
        raise CheckpointError("blob is truncated", entry["name"])
    raw = blob[start:start + size]
    if _sha(raw) != entry["sha256"]:
        raise CheckpointError("checksum mismatch", entry["name"])
    return np.frombuffer(raw, dtype="<f4").reshape(entry["shape"]).astype(np.float32)


def load_checkpoint(path: str | Path, expected_config: ModelConfig | None = None) -> LoadedCheckpoint:
    root = Path(path)
    manifest = read_manifest(root)
    blob_path = root / manifest["blob"]
    if not blob_path.exists():
        raise CheckpointError(f"missing tensor blob {blob_path}")
    blob = blob_path.read_bytes()
    config = ModelConfig(**manifest["model_config"])
    model = AcousticModel(config, manifest["vocabulary"], manifest["speakers"], seed=manifest["seed"])
    names = set(model.store.names())
    stored = {e["name"] for e in manifest["tensors"]}
    if names != stored:
        missing = sorted(names - stored) or sorted(stored - names)
        raise CheckpointError("tensor set does not match the model layout", missing[0])
    for entry in manifest["tensors"]:
        model.store.replace(entry["name"], _slice(blob, entry))
    if len(blob) != manifest["blob_bytes"]:
        raise CheckpointError(f"blob has {len(blob)} bytes, manifest records {manifest['blob_bytes']}")
    states = {}
    for e in manifest["optimizer"]:
        states[e["param"]] = AdamState(
            m=_slice(blob, e["m"]), v=_slice(blob, e["v"]), step_count=e["step_count"],
            beta1=e["beta1"], beta2=e["beta2"], epsilon=e["epsilon"], learning_rate=e["learning_rate"])
    model.stage_history = list(manifest["stage_history"])
    model.use_moe = bool(manifest["use_moe"])
    if manifest["speed_boundaries"] is not None:
        model.speed_boundaries = SpeedBucketBoundaries(*manifest["speed_boundaries"])
    warnings = []
    if expected_config is not None and expected_config.digest() != manifest["config_hash"]:
        warnings.append(f"config hash mismatch: checkpoint {manifest['config_hash'][:12]}, "
                        f"loading config {expected_config.digest()[:12]}")
    return LoadedCheckpoint(model, states, manifest, warnings)


def checkpoint_digest(path: str | Path) -> str:
    """SHA-256 over the manifest and blob bytes."""
    root = Path(path)
    h = hashlib.sha256()
    h.update((root / MANIFEST).read_bytes())
    h.update((root / BLOB).read_bytes())
    return h.hexdigest()
