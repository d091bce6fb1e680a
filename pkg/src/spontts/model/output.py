"""Mel output files: raw little-endian float32 frames plus a JSON sidecar."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .acoustic import SynthesisResult


def write_synthesis(result: SynthesisResult, out_dir: str | Path, name: str,
                    checkpoint_id: str | None = None) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mel_path = out / f"{name}.mel.f32"
    meta_path = out / f"{name}.json"
    mel_path.write_bytes(np.ascontiguousarray(result.mel, dtype="<f4").tobytes())
    meta = {
        "frames": int(result.mel.shape[0]),
        "mel_dim": int(result.mel.shape[1]),
        "speaker": result.speaker,
        "fp_threshold": result.fp_threshold,
        "checkpoint_id": checkpoint_id,
        "base_symbols": result.base_symbols,
        "extended_symbols": result.extended_symbols,
        "fp_tags": [int(t) for t in result.fp_tags],
        "durations": result.durations,
        "pitch": result.pitch,
        "warnings": result.warnings,
    }
    meta_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return mel_path, meta_path


def read_synthesis(out_dir: str | Path, name: str) -> tuple[np.ndarray, dict]:
    out = Path(out_dir)
    meta = json.loads((out / f"{name}.json").read_text(encoding="utf-8"))
    raw = np.frombuffer((out / f"{name}.mel.f32").read_bytes(), dtype="<f4")
    return raw.reshape(meta["frames"], meta["mel_dim"]).astype(np.float32), meta
