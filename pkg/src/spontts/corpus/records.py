"""Utterance records, SPON-FP entries, and their on-disk format.

A corpus directory holds ``records.jsonl`` (one JSON object per line),
per-utterance mel files under ``mels/`` (little-endian float32,
row-major ``frames x mel_dim``) and a ``manifest.json`` with counts and
SHA-256 checksums.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .fp import FpPair
from .symbols import FP_TOKENS, FpTag, Style

MEL_DTYPE = np.dtype("<f4")
RECORDS_FILE = "records.jsonl"
MANIFEST_FILE = "manifest.json"


class DataError(ValueError):
    """A record violates its invariants or a corpus file is malformed."""


@dataclass
class UtteranceRecord:
    id: str
    speaker: str
    phonemes: list[str]
    durations: list[int] | None = None
    pitch: list[float] | None = None
    mel: np.ndarray | None = None
    style: Style = Style.SPONTANEOUS

    @property
    def aligned(self) -> bool:
        return self.durations is not None and self.pitch is not None and self.mel is not None

    def fp_counts(self) -> Counter:
        return Counter(FP_TOKENS[s].name for s in self.phonemes if s in FP_TOKENS)

    def validate(self) -> "UtteranceRecord":
        n = len(self.phonemes)
        if n == 0:
            raise DataError(f"{self.id}: empty phoneme list")
        if self.durations is not None:
            if len(self.durations) != n:
                raise DataError(f"{self.id}: {len(self.durations)} durations for {n} phonemes")
            if any(d < 0 for d in self.durations):
                raise DataError(f"{self.id}: negative duration")
        if self.pitch is not None and len(self.pitch) != n:
            raise DataError(f"{self.id}: {len(self.pitch)} pitch values for {n} phonemes")
        if self.mel is not None:
            if self.mel.ndim != 2:
                raise DataError(f"{self.id}: mel must be 2-D, got shape {self.mel.shape}")
            if self.durations is not None and sum(self.durations) != self.mel.shape[0]:
                raise DataError(
                    f"{self.id}: durations sum to {sum(self.durations)} but mel has "
                    f"{self.mel.shape[0]} frames"
                )
        return self


@dataclass(frozen=True)
class FpRecord:
    """One SPON-FP entry."""

    id: str
    speaker: str
    pair: FpPair


@dataclass
class CorpusManifest:
    name: str
    record_count: int
    speaker_counts: dict[str, int]
    fp_counts: dict[str, int]
    checksums: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "record_count": self.record_count,
            "speaker_counts": dict(sorted(self.speaker_counts.items())),
            "fp_counts": self.fp_counts,
            "checksums": dict(sorted(self.checksums.items())),
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CorpusManifest":
        return cls(obj["name"], obj["record_count"], obj["speaker_counts"], obj["fp_counts"],
                   obj.get("checksums", {}), obj.get("warnings", []))


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, manifest: CorpusManifest) -> None:
    text = json.dumps(manifest.to_json(), indent=2, sort_keys=False) + "\n"
    (out_dir / MANIFEST_FILE).write_text(text, encoding="utf-8", newline="\n")


def manifest_for_records(name: str, records: Sequence[UtteranceRecord]) -> CorpusManifest:
    fp = Counter()
    for r in records:
        fp.update(r.fp_counts())
    return CorpusManifest(
        name=name,
        record_count=len(records),
        speaker_counts=dict(Counter(r.speaker for r in records)),
        fp_counts={"UH": fp.get("UH", 0), "UM": fp.get("UM", 0)},
    )


def manifest_for_fp_records(name: str, records: Sequence[FpRecord]) -> CorpusManifest:
    fp = Counter(FpTag(t).name for r in records for t in r.pair.tags if t != FpTag.NONE)
    return CorpusManifest(
        name=name,
        record_count=len(records),
        speaker_counts=dict(Counter(r.speaker for r in records)),
        fp_counts={"UH": fp.get("UH", 0), "UM": fp.get("UM", 0)},
    )


def write_corpus(records: Sequence[UtteranceRecord], out_dir: str | Path, name: str = "corpus",
                 warnings: Iterable[str] = ()) -> CorpusManifest:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = []
    manifest = manifest_for_records(name, records)
    manifest.warnings.extend(warnings)
    for r in records:
        r.validate()
        obj = {
            "id": r.id,
            "speaker": r.speaker,
            "style": r.style.value,
            "phonemes": list(r.phonemes),
            "durations": None if r.durations is None else [int(d) for d in r.durations],
            "pitch": None if r.pitch is None else [float(p) for p in r.pitch],
            "mel_path": None,
            "mel_shape": None,
        }
        if r.mel is not None:
            rel = f"mels/{r.id}.f32"
            path = out_dir / rel
            path.parent.mkdir(exist_ok=True)
            path.write_bytes(np.ascontiguousarray(r.mel, dtype=MEL_DTYPE).tobytes())
            obj["mel_path"] = rel
            obj["mel_shape"] = list(r.mel.shape)
            manifest.checksums[rel] = sha256_file(path)
        lines.append(json.dumps(obj, separators=(",", ":")))
    records_path = out_dir / RECORDS_FILE
    records_path.write_text("".join(line + "\n" for line in lines), encoding="utf-8", newline="\n")
    manifest.checksums[RECORDS_FILE] = sha256_file(records_path)
    _write_manifest(out_dir, manifest)
    return manifest


def read_corpus(path: str | Path) -> list[UtteranceRecord]:
    """Load a corpus directory (or a ``records.jsonl`` path directly)."""
    path = Path(path)
    records_path = path / RECORDS_FILE if path.is_dir() else path
    base = records_path.parent
    if not records_path.exists():
        raise FileNotFoundError(records_path)
    out = []
    for lineno, line in enumerate(records_path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{records_path}:{lineno}: {exc}") from exc
        mel = None
        if obj.get("mel_path"):
            raw = (base / obj["mel_path"]).read_bytes()
            shape = tuple(obj["mel_shape"])
            if len(raw) != int(np.prod(shape)) * MEL_DTYPE.itemsize:
                raise DataError(f"{obj['id']}: mel file size does not match shape {shape}")
            mel = np.frombuffer(raw, dtype=MEL_DTYPE).reshape(shape).astype(np.float32)
        rec = UtteranceRecord(
            id=obj["id"],
            speaker=obj["speaker"],
            phonemes=list(obj["phonemes"]),
            durations=obj.get("durations"),
            pitch=obj.get("pitch"),
            mel=mel,
            style=Style(obj.get("style", Style.SPONTANEOUS.value)),
        )
        out.append(rec.validate())
    return out


def write_fp_dataset(records: Sequence[FpRecord], out_dir: str | Path, name: str = "spon_fp",
                     warnings: Iterable[str] = ()) -> CorpusManifest:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = manifest_for_fp_records(name, records)
    manifest.warnings.extend(warnings)
    lines = [
        json.dumps({"id": r.id, "speaker": r.speaker, "phonemes": list(r.pair.phonemes),
                    "tags": [int(t) for t in r.pair.tags]}, separators=(",", ":"))
        for r in records
    ]
    records_path = out_dir / RECORDS_FILE
    records_path.write_text("".join(line + "\n" for line in lines), encoding="utf-8", newline="\n")
    manifest.checksums[RECORDS_FILE] = sha256_file(records_path)
    _write_manifest(out_dir, manifest)
    return manifest


def read_fp_dataset(path: str | Path) -> list[FpRecord]:
    path = Path(path)
    records_path = path / RECORDS_FILE if path.is_dir() else path
    out = []
    for line in records_path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            obj = json.loads(line)
            out.append(FpRecord(obj["id"], obj["speaker"], FpPair(obj["phonemes"], obj["tags"])))
    return out


def read_manifest(path: str | Path) -> CorpusManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_FILE
    return CorpusManifest.from_json(json.loads(path.read_text(encoding="utf-8")))
