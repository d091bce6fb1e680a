"""Construction of the three adaptation datasets from a spontaneous corpus."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fp import FpSequenceError, extract_fp_pair
from .records import (
    CorpusManifest,
    DataError,
    FpRecord,
    UtteranceRecord,
    manifest_for_fp_records,
    manifest_for_records,
)
from .symbols import Style

DEFAULT_TIMBRE_SIZE = 50


@dataclass
class AdaptationDatasets:
    spon_fp: list[FpRecord]
    spon_rhythm: list[UtteranceRecord]
    spon_timbre: list[UtteranceRecord]
    manifests: dict[str, CorpusManifest] = field(default_factory=dict)


def build_adaptation_datasets(
    corpus: Sequence[UtteranceRecord],
    timbre_size: int = DEFAULT_TIMBRE_SIZE,
    timbre_speaker: str | None = None,
) -> AdaptationDatasets:
    """Split a spontaneous corpus into SPON-FP, SPON-RHYTHM and SPON-TIMBRE.

    SPON-FP keeps only utterances with at least one pause.  Records lacking
    durations/pitch/mel (transcript-only input) contribute to SPON-FP only.
    SPON-TIMBRE takes the first ``timbre_size`` aligned records, optionally
    restricted to one speaker.
    """
    for r in corpus:
        if r.style is not Style.SPONTANEOUS:
            raise DataError(f"{r.id}: adaptation datasets need spontaneous records, got {r.style.value}")

    fp_records: list[FpRecord] = []
    fp_warnings: list[str] = []
    for r in corpus:
        try:
            pair = extract_fp_pair(r.phonemes)
        except FpSequenceError as exc:
            fp_warnings.append(f"{r.id}: skipped ({exc})")
            continue
        if pair.fp_count:
            fp_records.append(FpRecord(r.id, r.speaker, pair))
    if not fp_records:
        fp_warnings.append("no utterance contains a filled pause; SPON-FP is empty")

    aligned = [r for r in corpus if r.aligned]
    rhythm = list(aligned)
    pool = [r for r in aligned if timbre_speaker is None or r.speaker == timbre_speaker]
    timbre = pool[:timbre_size]

    manifests = {
        "spon_fp": manifest_for_fp_records("spon_fp", fp_records),
        "spon_rhythm": manifest_for_records("spon_rhythm", rhythm),
        "spon_timbre": manifest_for_records("spon_timbre", timbre),
    }
    manifests["spon_fp"].warnings.extend(fp_warnings)
    if not rhythm:
        manifests["spon_rhythm"].warnings.append("no aligned records; SPON-RHYTHM is empty")
    if len(timbre) < timbre_size:
        manifests["spon_timbre"].warnings.append(
            f"only {len(timbre)} aligned records available for SPON-TIMBRE (wanted {timbre_size})")
    return AdaptationDatasets(fp_records, rhythm, timbre, manifests)


def split_records(records: Sequence, test_fraction: float, seed: int = 0) -> tuple[list, list]:
    """Deterministic shuffled train/test split."""
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError("test_fraction must lie in [0, 1)")
    order = np.random.default_rng(seed).permutation(len(records))
    n_test = int(round(len(records) * test_fraction))
    test = [records[i] for i in sorted(order[:n_test])]
    train = [records[i] for i in sorted(order[n_test:])]
    return train, test
