"""Per-style duration histograms and summary statistics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .records import DataError, UtteranceRecord

TOP_BIN = 40  # last bin collects every duration >= 40
PERCENTILES = (50, 90, 95)


def nearest_rank_percentile(values: Sequence[float], pct: float) -> float:
    ordered = sorted(values)
    rank = max(1, int(np.ceil(pct / 100.0 * len(ordered))))
    return float(ordered[rank - 1])


@dataclass
class StyleSummary:
    style: str
    count: int
    mean: float
    percentiles: dict[int, float]
    maximum: int
    frac_above_25: float
    histogram: list[int]


@dataclass
class DurationReport:
    summaries: dict[str, StyleSummary]

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["style", "bin", "count"])
        for style, s in self.summaries.items():
            for b, count in enumerate(s.histogram):
                label = f"{TOP_BIN}+" if b == TOP_BIN else str(b)
                writer.writerow([style, label, count])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["style", "count", "mean", *[f"p{p}" for p in PERCENTILES], "max", "frac_above_25"])
        for style, s in self.summaries.items():
            writer.writerow([style, s.count, f"{s.mean:.4f}",
                             *[f"{s.percentiles[p]:g}" for p in PERCENTILES],
                             s.maximum, f"{s.frac_above_25:.4f}"])
        return buf.getvalue()


def duration_distribution_report(corpus: Sequence[UtteranceRecord]) -> DurationReport:
    by_style: dict[str, list[int]] = {}
    for r in corpus:
        if r.durations is None:
            continue
        by_style.setdefault(r.style.value, []).extend(int(d) for d in r.durations)
    if not by_style or not any(by_style.values()):
        raise DataError("duration report needs at least one aligned record")
    summaries = {}
    for style, values in sorted(by_style.items()):
        arr = np.asarray(values)
        hist = np.bincount(np.minimum(arr, TOP_BIN), minlength=TOP_BIN + 1)
        summaries[style] = StyleSummary(
            style=style,
            count=len(values),
            mean=float(arr.mean()),
            percentiles={p: nearest_rank_percentile(values, p) for p in PERCENTILES},
            maximum=int(arr.max()),
            frac_above_25=float((arr > 25).mean()),
            histogram=[int(c) for c in hist],
        )
    return DurationReport(summaries)
