"""Equal-count duration tertiles used to label phonemes fast/medium/slow."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .symbols import SpeedTag


@dataclass(frozen=True)
class SpeedBucketBoundaries:
    t1: float
    t2: float

    def __post_init__(self):
        if self.t1 > self.t2:
            raise ValueError(f"t1={self.t1} exceeds t2={self.t2}")


def _nearest_rank(sorted_values: Sequence[float], numerator: int, denominator: int):
    # rank = ceil(n * numerator / denominator) in exact integer arithmetic
    n = len(sorted_values)
    rank = max(1, -(-n * numerator // denominator))
    return sorted_values[rank - 1]


def compute_speed_buckets(durations: Iterable[float]) -> SpeedBucketBoundaries:
    values = sorted(durations)
    if not values:
        raise ValueError("cannot compute speed buckets from an empty duration list")
    return SpeedBucketBoundaries(_nearest_rank(values, 1, 3), _nearest_rank(values, 2, 3))


def assign_speed_tag(duration: float, boundaries: SpeedBucketBoundaries) -> SpeedTag:
    """Upper edges are inclusive.  When both thresholds coincide the shared
    value itself is MEDIUM, so an all-equal set lands in one bucket."""
    t1, t2 = boundaries.t1, boundaries.t2
    if t1 == t2:
        if duration < t1:
            return SpeedTag.FAST
        return SpeedTag.MEDIUM if duration == t1 else SpeedTag.SLOW
    if duration <= t1:
        return SpeedTag.FAST
    if duration <= t2:
        return SpeedTag.MEDIUM
    return SpeedTag.SLOW


def assign_speed_tags(durations, boundaries: SpeedBucketBoundaries) -> np.ndarray:
    return np.array([int(assign_speed_tag(d, boundaries)) for d in durations], dtype=np.int64)
