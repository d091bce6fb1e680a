"""Filled-pause tag extraction and its inverse."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .symbols import BOS, FP_TOKENS, TOKEN_FOR_TAG, FpTag


class FpSequenceError(ValueError):
    """Raised when a phoneme sequence holds two adjacent filled pauses."""


@dataclass(frozen=True)
class FpPair:
    """Phonemes with pauses removed plus one tag per phoneme."""

    phonemes: tuple[str, ...]
    tags: tuple[FpTag, ...]

    def __post_init__(self):
        object.__setattr__(self, "phonemes", tuple(self.phonemes))
        object.__setattr__(self, "tags", tuple(FpTag(t) for t in self.tags))
        if len(self.phonemes) != len(self.tags):
            raise ValueError(
                f"{len(self.phonemes)} phonemes but {len(self.tags)} tags"
            )

    @property
    def fp_count(self) -> int:
        return sum(1 for t in self.tags if t != FpTag.NONE)


def extract_fp_pair(symbols: Sequence[str]) -> FpPair:
    """Remove FP tokens; tag the phoneme right before each one.

    An utterance-initial pause attaches to a :data:`BOS` sentinel, which is
    prepended when the sequence does not already start with one.  Two
    pauses in a row cannot be expressed as tags and raise
    :class:`FpSequenceError`.
    """
    symbols = list(symbols)
    if symbols and symbols[0] in FP_TOKENS:
        symbols.insert(0, BOS)
    phonemes: list[str] = []
    tags: list[FpTag] = []
    for i, sym in enumerate(symbols):
        tag = FP_TOKENS.get(sym)
        if tag is None:
            phonemes.append(sym)
            tags.append(FpTag.NONE)
        elif tags[-1] != FpTag.NONE:
            raise FpSequenceError(f"consecutive filled pauses at position {i}")
        else:
            tags[-1] = tag
    return FpPair(tuple(phonemes), tuple(tags))


def reinsert_fp(pair: FpPair) -> list[str]:
    out: list[str] = []
    for sym, tag in zip(pair.phonemes, pair.tags):
        out.append(sym)
        if tag != FpTag.NONE:
            out.append(TOKEN_FOR_TAG[tag])
    return out
