from __future__ import annotations

import enum


class FpTag(enum.IntEnum):
    """Filled-pause label carried by the phoneme preceding the pause."""

    NONE = 0
    UH = 1
    UM = 2


class SpeedTag(enum.IntEnum):
    """Duration bucket; FAST holds the smallest durations."""

    FAST = 0
    MEDIUM = 1
    SLOW = 2


class Style(str, enum.Enum):
    READING = "reading"
    SPONTANEOUS = "spontaneous"


BOS = "<bos>"
UH_TOKEN = "<uh>"
UM_TOKEN = "<um>"

FP_TOKENS = {UH_TOKEN: FpTag.UH, UM_TOKEN: FpTag.UM}
TOKEN_FOR_TAG = {FpTag.UH: UH_TOKEN, FpTag.UM: UM_TOKEN}

# phoneme spellings of the two pauses
FP_SPELLINGS = {FpTag.UH: ("ah",), FpTag.UM: ("ah", "m")}


def is_fp_token(symbol: str) -> bool:
    return symbol in FP_TOKENS
