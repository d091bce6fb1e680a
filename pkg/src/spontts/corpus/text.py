"""Transcript parsing and dictionary-based grapheme-to-phoneme lookup."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence, Union

from .symbols import FP_SPELLINGS, FP_TOKENS, TOKEN_FOR_TAG, FpTag

Token = Union[str, FpTag]

_MARKERS = {"<um>": FpTag.UM, "<uh>": FpTag.UH}
_TOKEN_RE = re.compile(r"<[^<>\s]*>?|[^\s<]+")
_EDGE_PUNCT = re.compile(r"^[^\w']+|[^\w']+$")


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class OOVError(KeyError):
    def __init__(self, words: Sequence[str]):
        self.words = list(words)
        super().__init__("out-of-vocabulary words: " + ", ".join(repr(w) for w in self.words))

    def __str__(self) -> str:
        return self.args[0]


def parse_marked_text(line: str, line_number: int = 1) -> list[Token]:
    """Split a transcript line into case-folded words and FP markers.

    Markers are the literal ``<um>`` / ``<uh>``; any other ``<...>`` is an
    error.  Punctuation at word edges is stripped, internal apostrophes
    are kept.
    """
    tokens: list[Token] = []
    for match in _TOKEN_RE.finditer(line):
        text = match.group(0)
        column = match.start() + 1
        if text.startswith("<"):
            marker = _MARKERS.get(text.lower())
            if marker is None:
                raise ParseError(f"unknown marker {text!r}", line_number, column)
            tokens.append(marker)
            continue
        word = _EDGE_PUNCT.sub("", text.casefold())
        if word.strip("'"):
            tokens.append(word)
    return tokens


@dataclass
class Lexicon:
    """Word to phoneme dictionary.

    Symbols listed in ``passthrough`` (e.g. a synthetic phoneme alphabet)
    spell themselves.
    """

    entries: dict[str, tuple[str, ...]]
    passthrough: frozenset[str] = field(default_factory=frozenset)

    def __contains__(self, word: str) -> bool:
        return word in self.entries or word in self.passthrough

    def phonemes(self) -> set[str]:
        out = {p for pron in self.entries.values() for p in pron}
        return out | set(self.passthrough)


def load_lexicon(path: str | Path | None = None, passthrough: Iterable[str] = ()) -> Lexicon:
    """Read ``word ph1 ph2 ...`` lines; ``None`` loads the bundled lexicon."""
    if path is None:
        text = resources.files("spontts").joinpath("data/lexicon.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    entries: dict[str, tuple[str, ...]] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        word, *phones = line.split()
        if not phones:
            continue
        entries.setdefault(word.casefold(), tuple(phones))
    return Lexicon(entries, frozenset(passthrough))


def g2p_lookup(word: Token, lexicon: Lexicon) -> list[str]:
    if isinstance(word, FpTag):
        if word is FpTag.NONE:
            raise ValueError("NONE is not a filled pause")
        return list(FP_SPELLINGS[word])
    if not word:
        raise OOVError([word])
    if word in lexicon.entries:
        return list(lexicon.entries[word])
    if word in lexicon.passthrough:
        return [word]
    raise OOVError([word])


def phonemize(tokens: Sequence[Token], lexicon: Lexicon) -> list[str]:
    """Phoneme symbols for a token list; each FP becomes one FP token.

    All missing words are collected before raising, so one error lists
    every OOV word in the line.
    """
    symbols: list[str] = []
    missing: list[str] = []
    for tok in tokens:
        if isinstance(tok, FpTag):
            symbols.append(TOKEN_FOR_TAG[tok])
            continue
        try:
            symbols.extend(g2p_lookup(tok, lexicon))
        except OOVError:
            if tok not in missing:
                missing.append(tok)
    if missing:
        raise OOVError(missing)
    return symbols


def spell_out(symbols: Sequence[str]) -> list[str]:
    """Replace FP tokens by their phoneme spellings (the raw phoneme view)."""
    out: list[str] = []
    for s in symbols:
        if s in FP_TOKENS:
            out.extend(FP_SPELLINGS[FP_TOKENS[s]])
        else:
            out.append(s)
    return out
