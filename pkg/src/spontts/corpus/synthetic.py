"""Seeded synthetic corpus standing in for aligned podcast/audiobook audio.

Two seeds are involved.  ``world_seed`` fixes the "language": phoneme mel
signatures, pitch effects, per-style duration profiles, the FP trigger
phonemes and speaker traits.  The sampling ``seed`` draws utterances from
that world, so corpora generated with different seeds (and different
styles) share phonemes and speakers.

Reading-style durations follow a right-tailed gamma profile clipped to
[1, 25] frames; spontaneous durations are spread evenly over [1, 40].
Filled pauses follow a planted rule: they occur only after a fixed set of
trigger phonemes (plus an optional background rate), each trigger being
tied to one pause type, with the uh:um ratio matched in expectation.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..numerics.ops import ConfigError
from .records import UtteranceRecord
from .symbols import BOS, FP_TOKENS, UH_TOKEN, UM_TOKEN, FpTag, Style


@dataclass(frozen=True)
class SyntheticConfig:
    n_utterances: int = 32
    speakers: tuple[str, ...] = ("spk0", "spk1")
    style: Style = Style.READING
    n_phonemes: int = 40
    min_phonemes: int = 12
    max_phonemes: int = 24
    fp_rate: float = 0.0
    fp_background_rate: float = 0.0
    fp_trigger_count: int = 8
    uh_um_ratio: tuple[int, int] = (2614, 338)
    mel_dim: int = 80
    mel_rank: int = 12
    mel_noise: float = 0.01
    pitch_noise: float = 0.05
    duration_jitter: int = 1
    max_reading_duration: int = 25
    max_spontaneous_duration: int = 40
    world_seed: int = 0
    id_prefix: str = ""

    def validate(self) -> "SyntheticConfig":
        for name in ("fp_rate", "fp_background_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name}={value} is outside [0, 1]")
        if self.n_utterances < 0 or not self.speakers:
            raise ConfigError("need a non-negative utterance count and at least one speaker")
        if not 1 <= self.min_phonemes <= self.max_phonemes:
            raise ConfigError("phoneme count bounds must satisfy 1 <= min <= max")
        if not 1 <= self.fp_trigger_count <= self.n_phonemes:
            raise ConfigError("fp_trigger_count must lie in [1, n_phonemes]")
        if min(self.uh_um_ratio) <= 0:
            raise ConfigError("uh_um_ratio entries must be positive")
        return self

    @classmethod
    def reading(cls, **overrides) -> "SyntheticConfig":
        return replace(cls(style=Style.READING), **overrides)

    @classmethod
    def spontaneous(cls, **overrides) -> "SyntheticConfig":
        base = cls(style=Style.SPONTANEOUS, speakers=("spon0",), fp_rate=0.4)
        return replace(base, **overrides)


def phoneme_symbols(n: int) -> list[str]:
    return [f"p{i:02d}" for i in range(n)]


@dataclass
class SyntheticWorld:
    """Fixed generative tables shared by every corpus drawn with one world seed."""

    inventory: list[str]
    codes: np.ndarray
    basis: np.ndarray
    pitch_direction: np.ndarray
    pitch_effect: np.ndarray
    reading_base: np.ndarray
    spontaneous_base: np.ndarray
    fp_rates: dict[str, tuple[FpTag, float]]
    world_seed: int
    mel_rank: int
    index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.index = {s: i for i, s in enumerate(self.inventory)}

    @classmethod
    def build(cls, cfg: SyntheticConfig) -> "SyntheticWorld":
        rng = np.random.default_rng([cfg.world_seed, 0x5EED])
        symbols = phoneme_symbols(cfg.n_phonemes)
        inventory = [BOS, *symbols, UH_TOKEN, UM_TOKEN]
        n, r = len(inventory), cfg.mel_rank
        codes = rng.normal(0.0, 1.0, (n, r))
        codes[0] *= 0.3  # leading silence is quiet
        basis = rng.normal(0.0, 0.5 / np.sqrt(r), (r, cfg.mel_dim))
        pitch_direction = rng.normal(0.0, 0.5, r)
        pitch_effect = rng.normal(0.0, 1.0, n)
        reading_base = np.clip(np.rint(rng.gamma(2.0, 3.5, n)), 1, cfg.max_reading_duration)
        spread = (rng.permutation(n) + 0.5) / n
        spontaneous_base = np.rint(1 + (cfg.max_spontaneous_duration - 1) * spread)

        triggers = list(rng.choice(symbols, size=cfg.fp_trigger_count, replace=False))
        n_uh_ratio, n_um_ratio = cfg.uh_um_ratio
        n_um = max(1, int(round(cfg.fp_trigger_count * n_um_ratio / (n_uh_ratio + n_um_ratio))))
        n_um = min(n_um, cfg.fp_trigger_count - 1) if cfg.fp_trigger_count > 1 else 1
        n_uh = cfg.fp_trigger_count - n_um
        um_scale = (n_um_ratio / n_uh_ratio) * (n_uh / n_um) if n_uh else 1.0
        fp_rates = {}
        for i, sym in enumerate(triggers):
            if i < n_um:
                fp_rates[sym] = (FpTag.UM, min(1.0, cfg.fp_rate * um_scale))
            else:
                fp_rates[sym] = (FpTag.UH, cfg.fp_rate)
        return cls(inventory, codes, basis, pitch_direction, pitch_effect,
                   reading_base, spontaneous_base, fp_rates, cfg.world_seed, r)

    def speaker_traits(self, name: str) -> tuple[np.ndarray, float, float]:
        """(mel code offset, log-F0 mean, log-F0 std) for a speaker name."""
        rng = np.random.default_rng([self.world_seed, zlib.crc32(name.encode("utf-8"))])
        offset = rng.normal(0.0, 0.5, self.mel_rank)
        return offset, float(rng.normal(5.0, 0.3)), float(rng.uniform(0.1, 0.25))

    @property
    def trigger_symbols(self) -> list[str]:
        return sorted(self.fp_rates)


def _durations(world: SyntheticWorld, cfg: SyntheticConfig, tokens: Sequence[str],
               rng: np.random.Generator) -> list[int]:
    if cfg.style is Style.READING:
        base, upper = world.reading_base, cfg.max_reading_duration
    else:
        base, upper = world.spontaneous_base, cfg.max_spontaneous_duration
    idx = [world.index[t] for t in tokens]
    jitter = rng.integers(-cfg.duration_jitter, cfg.duration_jitter + 1, size=len(idx))
    return [int(d) for d in np.clip(base[idx] + jitter, 1, upper)]


def generate_synthetic_corpus(cfg: SyntheticConfig, seed: int) -> list[UtteranceRecord]:
    cfg.validate()
    world = SyntheticWorld.build(cfg)
    rng = np.random.default_rng(seed)
    symbols = phoneme_symbols(cfg.n_phonemes)
    um_share = cfg.uh_um_ratio[1] / sum(cfg.uh_um_ratio)
    prefix = cfg.id_prefix or f"{cfg.style.value[:4]}{seed}"

    drafts = []
    for i in range(cfg.n_utterances):
        speaker = cfg.speakers[i % len(cfg.speakers)]
        length = int(rng.integers(cfg.min_phonemes, cfg.max_phonemes + 1))
        body = rng.choice(symbols, size=length)
        tokens = [BOS]
        for j, sym in enumerate([BOS, *map(str, body)]):
            if j:
                tokens.append(sym)
            rule = world.fp_rates.get(sym)
            draw = rng.random()
            if rule is not None:
                if draw < rule[1]:
                    tokens.append(UH_TOKEN if rule[0] is FpTag.UH else UM_TOKEN)
            elif draw < cfg.fp_background_rate:
                tokens.append(UM_TOKEN if rng.random() < um_share else UH_TOKEN)
        durations = _durations(world, cfg, tokens, rng)
        noise = rng.normal(0.0, 1.0, len(tokens))
        drafts.append((f"{prefix}-{i:05d}", speaker, tokens, durations, noise))

    # raw log-F0, then z-scored per speaker over this corpus
    raw_pitch = {}
    for utt_id, speaker, tokens, _, noise in drafts:
        _, mean, std = world.speaker_traits(speaker)
        effect = world.pitch_effect[[world.index[t] for t in tokens]]
        raw_pitch[utt_id] = mean + std * (effect + cfg.pitch_noise * noise)
    stats = {}
    for speaker in cfg.speakers:
        values = np.concatenate([raw_pitch[d[0]] for d in drafts if d[1] == speaker] or [np.zeros(1)])
        stats[speaker] = (values.mean(), max(values.std(), 1e-8))

    records = []
    for utt_id, speaker, tokens, durations, _ in drafts:
        mean, std = stats[speaker]
        pitch = (raw_pitch[utt_id] - mean) / std
        offset, _, _ = world.speaker_traits(speaker)
        idx = [world.index[t] for t in tokens]
        code = world.codes[idx] + pitch[:, None] * world.pitch_direction + offset
        frames = np.repeat(code @ world.basis, durations, axis=0)
        frames = frames + rng.normal(0.0, cfg.mel_noise, frames.shape)
        records.append(UtteranceRecord(
            id=utt_id,
            speaker=speaker,
            phonemes=tokens,
            durations=durations,
            pitch=[float(p) for p in pitch.astype(np.float32)],
            mel=frames.astype(np.float32),
            style=cfg.style,
        ).validate())
    return records


def fp_token_count(records: Sequence[UtteranceRecord]) -> int:
    return sum(1 for r in records for s in r.phonemes if s in FP_TOKENS)
