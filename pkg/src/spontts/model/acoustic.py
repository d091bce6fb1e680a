"""Non-autoregressive acoustic model with FP insertion and a MoE duration predictor.

Inference path::

    encode -> predict_fp_probs -> decide_fp_tags -> insert_fp_embeddings
           -> predict_pitch -> moe_predict_duration -> regulate_length -> decode

Durations are modelled as ``log(1 + frames)``.  The three experts are mixed
in that domain with the router probabilities as weights, and inference
frames are ``max(1, round(exp(x) - 1))`` so no phoneme is dropped.

Parameter names are grouped by prefix so training stages can select them:
``phoneme_embedding``, ``speaker_embedding``, ``fp_embedding``,
``encoder.``, ``decoder.``, ``cln.`` (all conditional layer norm
generators), ``fp_predictor.``, ``pitch_predictor.``,
``duration_predictor.``, ``duration_experts.{fast,medium,slow}.`` and
``speed_router.``.
"""

from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..corpus.fp import FpSequenceError, extract_fp_pair
from ..corpus.records import DataError, FpRecord, UtteranceRecord
from ..corpus.speed import SpeedBucketBoundaries, assign_speed_tags
from ..corpus.symbols import BOS, FP_SPELLINGS, TOKEN_FOR_TAG, FpTag
from ..numerics import ops
from ..numerics.layers import Conv1d, FFTBlock, LayerNorm, Linear, ParamStore
from ..numerics.tensor import DEFAULT_DTYPE, DimensionError, StateError, Tensor, no_grad
from .config import ModelConfig, SynthesisConfig
from .losses import cross_entropy, l1, mse, weighted_ce_loss

EXPERT_NAMES = ("fast", "medium", "slow")
LOSS_NAMES = ("mel_l1", "duration_mse", "expert_mse", "pitch_mse", "fp_ce", "router_ce")


class VocabularyError(ValueError):
    def __init__(self, symbols: Sequence[str]):
        self.symbols = list(symbols)
        super().__init__("unknown phoneme symbol(s): " + ", ".join(self.symbols))


class ContractError(ValueError):
    """Raised when an input violates an operation's precondition."""


# -- pure helpers ----------------------------------------------------------

def decide_fp_tags(probs, threshold: float) -> list[FpTag]:
    """NONE where s0 > threshold, otherwise the likelier FP (ties go to UH)."""
    p = np.asarray(probs.data if isinstance(probs, Tensor) else probs, dtype=np.float64)
    p = p.reshape(-1, 3)
    tags = np.where(p[:, 1] >= p[:, 2], FpTag.UH, FpTag.UM)
    tags = np.where(p[:, 0] > threshold, FpTag.NONE, tags)
    return [FpTag(int(t)) for t in tags]


def combine_expert_durations(router_probs, expert_log_durations) -> np.ndarray:
    """Convex combination sum_i p_i * d_i over the last axis."""
    p = np.asarray(router_probs)
    d = np.asarray(expert_log_durations)
    return (p * d).sum(axis=-1)


def log_duration_to_frames(log_durations) -> np.ndarray:
    x = np.asarray(log_durations, dtype=np.float64)
    return np.maximum(1, np.rint(np.exp(x) - 1.0)).astype(np.int64)


def duration_to_log(durations) -> np.ndarray:
    return np.log1p(np.asarray(durations, dtype=np.float64))


class ConvPredictor:
    """(conv -> ReLU -> layer norm -> dropout) x 2, then a linear head."""

    def __init__(self, store: ParamStore, name: str, dim: int, channels: int, kernel: int,
                 out_dim: int, dropout: float, rng: np.random.Generator, zero_head: bool = False):
        self.conv1 = Conv1d(store, f"{name}.conv1", dim, channels, kernel, rng)
        self.norm1 = LayerNorm(store, f"{name}.norm1", channels)
        self.conv2 = Conv1d(store, f"{name}.conv2", channels, channels, kernel, rng)
        self.norm2 = LayerNorm(store, f"{name}.norm2", channels)
        self.head = Linear(store, f"{name}.head", channels, out_dim, rng, zero_init=zero_head)
        self.dropout = dropout

    def __call__(self, x: Tensor, training: bool = False, rng=None) -> Tensor:
        h = ops.dropout(self.norm1(ops.relu(self.conv1(x))), self.dropout, rng, training)
        h = ops.dropout(self.norm2(ops.relu(self.conv2(h))), self.dropout, rng, training)
        return self.head(h)


@dataclass
class PreparedExample:
    speaker: str
    base_symbols: list[str]
    tags: list[FpTag]
    durations: np.ndarray | None = None
    pitch: np.ndarray | None = None
    mel: np.ndarray | None = None


@dataclass
class SynthesisResult:
    mel: np.ndarray
    fp_tags: list[FpTag]
    durations: list[int]
    pitch: list[float]
    base_symbols: list[str]
    extended_symbols: list[str]
    fp_probs: np.ndarray | None
    speaker: str
    fp_threshold: float
    warnings: list[str] = field(default_factory=list)

    @property
    def inserted_count(self) -> int:
        return sum(t != FpTag.NONE for t in self.fp_tags)


class AcousticModel:
    def __init__(self, config: ModelConfig, vocabulary: Sequence[str], speakers: Sequence[str],
                 seed: int = 0, dtype=DEFAULT_DTYPE):
        vocabulary = list(vocabulary)
        if BOS not in vocabulary:
            vocabulary = [BOS, *vocabulary]
        if len(set(vocabulary)) != len(vocabulary):
            raise ValueError("vocabulary contains duplicate symbols")
        if not speakers:
            raise ValueError("need at least one speaker")
        config = config.validate()
        if config.phoneme_vocab_size and config.phoneme_vocab_size != len(vocabulary):
            raise ValueError(f"config expects {config.phoneme_vocab_size} symbols, got {len(vocabulary)}")
        if config.speaker_count and config.speaker_count != len(speakers):
            raise ValueError(f"config expects {config.speaker_count} speakers, got {len(speakers)}")
        self.config = config
        self.vocabulary = vocabulary
        self.symbol_index = {s: i for i, s in enumerate(vocabulary)}
        self.speakers = list(speakers)
        self.seed = seed
        self.use_moe = False
        self.speed_boundaries: SpeedBucketBoundaries | None = None
        self.stage_history: list[str] = []
        self.store = ParamStore(dtype)
        self._build(np.random.default_rng(seed))

    # -- construction ------------------------------------------------------
    def _build(self, rng: np.random.Generator) -> None:
        c, s = self.config, self.store
        h = c.hidden_dim
        emb = rng.normal(0.0, 1.0, (len(self.vocabulary), h))
        s.create("phoneme_embedding", emb)
        s.create("speaker_embedding", rng.normal(0.0, 1.0, (len(self.speakers), h)))
        fp_rows = []
        for tag in (FpTag.UH, FpTag.UM):
            rows = [self.symbol_index[p] for p in FP_SPELLINGS[tag] if p in self.symbol_index]
            fp_rows.append(emb[rows].mean(axis=0) if rows else emb.mean(axis=0))
        s.create("fp_embedding", np.stack(fp_rows))

        def blocks(prefix: str, count: int) -> list[FFTBlock]:
            return [FFTBlock(s, f"{prefix}.block{i}", h, c.attention_heads, c.ffn_filter,
                             c.conv_kernel, h, c.dropout, rng) for i in range(count)]

        self.encoder_blocks = blocks("encoder", c.encoder_blocks)

        def predictor(name: str, out_dim: int, zero_head: bool = False) -> ConvPredictor:
            return ConvPredictor(s, name, h, c.predictor_channels, c.predictor_kernel, out_dim,
                                 c.dropout, rng, zero_head)

        self.fp_predictor = predictor("fp_predictor", 3)
        self.pitch_predictor = predictor("pitch_predictor", 1)
        self.duration_predictor = predictor("duration_predictor", 1)
        self.duration_experts = [predictor(f"duration_experts.{n}", 1) for n in EXPERT_NAMES]
        self.speed_router = predictor("speed_router", 3, zero_head=True)

        self.pitch_projection = Linear(s, "decoder.pitch_proj", 1, h, rng)
        self.decoder_blocks = blocks("decoder", c.decoder_blocks)
        self.mel_head = Linear(s, "decoder.mel_head", h, c.mel_dim, rng)

    @property
    def dtype(self):
        return self.store.dtype

    def clone(self) -> "AcousticModel":
        return copy.deepcopy(self)

    def astype(self, dtype) -> "AcousticModel":
        self.store.astype(dtype)
        return self

    def parameter_digests(self) -> dict[str, str]:
        return {p.name: hashlib.sha256(np.ascontiguousarray(p.data).tobytes()).hexdigest()
                for p in self.store}

    # -- lookups -----------------------------------------------------------
    def phoneme_ids(self, symbols: Sequence[str]) -> np.ndarray:
        missing = [s for s in symbols if s not in self.symbol_index]
        if missing:
            raise VocabularyError(list(dict.fromkeys(missing)))
        return np.array([self.symbol_index[s] for s in symbols], dtype=np.int64)

    def speaker_condition(self, speaker: str | None) -> Tensor:
        """[1, hidden] speaker vector; unknown speakers get the mean of all rows."""
        table = self.store["speaker_embedding"]
        if speaker in self.speakers:
            return ops.take_rows(table, [self.speakers.index(speaker)])
        return ops.mean(table, axis=0, keepdims=True)

    def add_speaker(self, speaker: str) -> int:
        """Append an embedding row initialised to the mean of the existing rows."""
        if speaker in self.speakers:
            return self.speakers.index(speaker)
        table = self.store["speaker_embedding"].data
        self.store.replace("speaker_embedding", np.vstack([table, table.mean(axis=0, keepdims=True)]))
        self.speakers.append(speaker)
        return len(self.speakers) - 1

    def _positions(self, length: int) -> Tensor:
        return Tensor(ops.sinusoid_table(length, self.config.hidden_dim, self.dtype))

    # -- pipeline stages ---------------------------------------------------
    def encode(self, phoneme_ids, speaker: str | None, training: bool = False, rng=None) -> Tensor:
        ids = np.asarray(phoneme_ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= len(self.vocabulary)):
            raise VocabularyError([str(i) for i in ids if not 0 <= i < len(self.vocabulary)])
        x = ops.take_rows(self.store["phoneme_embedding"], ids) + self._positions(len(ids))
        cond = self.speaker_condition(speaker)
        for block in self.encoder_blocks:
            x = block(x, cond, training, rng)
        return x

    def predict_fp_probs(self, hidden: Tensor, training: bool = False, rng=None) -> Tensor:
        return ops.softmax(self.fp_predictor(hidden, training, rng))

    def insert_fp_embeddings(self, hidden: Tensor, tags: Sequence[int]) -> Tensor:
        tags = np.asarray(tags, dtype=np.int64)
        length = hidden.shape[0]
        if tags.shape != (length,):
            raise DimensionError(f"{len(tags)} tags for {length} hidden positions")
        index = []
        for i, t in enumerate(tags):
            index.append(i)
            if t != FpTag.NONE:
                index.append(length + int(t) - 1)
        if len(index) == length:
            return hidden
        pool = ops.concat([hidden, self.store["fp_embedding"]], axis=0)
        return ops.take_rows(pool, index)

    def predict_pitch(self, hidden: Tensor, training: bool = False, rng=None) -> Tensor:
        out = self.pitch_predictor(hidden, training, rng)
        return ops.reshape(out, (hidden.shape[0],))

    def route_speed(self, hidden: Tensor, training: bool = False, rng=None) -> Tensor:
        return ops.softmax(self.speed_router(hidden, training, rng))

    def expert_log_durations(self, hidden: Tensor, training: bool = False, rng=None) -> Tensor:
        """[len, 3] log-duration predictions of the fast/medium/slow experts."""
        return ops.concat([e(hidden, training, rng) for e in self.duration_experts], axis=1)

    def source_log_duration(self, hidden: Tensor, training: bool = False, rng=None) -> Tensor:
        return ops.reshape(self.duration_predictor(hidden, training, rng), (hidden.shape[0],))

    def moe_log_duration(self, hidden: Tensor, training: bool = False, rng=None) -> Tensor:
        probs = self.route_speed(hidden, training, rng)
        experts = self.expert_log_durations(hidden, training, rng)
        return ops.sum(probs * experts, axis=1)

    def predict_log_duration(self, hidden: Tensor, training: bool = False, rng=None) -> Tensor:
        if self.use_moe:
            return self.moe_log_duration(hidden, training, rng)
        return self.source_log_duration(hidden, training, rng)

    def moe_predict_duration(self, hidden: Tensor) -> np.ndarray:
        with no_grad():
            return log_duration_to_frames(self.moe_log_duration(hidden).data)

    def regulate_length(self, hidden: Tensor, durations) -> Tensor:
        d = np.asarray(durations, dtype=np.int64)
        if d.shape != (hidden.shape[0],):
            raise DimensionError(f"{d.size} durations for {hidden.shape[0]} positions")
        if (d < 0).any():
            raise ContractError("durations must be non-negative")
        return ops.take_rows(hidden, np.repeat(np.arange(d.size), d))

    def decode(self, frame_hidden: Tensor, pitch_frames, speaker: str | None,
               training: bool = False, rng=None) -> Tensor:
        pitch = np.asarray(pitch_frames.data if isinstance(pitch_frames, Tensor) else pitch_frames,
                           dtype=self.dtype)
        n = frame_hidden.shape[0]
        if pitch.shape != (n,):
            raise DimensionError(f"{pitch.size} pitch frames for {n} hidden frames")
        x = frame_hidden + self.pitch_projection(Tensor(pitch.reshape(n, 1))) + self._positions(n)
        cond = self.speaker_condition(speaker)
        for block in self.decoder_blocks:
            x = block(x, cond, training, rng)
        return self.mel_head(x)

    # -- training ----------------------------------------------------------
    def prepare(self, record: UtteranceRecord | FpRecord) -> PreparedExample:
        """Split a record into BOS-prefixed base symbols, FP tags and targets."""
        if isinstance(record, FpRecord):
            base, tags = list(record.pair.phonemes), list(record.pair.tags)
            if base[0] != BOS:
                base, tags = [BOS, *base], [FpTag.NONE, *tags]
            return PreparedExample(record.speaker, base, tags)
        record.validate()
        symbols = list(record.phonemes)
        durations = None if record.durations is None else list(record.durations)
        pitch = None if record.pitch is None else list(record.pitch)
        if symbols[0] != BOS:
            symbols = [BOS, *symbols]
            durations = None if durations is None else [0, *durations]
            pitch = None if pitch is None else [0.0, *pitch]
        try:
            pair = extract_fp_pair(symbols)
        except FpSequenceError as exc:
            raise DataError(f"{record.id}: {exc}") from exc
        return PreparedExample(
            record.speaker, list(pair.phonemes), list(pair.tags),
            None if durations is None else np.asarray(durations, dtype=np.int64),
            None if pitch is None else np.asarray(pitch, dtype=np.float64),
            record.mel,
        )

    def forward_train(self, record, losses: Iterable[str] = ("mel_l1", "duration_mse", "pitch_mse"),
                      sigma: float = 5.0, training: bool = False, rng=None) -> dict[str, Tensor]:
        """Teacher-forced loss bundle restricted to ``losses``."""
        wanted = set(losses)
        unknown = wanted - set(LOSS_NAMES)
        if unknown:
            raise ValueError(f"unknown loss name(s): {sorted(unknown)}")
        ex = self.prepare(record)
        out: dict[str, Tensor] = {}
        hidden = self.encode(self.phoneme_ids(ex.base_symbols), ex.speaker, training, rng)
        if "fp_ce" in wanted:
            out["fp_ce"] = weighted_ce_loss(self.predict_fp_probs(hidden, training, rng), ex.tags, sigma)
        if not wanted - {"fp_ce"}:
            return out
        if ex.durations is None or ex.pitch is None:
            raise DataError("duration, pitch and mel losses need an aligned record")
        ext = self.insert_fp_embeddings(hidden, ex.tags)
        log_target = duration_to_log(ex.durations)
        if "pitch_mse" in wanted:
            out["pitch_mse"] = mse(self.predict_pitch(ext, training, rng), ex.pitch)
        if "duration_mse" in wanted:
            out["duration_mse"] = mse(self.predict_log_duration(ext, training, rng), log_target)
        if wanted & {"expert_mse", "router_ce"}:
            buckets = self.speed_tags(ex.durations)
            if "expert_mse" in wanted:
                experts = self.expert_log_durations(ext, training, rng)
                out["expert_mse"] = mse(ops.pick(experts, buckets), log_target)
            if "router_ce" in wanted:
                out["router_ce"] = cross_entropy(self.route_speed(ext, training, rng), buckets)
        if "mel_l1" in wanted:
            if ex.mel is None:
                raise DataError("mel loss needs mel frames")
            frames = self.regulate_length(ext, ex.durations)
            pitch_frames = np.repeat(ex.pitch, ex.durations)
            mel = self.decode(frames, pitch_frames, ex.speaker, training, rng)
            out["mel_l1"] = l1(mel, ex.mel)
        return out

    def speed_tags(self, durations) -> np.ndarray:
        if self.speed_boundaries is None:
            raise StateError("speed bucket boundaries are not set; run rhythm adaptation first")
        return np.array([int(t) for t in assign_speed_tags(durations, self.speed_boundaries)],
                        dtype=np.int64)

    # -- evaluation --------------------------------------------------------
    def teacher_forced_mel_l1(self, records: Sequence[UtteranceRecord]) -> float:
        """Frame-weighted mean absolute mel error with ground-truth durations and pitch."""
        total, count = 0.0, 0
        with no_grad():
            for r in records:
                loss = self.forward_train(r, ("mel_l1",))["mel_l1"]
                n = r.mel.size
                total += float(loss.data) * n
                count += n
        return total / max(count, 1)

    def log_duration_mse(self, records: Sequence[UtteranceRecord], use_moe: bool | None = None) -> float:
        """Position-weighted log-domain duration MSE over aligned records."""
        previous = self.use_moe
        self.use_moe = previous if use_moe is None else use_moe
        total, count = 0.0, 0
        try:
            with no_grad():
                for r in records:
                    loss = self.forward_train(r, ("duration_mse",))["duration_mse"]
                    n = len(r.phonemes)
                    total += float(loss.data) * n
                    count += n
        finally:
            self.use_moe = previous
        return total / max(count, 1)

    # -- inference ---------------------------------------------------------
    def synthesize(self, symbols: Sequence[str], cfg: SynthesisConfig = SynthesisConfig()) -> SynthesisResult:
        base = list(symbols)
        if not base or base[0] != BOS:
            base = [BOS, *base]
        speaker = cfg.speaker if cfg.speaker is not None else self.speakers[0]
        warnings = []
        if speaker not in self.speakers:
            warnings.append(f"unknown speaker {speaker!r}; using the mean speaker embedding")
        with no_grad():
            hidden = self.encode(self.phoneme_ids(base), speaker)
            probs = None
            if cfg.fp_enabled:
                if "fp" not in self.stage_history:
                    warnings.append("FP predictor has not been adapted; predicted FPs are untrained")
                probs = self.predict_fp_probs(hidden).data
                tags = decide_fp_tags(probs, cfg.fp_threshold)
            else:
                tags = [FpTag.NONE] * len(base)
            ext = self.insert_fp_embeddings(hidden, tags)
            pitch = self.predict_pitch(ext).data
            durations = log_duration_to_frames(self.predict_log_duration(ext).data)
            frames = self.regulate_length(ext, durations)
            mel = self.decode(frames, np.repeat(pitch, durations), speaker).data
        extended = []
        for sym, tag in zip(base, tags):
            extended.append(sym)
            if tag != FpTag.NONE:
                extended.append(TOKEN_FOR_TAG[tag])
        return SynthesisResult(
            mel=np.asarray(mel, dtype=np.float32),
            fp_tags=tags,
            durations=[int(d) for d in durations],
            pitch=[float(p) for p in pitch],
            base_symbols=base,
            extended_symbols=extended,
            fp_probs=None if probs is None else np.asarray(probs),
            speaker=speaker,
            fp_threshold=cfg.fp_threshold,
            warnings=warnings,
        )


def copy_duration_predictor_to_experts(model: AcousticModel) -> None:
    """Initialise every expert as an exact copy of the source duration predictor."""
    source = {p.name[len("duration_predictor."):]: p for p in model.store.with_prefix(["duration_predictor."])}
    for name in EXPERT_NAMES:
        prefix = f"duration_experts.{name}."
        for p in model.store.with_prefix([prefix]):
            p.data = source[p.name[len(prefix):]].data.copy()
            p.zero_grad()


__all__ = [
    "AcousticModel", "ContractError", "ConvPredictor", "EXPERT_NAMES", "LOSS_NAMES",
    "PreparedExample", "SynthesisResult", "VocabularyError", "combine_expert_durations",
    "copy_duration_predictor_to_experts", "decide_fp_tags", "duration_to_log", "log_duration_to_frames",
]
