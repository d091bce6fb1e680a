"""Staged training: source model, FP predictor, rhythm (router + experts + pitch), speaker.

Every stage works on a copy of the incoming model, optimises only the
parameters under its trainable name prefixes and leaves every other tensor
bit-identical.  Frozen parameters are detached for the duration of the
stage, so the graph below them is never recorded.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from ..corpus.records import DataError, FpRecord, UtteranceRecord
from ..corpus.speed import compute_speed_buckets
from ..corpus.symbols import BOS, FP_TOKENS, SpeedTag
from ..model.acoustic import AcousticModel, copy_duration_predictor_to_experts
from ..model.config import ModelConfig
from ..numerics.ops import ConfigError
from ..numerics.optim import Adam
from ..numerics.tensor import backward


class Stage(str, Enum):
    SOURCE = "source"
    FP = "fp"
    RHYTHM = "rhythm"
    SPEAKER = "speaker"


class StageOrderError(RuntimeError):
    pass


class TrainingError(RuntimeError):
    """Raised when a loss stops being finite."""


STAGE_PREFIXES: dict[Stage, tuple[str, ...]] = {
    Stage.SOURCE: ("phoneme_embedding", "speaker_embedding", "encoder.", "decoder.", "cln.",
                   "pitch_predictor.", "duration_predictor."),
    Stage.FP: ("fp_predictor.",),
    Stage.RHYTHM: ("speed_router.", "duration_experts.", "pitch_predictor.", "fp_embedding"),
    Stage.SPEAKER: ("cln.", "speaker_embedding"),
}

STAGE_LOSSES: dict[Stage, tuple[str, ...]] = {
    Stage.SOURCE: ("mel_l1", "duration_mse", "pitch_mse"),
    Stage.FP: ("fp_ce",),
    Stage.RHYTHM: ("router_ce", "expert_mse", "pitch_mse", "mel_l1"),
    Stage.SPEAKER: ("mel_l1",),
}

PREREQUISITE: dict[Stage, Stage | None] = {
    Stage.SOURCE: None,
    Stage.FP: Stage.SOURCE,
    Stage.RHYTHM: Stage.FP,
    Stage.SPEAKER: Stage.RHYTHM,
}

DEFAULT_STEPS = {Stage.SOURCE: 2000, Stage.FP: 400, Stage.RHYTHM: 400, Stage.SPEAKER: 200}
# 1e-4 leaves the router and FP heads far from converged within the desk step
# counts, so adaptation stages default to the source rate.
DEFAULT_ADAPTATION_LR = 1e-3


@dataclass(frozen=True)
class StageConfig:
    stage: Stage
    steps: int
    learning_rate: float
    batch_size: int = 4
    sigma: float = 5.0
    trainable_prefixes: tuple[str, ...] = ()
    seed: int = 0
    warmup_fraction: float = 0.0
    losses: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "stage", Stage(self.stage))
        object.__setattr__(self, "losses", tuple(self.losses) or STAGE_LOSSES[self.stage])
        if not self.trainable_prefixes:
            object.__setattr__(self, "trainable_prefixes", STAGE_PREFIXES[self.stage])
        else:
            object.__setattr__(self, "trainable_prefixes", tuple(self.trainable_prefixes))

    @classmethod
    def default(cls, stage: Stage | str, **overrides) -> "StageConfig":
        stage = Stage(stage)
        if stage is Stage.SOURCE:
            base = cls(stage, DEFAULT_STEPS[stage], 1e-3, warmup_fraction=0.1)
        else:
            base = cls(stage, DEFAULT_STEPS[stage], DEFAULT_ADAPTATION_LR)
        return replace(base, **overrides)

    def validate(self) -> "StageConfig":
        if self.steps <= 0:
            raise ConfigError("steps must be positive")
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        if self.batch_size <= 0 or self.learning_rate <= 0:
            raise ConfigError("batch_size and learning_rate must be positive")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ConfigError("warmup_fraction must lie in [0, 1)")
        return self

    def learning_rate_at(self, step: int) -> float:
        warmup = int(self.steps * self.warmup_fraction)
        if warmup and step < warmup:
            return self.learning_rate * (step + 1) / warmup
        return self.learning_rate


@dataclass
class StageResult:
    model: AcousticModel
    optimizer: Adam
    log: list[dict] = field(default_factory=list)

    @property
    def initial_loss(self) -> float:
        return self.log[0]["total"]

    @property
    def final_loss(self) -> float:
        return self.log[-1]["total"]


def check_prerequisite(model: AcousticModel, stage: Stage) -> None:
    required = PREREQUISITE[Stage(stage)]
    if required is not None and required.value not in model.stage_history:
        raise StageOrderError(
            f"stage {Stage(stage).value!r} requires a model that completed {required.value!r} "
            f"(history: {model.stage_history or 'empty'})")


def run_stage(model: AcousticModel, records: Sequence, cfg: StageConfig,
              grad_masks: dict[str, np.ndarray] | None = None) -> StageResult:
    """Generic loop: mini-batches drawn from per-epoch shuffles, summed stage losses, Adam."""
    cfg.validate()
    if not records:
        raise DataError(f"{cfg.stage.value} stage needs at least one record")
    params = model.store.with_prefix(cfg.trainable_prefixes)
    if not params:
        raise ConfigError(f"trainable prefixes {cfg.trainable_prefixes} match no parameter")
    trainable = {p.name for p in params}
    for p in model.store:
        p.requires_grad = p.name in trainable
    optimizer = Adam(params, learning_rate=cfg.learning_rate, grad_masks=grad_masks or {})
    losses = cfg.losses
    rng = np.random.default_rng(cfg.seed)
    order: list[int] = []
    log = []
    try:
        for step in range(cfg.steps):
            optimizer.zero_grad()
            totals = dict.fromkeys(losses, 0.0)
            batch = []
            while len(batch) < cfg.batch_size:
                if not order:
                    order = list(rng.permutation(len(records)))
                batch.append(records[order.pop()])
            for record in batch:
                bundle = model.forward_train(record, losses, sigma=cfg.sigma, training=True, rng=rng)
                total = None
                for name in losses:
                    term = bundle[name]
                    totals[name] += float(term.data) / len(batch)
                    total = term if total is None else total + term
                if total.requires_grad:
                    backward(total * (1.0 / len(batch)))
            row = {"step": step, "stage": cfg.stage.value, "lr": cfg.learning_rate_at(step), **totals,
                   "total": sum(totals.values())}
            if not all(math.isfinite(v) for v in totals.values()):
                raise TrainingError(f"{cfg.stage.value} step {step}: non-finite loss {totals}")
            log.append(row)
            optimizer.step(cfg.learning_rate_at(step))
    finally:
        for p in model.store:
            p.requires_grad = True
            p.zero_grad()
    model.stage_history.append(cfg.stage.value)
    return StageResult(model, optimizer, log)


def build_vocabulary(records: Sequence[UtteranceRecord]) -> list[str]:
    symbols = {s for r in records for s in r.phonemes if s not in FP_TOKENS and s != BOS}
    return [BOS, *sorted(symbols)]


def train_source(corpus: Sequence[UtteranceRecord], cfg: StageConfig | None = None,
                 model_config: ModelConfig | None = None, vocabulary: Sequence[str] | None = None,
                 speakers: Sequence[str] | None = None, seed: int = 0) -> StageResult:
    """Train every source parameter on mel L1 + single-predictor duration MSE + pitch MSE."""
    cfg = cfg or StageConfig.default(Stage.SOURCE)
    if not corpus:
        raise DataError("source training needs a non-empty corpus")
    for r in corpus:
        if not r.aligned:
            raise DataError(f"{r.id}: source training needs durations, pitch and mel")
    vocabulary = list(vocabulary) if vocabulary is not None else build_vocabulary(corpus)
    speakers = list(speakers) if speakers is not None else sorted({r.speaker for r in corpus})
    model = AcousticModel(model_config or ModelConfig.desk(), vocabulary, speakers, seed=seed)
    return run_stage(model, list(corpus), cfg)


def adapt_fp(model: AcousticModel, spon_fp: Sequence[FpRecord], cfg: StageConfig | None = None) -> StageResult:
    """Fine-tune the FP predictor alone with sigma-weighted cross-entropy."""
    cfg = cfg or StageConfig.default(Stage.FP)
    check_prerequisite(model, Stage.FP)
    if not spon_fp:
        raise DataError("SPON-FP is empty; FP adaptation needs utterances containing filled pauses")
    return run_stage(model.clone(), list(spon_fp), cfg)


def rhythm_buckets(model: AcousticModel, spon_rhythm: Sequence[UtteranceRecord]):
    durations = [d for r in spon_rhythm for d in r.durations]
    if not durations:
        raise DataError("SPON-RHYTHM holds no durations")
    boundaries = compute_speed_buckets(durations)
    previous = model.speed_boundaries
    model.speed_boundaries = boundaries
    try:
        counts = np.bincount(model.speed_tags(durations), minlength=3)
    finally:
        model.speed_boundaries = previous
    for tag in SpeedTag:
        if counts[tag] == 0:
            raise DataError(f"speed bucket {tag.name} has no positions in SPON-RHYTHM "
                            f"(boundaries t1={boundaries.t1}, t2={boundaries.t2})")
    return boundaries


def adapt_rhythm(model: AcousticModel, spon_rhythm: Sequence[UtteranceRecord],
                 cfg: StageConfig | None = None) -> StageResult:
    """Fit speed buckets, copy the source duration predictor into three experts,
    then train router, experts (each on its own bucket) and pitch predictor."""
    cfg = cfg or StageConfig.default(Stage.RHYTHM)
    check_prerequisite(model, Stage.RHYTHM)
    records = [r for r in spon_rhythm if r.aligned]
    if not records:
        raise DataError("SPON-RHYTHM is empty")
    adapted = model.clone()
    adapted.speed_boundaries = rhythm_buckets(adapted, records)
    copy_duration_predictor_to_experts(adapted)
    adapted.use_moe = True
    return run_stage(adapted, records, cfg)


def adapt_speaker(model: AcousticModel, spon_timbre: Sequence[UtteranceRecord], speaker: str,
                  cfg: StageConfig | None = None) -> StageResult:
    """Fine-tune conditional layer norm generators and one speaker row on mel L1.

    An unseen ``speaker`` gets a new embedding row initialised to the mean of
    the existing rows.  Records are relabelled to ``speaker``.
    """
    cfg = cfg or StageConfig.default(Stage.SPEAKER)
    check_prerequisite(model, Stage.SPEAKER)
    records = [replace(r, speaker=speaker) for r in spon_timbre if r.aligned]
    if not records:
        raise DataError("SPON-TIMBRE is empty")
    adapted = model.clone()
    row = adapted.add_speaker(speaker)
    table = adapted.store["speaker_embedding"].data
    mask = np.zeros_like(table)
    mask[row] = 1.0
    return run_stage(adapted, records, cfg, grad_masks={"speaker_embedding": mask})


LOG_COLUMNS = ("step", "stage", "lr", "mel_l1", "duration_mse", "expert_mse", "pitch_mse",
               "fp_ce", "router_ce", "total")


def training_log_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LOG_COLUMNS)
    for row in rows:
        writer.writerow([row.get(c, "") if c in ("step", "stage") else
                         (repr(float(row[c])) if c in row else "") for c in LOG_COLUMNS])
    return buf.getvalue()


def write_training_log(rows: Sequence[dict], path: str | Path) -> None:
    Path(path).write_text(training_log_csv(rows), encoding="utf-8")


def read_training_log(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = []
        for raw in csv.DictReader(fh):
            row = {"step": int(raw["step"]), "stage": raw["stage"]}
            for c in LOG_COLUMNS[2:]:
                if raw.get(c):
                    row[c] = float(raw[c])
            rows.append(row)
    return rows
