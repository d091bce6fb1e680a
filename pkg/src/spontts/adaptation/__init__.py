"""Staged training and checkpoints."""

from ..model.losses import cross_entropy, weighted_ce_loss
from .checkpoint import (
    CheckpointError,
    LoadedCheckpoint,
    checkpoint_digest,
    load_checkpoint,
    read_manifest,
    save_checkpoint,
)
from .stages import (
    PREREQUISITE,
    STAGE_LOSSES,
    STAGE_PREFIXES,
    Stage,
    StageConfig,
    StageOrderError,
    StageResult,
    TrainingError,
    adapt_fp,
    adapt_rhythm,
    adapt_speaker,
    build_vocabulary,
    check_prerequisite,
    read_training_log,
    run_stage,
    train_source,
    training_log_csv,
    write_training_log,
)

__all__ = [
    "CheckpointError", "LoadedCheckpoint", "checkpoint_digest", "load_checkpoint", "read_manifest",
    "save_checkpoint",
    "PREREQUISITE", "STAGE_LOSSES", "STAGE_PREFIXES", "Stage", "StageConfig", "StageOrderError",
    "StageResult", "TrainingError", "adapt_fp", "adapt_rhythm", "adapt_speaker", "build_vocabulary",
    "check_prerequisite", "cross_entropy", "read_training_log", "run_stage", "train_source",
    "training_log_csv", "weighted_ce_loss", "write_training_log",
]
