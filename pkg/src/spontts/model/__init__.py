"""Acoustic model: encoder, FP predictor and insertion, pitch, MoE durations, decoder."""

from .acoustic import (
    EXPERT_NAMES,
    LOSS_NAMES,
    AcousticModel,
    ContractError,
    SynthesisResult,
    VocabularyError,
    combine_expert_durations,
    copy_duration_predictor_to_experts,
    decide_fp_tags,
    duration_to_log,
    log_duration_to_frames,
)
from .config import ModelConfig, SynthesisConfig
from .losses import cross_entropy, weighted_ce_loss
from .output import read_synthesis, write_synthesis

__all__ = [
    "AcousticModel", "ContractError", "EXPERT_NAMES", "LOSS_NAMES", "ModelConfig", "SynthesisConfig",
    "SynthesisResult", "VocabularyError", "combine_expert_durations", "copy_duration_predictor_to_experts",
    "cross_entropy", "decide_fp_tags", "duration_to_log", "log_duration_to_frames", "read_synthesis",
    "weighted_ce_loss", "write_synthesis",
]
