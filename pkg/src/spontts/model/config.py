"""Model and synthesis configuration."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace

from ..numerics.ops import ConfigError


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int = 32
    encoder_blocks: int = 2
    decoder_blocks: int = 2
    attention_heads: int = 2
    ffn_filter: int = 64
    conv_kernel: int = 3
    mel_dim: int = 80
    phoneme_vocab_size: int = 0  # filled in from the vocabulary when 0
    speaker_count: int = 0  # filled in from the speaker list when 0
    predictor_conv_channels: int = 0  # 0 means hidden_dim
    predictor_kernel: int = 3
    dropout: float = 0.1

    @classmethod
    def desk(cls, **overrides) -> "ModelConfig":
        return replace(cls(), **overrides)

    @classmethod
    def full(cls, **overrides) -> "ModelConfig":
        base = cls(hidden_dim=256, encoder_blocks=4, decoder_blocks=4, attention_heads=2,
                   ffn_filter=1024, conv_kernel=9)
        return replace(base, **overrides)

    @property
    def predictor_channels(self) -> int:
        return self.predictor_conv_channels or self.hidden_dim

    def validate(self) -> "ModelConfig":
        if self.hidden_dim < self.attention_heads or self.hidden_dim % self.attention_heads:
            raise ConfigError("hidden_dim must be a positive multiple of attention_heads")
        for name in ("conv_kernel", "predictor_kernel"):
            if getattr(self, name) % 2 == 0:
                raise ConfigError(f"{name} must be odd")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if min(self.encoder_blocks, self.decoder_blocks) < 0 or self.mel_dim < 1:
            raise ConfigError("block counts must be >= 0 and mel_dim >= 1")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class SynthesisConfig:
    fp_threshold: float = 0.5
    fp_enabled: bool = True
    speaker: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.fp_threshold <= 1.0:
            raise ConfigError(f"fp_threshold={self.fp_threshold} is outside [0, 1]")
