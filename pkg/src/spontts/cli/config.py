"""Run configuration: built-in defaults, a TOML file, then ``--set key=value`` overrides.

Keys are ``section.name``.  Any key not present in the defaults is
rejected, and override values are parsed as TOML scalars (so ``0.5``,
``true`` and ``"text"`` keep their types).
"""

from __future__ import annotations

import copy
import json
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Any

from ..model.config import ModelConfig
from ..numerics.ops import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_THRESHOLDS = [0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70, 0.80, 0.90, 0.95, 0.99]

SYNTHETIC_KEYS = (
    "n_utterances", "speakers", "n_phonemes", "min_phonemes", "max_phonemes", "fp_rate",
    "fp_background_rate", "fp_trigger_count", "uh_um_ratio", "mel_dim", "mel_rank", "mel_noise",
    "pitch_noise", "duration_jitter", "max_reading_duration", "max_spontaneous_duration",
    "world_seed", "id_prefix",
)


def _stage_defaults(steps: int, lr: float, **extra) -> dict:
    return {"steps": steps, "learning_rate": lr, "batch_size": 4, **extra}


DEFAULTS: dict[str, dict[str, Any]] = {
    "run": {"seed": 0},
    "model": asdict(ModelConfig.desk()),
    # None means "use the profile's value"
    "synthetic": {"profile": "reading", **{k: None for k in SYNTHETIC_KEYS}},
    "mine": {"speaker": "spon0", "timbre_size": 50, "test_fraction": 0.2},
    "source": _stage_defaults(2000, 1e-3, warmup_fraction=0.1),
    "fp": _stage_defaults(400, 1e-3, sigma=5.0),
    "rhythm": _stage_defaults(400, 1e-3),
    "speaker": _stage_defaults(200, 1e-3, speaker="target"),
    "synth": {"fp_threshold": 0.5, "fp_enabled": True, "speaker": ""},
    "eval": {"thresholds": DEFAULT_THRESHOLDS},
}


def _parse_value(text: str) -> Any:
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text  # bare word, treat as a string


def _set(config: dict, key: str, value: Any, origin: str) -> None:
    section, _, name = key.partition(".")
    if not name or section not in DEFAULTS or name not in DEFAULTS[section]:
        raise ConfigError(f"unknown config key {key!r} ({origin})")
    config[section][name] = value


def resolve_config(path: str | Path | None = None, overrides: list[str] = ()) -> dict:
    config = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file {path} not found") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config file {path}: {exc}") from exc
        for section, table in data.items():
            if not isinstance(table, dict):
                raise ConfigError(f"top-level key {section!r} must be a [section] table ({path})")
            for name, value in table.items():
                _set(config, f"{section}.{name}", value, str(path))
    for item in overrides:
        key, sep, text = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        _set(config, key.strip(), _parse_value(text.strip()), "--set")
    return config


def write_snapshot(config: dict, out_dir: str | Path, command: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "resolved_config.json"
    path.write_text(json.dumps({"command": command, **config}, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def model_config(config: dict) -> ModelConfig:
    try:
        return ModelConfig(**config["model"]).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
