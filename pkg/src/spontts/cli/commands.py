"""Subcommand implementations.  Each takes parsed args plus the resolved config."""

from __future__ import annotations

import json
from pathlib import Path

from ..adaptation import (
    PREREQUISITE,
    Stage,
    StageConfig,
    StageOrderError,
    adapt_fp,
    adapt_rhythm,
    adapt_speaker,
    load_checkpoint,
    read_training_log,
    save_checkpoint,
    train_source,
    write_training_log,
)
from ..corpus import (
    DataError,
    FpTag,
    Style,
    SyntheticConfig,
    UtteranceRecord,
    build_adaptation_datasets,
    duration_distribution_report,
    generate_synthetic_corpus,
    load_lexicon,
    parse_marked_text,
    phonemize,
    read_corpus,
    read_fp_dataset,
    split_records,
    write_corpus,
    write_fp_dataset,
)
from ..model import SynthesisConfig, write_synthesis
from ..model.fp_metrics import fp_threshold_sweep, sweep_csv
from ..numerics.ops import ConfigError
from .config import SYNTHETIC_KEYS, model_config, write_snapshot


def _ensure_exists(path: str | Path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} {p} does not exist")
    return p


def cmd_mine(args, config) -> str:
    mine = config["mine"]
    if bool(args.transcripts) == bool(args.corpus):
        raise ConfigError("mine needs exactly one of --transcripts or --corpus")
    warnings: list[str] = []
    if args.corpus:
        corpus = read_corpus(_ensure_exists(args.corpus, "corpus"))
    else:
        lexicon = load_lexicon(args.lexicon)
        corpus = []
        for tpath in args.transcripts:
            path = _ensure_exists(tpath, "transcript")
            for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
                if not line.strip():
                    continue
                tokens = parse_marked_text(line, line_number=n)
                symbols = phonemize(tokens, lexicon)
                corpus.append(UtteranceRecord(f"{path.stem}-{n:05d}", mine["speaker"], symbols,
                                              style=Style.SPONTANEOUS))
        if not corpus:
            warnings.append("transcripts contained no utterances")
    out = Path(args.out)
    write_snapshot(config, out, "mine")
    ds = build_adaptation_datasets(corpus, timbre_size=mine["timbre_size"])
    train, test = split_records(ds.spon_fp, mine["test_fraction"], config["run"]["seed"])
    manifests = {
        "spon_fp": write_fp_dataset(ds.spon_fp, out / "spon_fp", "spon_fp", ds.manifests["spon_fp"].warnings),
        "spon_fp_train": write_fp_dataset(train, out / "spon_fp_train", "spon_fp_train"),
        "spon_fp_test": write_fp_dataset(test, out / "spon_fp_test", "spon_fp_test"),
        "spon_rhythm": write_corpus(ds.spon_rhythm, out / "spon_rhythm", "spon_rhythm",
                                    ds.manifests["spon_rhythm"].warnings),
        "spon_timbre": write_corpus(ds.spon_timbre, out / "spon_timbre", "spon_timbre",
                                    ds.manifests["spon_timbre"].warnings),
    }
    summary = {name: {"records": m.record_count, "fp_counts": m.fp_counts, "warnings": m.warnings}
               for name, m in manifests.items()}
    summary["warnings"] = warnings
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    lines = [f"{name}: {s['records']} records {s['fp_counts']}" for name, s in summary.items()
             if name != "warnings"]
    lines += [f"warning: {w}" for m in manifests.values() for w in m.warnings] + [f"warning: {w}" for w in warnings]
    return "\n".join(lines)


def synthetic_config(config: dict, profile: str | None = None) -> SyntheticConfig:
    section = config["synthetic"]
    profile = profile or section["profile"]
    overrides = {}
    for key in SYNTHETIC_KEYS:
        value = section[key]
        if value is not None:
            overrides[key] = tuple(value) if isinstance(value, list) else value
    if profile == "reading":
        return SyntheticConfig.reading(**overrides)
    if profile == "spontaneous":
        return SyntheticConfig.spontaneous(**overrides)
    raise ConfigError(f"unknown synthetic profile {profile!r} (reading or spontaneous)")


def cmd_synth_corpus(args, config) -> str:
    cfg = synthetic_config(config, args.profile)
    records = generate_synthetic_corpus(cfg, config["run"]["seed"])
    out = Path(args.out)
    write_snapshot(config, out, "synth-corpus")
    manifest = write_corpus(records, out, f"synthetic-{cfg.style.value}")
    report = duration_distribution_report(records)
    (out / "duration_histogram.csv").write_text(report.histogram_csv(), encoding="utf-8")
    (out / "duration_summary.csv").write_text(report.summary_csv(), encoding="utf-8")
    return f"wrote {manifest.record_count} records to {out}\n" + report.summary_csv().rstrip()


def _stage_config(config: dict, stage: Stage) -> StageConfig:
    section = dict(config[stage.value])
    section.pop("speaker", None)
    return StageConfig.default(stage, seed=config["run"]["seed"], **section)


def _load_for_stage(args, config, stage: Stage):
    ckpt = load_checkpoint(_ensure_exists(args.checkpoint, "checkpoint"), model_config(config))
    required = PREREQUISITE[stage]
    if required is not None and required.value not in ckpt.model.stage_history:
        raise StageOrderError(f"{stage.value} adaptation requires predecessor stage {required.value!r}; "
                              f"checkpoint history is {ckpt.model.stage_history or 'empty'}")
    return ckpt


def _finish_stage(result, args, config, command: str, warnings=()) -> str:
    out = Path(args.out)
    write_snapshot(config, out, command)
    manifest = save_checkpoint(result.model, out / "checkpoint", result.optimizer)
    write_training_log(result.log, out / "training_log.csv")
    lines = [f"stage {result.log[-1]['stage']}: loss {result.initial_loss:.6f} -> {result.final_loss:.6f}",
             f"checkpoint {out / 'checkpoint'} ({manifest['blob_sha256'][:16]})"]
    return "\n".join([*lines, *[f"warning: {w}" for w in warnings]])


def cmd_train(args, config) -> str:
    corpus = read_corpus(_ensure_exists(args.corpus, "corpus"))
    result = train_source(corpus, _stage_config(config, Stage.SOURCE), model_config(config),
                          seed=config["run"]["seed"])
    return _finish_stage(result, args, config, "train")


def cmd_adapt_fp(args, config) -> str:
    ckpt = _load_for_stage(args, config, Stage.FP)
    data = read_fp_dataset(_ensure_exists(args.data, "SPON-FP dataset"))
    result = adapt_fp(ckpt.model, data, _stage_config(config, Stage.FP))
    return _finish_stage(result, args, config, "adapt-fp", ckpt.warnings)


def cmd_adapt_rhythm(args, config) -> str:
    ckpt = _load_for_stage(args, config, Stage.RHYTHM)
    data = read_corpus(_ensure_exists(args.data, "SPON-RHYTHM dataset"))
    result = adapt_rhythm(ckpt.model, data, _stage_config(config, Stage.RHYTHM))
    return _finish_stage(result, args, config, "adapt-rhythm", ckpt.warnings)


def cmd_adapt_speaker(args, config) -> str:
    ckpt = _load_for_stage(args, config, Stage.SPEAKER)
    data = read_corpus(_ensure_exists(args.data, "SPON-TIMBRE dataset"))
    speaker = args.speaker or config["speaker"]["speaker"]
    result = adapt_speaker(ckpt.model, data, speaker, _stage_config(config, Stage.SPEAKER))
    return _finish_stage(result, args, config, "adapt-speaker", ckpt.warnings)


def cmd_synth(args, config) -> str:
    ckpt = load_checkpoint(_ensure_exists(args.checkpoint, "checkpoint"), model_config(config))
    if Stage.SOURCE.value not in ckpt.model.stage_history:
        raise StageOrderError("synthesis requires a checkpoint that completed stage 'source'")
    if bool(args.text) == bool(args.phonemes):
        raise ConfigError("synth needs exactly one of --text or --phonemes")
    if args.text:
        tokens = parse_marked_text(args.text)
        if any(isinstance(t, FpTag) for t in tokens):
            raise ConfigError("synth text must not contain FP markers; FPs are predicted by the model")
        symbols = phonemize(tokens, load_lexicon(args.lexicon))
    else:
        symbols = args.phonemes.split()
    synth = config["synth"]
    threshold = synth["fp_threshold"] if args.threshold is None else args.threshold
    enabled = synth["fp_enabled"] and not args.no_fp
    speaker = args.speaker or synth["speaker"] or None
    result = ckpt.model.synthesize(symbols, SynthesisConfig(threshold, enabled, speaker))
    result.warnings = ckpt.warnings + result.warnings
    out = Path(args.out)
    write_snapshot(config, out, "synth")
    mel_path, meta_path = write_synthesis(result, out, args.name, ckpt.checkpoint_id)
    lines = [f"{mel_path}: {result.mel.shape[0]} frames, {result.inserted_count} FP(s) inserted",
             f"metadata {meta_path}"]
    return "\n".join([*lines, *[f"warning: {w}" for w in result.warnings]])


def cmd_eval_fp(args, config) -> str:
    ckpt = load_checkpoint(_ensure_exists(args.checkpoint, "checkpoint"), model_config(config))
    data = read_fp_dataset(_ensure_exists(args.data, "SPON-FP test set"))
    thresholds = config["eval"]["thresholds"]
    if args.thresholds:
        thresholds = [float(t) for t in args.thresholds.split(",")]
    rows = fp_threshold_sweep(ckpt.model, data, thresholds)
    text = sweep_csv(rows)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    write_snapshot(config, out.parent, "eval-fp")
    return text.rstrip()


def cmd_report(args, config) -> str:
    if bool(args.corpus) == bool(args.log):
        raise ConfigError("report needs exactly one of --corpus or --log")
    if args.corpus:
        report = duration_distribution_report(read_corpus(_ensure_exists(args.corpus, "corpus")))
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "duration_histogram.csv").write_text(report.histogram_csv(), encoding="utf-8")
            (out / "duration_summary.csv").write_text(report.summary_csv(), encoding="utf-8")
            write_snapshot(config, out, "report")
        return report.summary_csv().rstrip()
    rows = read_training_log(_ensure_exists(args.log, "training log"))
    if not rows:
        raise DataError(f"training log {args.log} has no rows")
    last: dict[str, dict] = {}
    for row in rows:
        last[row["stage"]] = row
    lines = ["stage,steps,final_step,final_losses"]
    for stage, row in last.items():
        losses = ";".join(f"{k}={row[k]!r}" for k in row if k not in ("step", "stage", "lr"))
        count = sum(1 for r in rows if r["stage"] == stage)
        lines.append(f"{stage},{count},{row['step']},{losses}")
    return "\n".join(lines)


COMMANDS = {
    "mine": cmd_mine,
    "synth-corpus": cmd_synth_corpus,
    "train": cmd_train,
    "adapt-fp": cmd_adapt_fp,
    "adapt-rhythm": cmd_adapt_rhythm,
    "adapt-speaker": cmd_adapt_speaker,
    "synth": cmd_synth,
    "eval-fp": cmd_eval_fp,
    "report": cmd_report,
}

__all__ = ["COMMANDS", "synthetic_config"]
