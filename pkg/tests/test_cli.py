import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from spontts.adaptation import checkpoint_digest, read_training_log, save_checkpoint
from spontts.cli import main
from spontts.cli.config import resolve_config
from spontts.corpus import BOS, read_corpus, read_fp_dataset, read_manifest, write_corpus
from spontts.model import AcousticModel, ModelConfig, read_synthesis
from spontts.numerics import ConfigError

APPLE_TEXT = "It's called <um> right <uh> apple"
APPLE_NO_FP = "ih t s k ao l d r ay t ae p ax l".split()
APPLE_TAGS = [0, 0, 0, 0, 0, 0, 2, 0, 0, 1, 0, 0, 0, 0]


def run(*argv) -> None:
    assert main([str(a) for a in argv]) == 0


def run_capture(capsys, *argv) -> tuple[int, str, str]:
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def tree_digest(path: Path) -> str:
    h = hashlib.sha256()
    for f in sorted(p for p in path.rglob("*") if p.is_file()):
        h.update(str(f.relative_to(path)).encode())
        h.update(f.read_bytes())
    return h.hexdigest()


def line_count(path: Path) -> int:
    return sum(1 for line in path.read_text().splitlines() if line.strip())


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            resolve_config(None, ["source.stepz=3"])

    def test_typed_overrides(self, tmp_path):
        cfg_file = tmp_path / "c.toml"
        cfg_file.write_text("[fp]\nsigma = 2.0\n")
        cfg = resolve_config(cfg_file, ["source.steps=7", "synth.speaker=alice"])
        assert cfg["source"]["steps"] == 7 and cfg["fp"]["sigma"] == 2.0
        assert cfg["synth"]["speaker"] == "alice"

    def test_unknown_key_in_file(self, tmp_path):
        cfg_file = tmp_path / "c.toml"
        cfg_file.write_text("[model]\nwidth = 3\n")
        with pytest.raises(ConfigError):
            resolve_config(cfg_file)


class TestMine:
    def test_apple_pair(self, tmp_path):
        (tmp_path / "t.txt").write_text(APPLE_TEXT + "\n")
        run("mine", "--transcripts", tmp_path / "t.txt", "--out", tmp_path / "out",
            "--set", "mine.timbre_size=1")
        records = read_fp_dataset(tmp_path / "out" / "spon_fp")
        assert len(records) == 1
        assert list(records[0].pair.phonemes) == APPLE_NO_FP
        assert [int(t) for t in records[0].pair.tags] == APPLE_TAGS
        assert (tmp_path / "out" / "resolved_config.json").exists()

    def test_fp_free_transcript_warns(self, tmp_path, capsys):
        (tmp_path / "t.txt").write_text("right apple\n")
        code, out, _ = run_capture(capsys, "mine", "--transcripts", tmp_path / "t.txt", "--out", tmp_path / "o")
        assert code == 0 and "warning" in out
        assert read_fp_dataset(tmp_path / "o" / "spon_fp") == []

    def test_manifest_counts(self, tmp_path):
        run("synth-corpus", "--profile", "spontaneous", "--set", "synthetic.n_utterances=30",
            "--out", tmp_path / "spon")
        run("mine", "--corpus", tmp_path / "spon", "--set", "mine.timbre_size=5", "--out", tmp_path / "o")
        for name in ("spon_fp", "spon_fp_train", "spon_fp_test", "spon_rhythm", "spon_timbre"):
            manifest = read_manifest(tmp_path / "o" / name)
            assert manifest.record_count == line_count(tmp_path / "o" / name / "records.jsonl")
        summary = json.loads((tmp_path / "o" / "summary.json").read_text())
        assert summary["spon_fp_train"]["records"] + summary["spon_fp_test"]["records"] == \
            summary["spon_fp"]["records"]

    def test_oov(self, tmp_path, capsys):
        (tmp_path / "t.txt").write_text("right zzyzx\n")
        code, _, err = run_capture(capsys, "mine", "--transcripts", tmp_path / "t.txt", "--out", tmp_path / "o")
        assert code == 1 and err.startswith("spontts-error[oov]") and "zzyzx" in err

    def test_malformed_marker(self, tmp_path, capsys):
        (tmp_path / "t.txt").write_text("right\nright <uh apple\n")
        code, _, err = run_capture(capsys, "mine", "--transcripts", tmp_path / "t.txt", "--out", tmp_path / "o")
        assert code == 1 and err.startswith("spontts-error[parse]") and "2" in err


class TestSynthCorpus:
    def test_same_seed_same_files(self, tmp_path):
        for name in ("a", "b"):
            run("synth-corpus", "--set", "synthetic.n_utterances=6", "--seed", 3, "--out", tmp_path / name)
        assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")

    @pytest.mark.parametrize("profile", ["reading", "spontaneous"])
    def test_p95(self, tmp_path, profile):
        run("synth-corpus", "--profile", profile, "--out", tmp_path)
        rows = list(csv.DictReader((tmp_path / "duration_summary.csv").open()))
        assert len(rows) == 1
        p95 = float(rows[0]["p95"])
        assert p95 <= 25 if profile == "reading" else p95 > 25


STAGE_SETTINGS = ["--set", "source.steps=60", "--set", "fp.steps=40", "--set", "rhythm.steps=40",
                  "--set", "speaker.steps=30"]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    run("synth-corpus", "--set", "synthetic.n_utterances=12", "--out", root / "read")
    run("synth-corpus", "--profile", "spontaneous", "--set", "synthetic.n_utterances=40",
        "--seed", 1, "--out", root / "spon")
    run("mine", "--corpus", root / "spon", "--set", "mine.timbre_size=8", "--out", root / "mined")
    run("train", "--corpus", root / "read", "--out", root / "source", *STAGE_SETTINGS)
    run("adapt-fp", "--checkpoint", root / "source" / "checkpoint", "--data", root / "mined" / "spon_fp_train",
        "--out", root / "fp", *STAGE_SETTINGS)
    run("adapt-rhythm", "--checkpoint", root / "fp" / "checkpoint", "--data", root / "mined" / "spon_rhythm",
        "--out", root / "rhythm", *STAGE_SETTINGS)
    run("adapt-speaker", "--checkpoint", root / "rhythm" / "checkpoint", "--data", root / "mined" / "spon_timbre",
        "--speaker", "target", "--out", root / "speaker", *STAGE_SETTINGS)
    return root


def mean_total(rows, head: bool) -> float:
    k = max(1, len(rows) // 5)
    chunk = rows[:k] if head else rows[-k:]
    return float(np.mean([r["total"] for r in chunk]))


class TestPipeline:
    @pytest.mark.parametrize("stage", ["source", "fp", "rhythm", "speaker"])
    def test_loss_decreases(self, pipeline, stage):
        rows = read_training_log(pipeline / stage / "training_log.csv")
        assert rows and all(r["stage"] == stage for r in rows)
        assert mean_total(rows, head=False) < mean_total(rows, head=True)

    def test_snapshots_written(self, pipeline):
        for stage in ("source", "fp", "rhythm", "speaker"):
            snap = json.loads((pipeline / stage / "resolved_config.json").read_text())
            assert snap["source"]["steps"] == 60

    def test_same_seed_same_checkpoint(self, pipeline, tmp_path):
        run("train", "--corpus", pipeline / "read", "--out", tmp_path, *STAGE_SETTINGS)
        assert checkpoint_digest(tmp_path / "checkpoint") == checkpoint_digest(pipeline / "source" / "checkpoint")

    def test_rhythm_before_fp(self, pipeline, tmp_path, capsys):
        run("train", "--corpus", pipeline / "read", "--set", "source.steps=1", "--out", tmp_path / "s")
        code, _, err = run_capture(capsys, "adapt-rhythm", "--checkpoint", tmp_path / "s" / "checkpoint",
                                   "--data", pipeline / "mined" / "spon_rhythm", "--out", tmp_path / "r")
        assert code == 1 and err.startswith("spontts-error[stage-order]") and "'fp'" in err
        assert not (tmp_path / "r").exists()

    def test_adapt_fp_on_untrained_checkpoint(self, pipeline, tmp_path, capsys):
        model = AcousticModel(ModelConfig.desk(), [BOS, "ih", "t"], ["a"])
        save_checkpoint(model, tmp_path / "fresh")
        code, _, err = run_capture(capsys, "adapt-fp", "--checkpoint", tmp_path / "fresh",
                                   "--data", pipeline / "mined" / "spon_fp_train", "--out", tmp_path / "o")
        assert code == 1 and err.startswith("spontts-error[stage-order]") and "'source'" in err
        assert len(err.strip().splitlines()) == 1
        assert not (tmp_path / "o").exists()

    def test_missing_checkpoint(self, tmp_path, capsys):
        code, _, err = run_capture(capsys, "synth", "--checkpoint", tmp_path / "nope", "--phonemes", "ih t",
                                   "--out", tmp_path / "o")
        assert code == 1 and err.startswith("spontts-error[missing-input]")


class TestSynth:
    def synth(self, pipeline, out, *extra):
        symbols = " ".join(read_corpus(pipeline / "read")[0].phonemes[1:7])
        run("synth", "--checkpoint", pipeline / "speaker" / "checkpoint", "--phonemes", symbols,
            "--speaker", "target", "--out", out, *extra)
        return read_synthesis(out, "utterance")

    def test_no_fp_equals_threshold_zero(self, pipeline, tmp_path):
        a = self.synth(pipeline, tmp_path / "a", "--no-fp")
        b = self.synth(pipeline, tmp_path / "b", "--threshold", 0)
        assert a[0].tobytes() == b[0].tobytes()
        assert a[1]["fp_tags"] == b[1]["fp_tags"] and not any(b[1]["fp_tags"])

    def test_metadata_matches_mel(self, pipeline, tmp_path):
        mel, meta = self.synth(pipeline, tmp_path, "--threshold", 1)
        assert meta["frames"] == mel.shape[0] == sum(meta["durations"])
        assert mel.shape[1] == meta["mel_dim"]
        assert len(meta["extended_symbols"]) == len(meta["base_symbols"]) + sum(1 for t in meta["fp_tags"] if t)
        assert (tmp_path / "utterance.mel.f32").stat().st_size == mel.size * 4

    def test_fp_markers_rejected(self, pipeline, tmp_path, capsys):
        code, _, err = run_capture(capsys, "synth", "--checkpoint", pipeline / "speaker" / "checkpoint",
                                   "--text", "right <uh> apple", "--out", tmp_path)
        assert code == 1 and err.startswith("spontts-error[config]")

    def test_oov_text(self, pipeline, tmp_path, capsys):
        code, _, err = run_capture(capsys, "synth", "--checkpoint", pipeline / "speaker" / "checkpoint",
                                   "--text", "qwxz", "--out", tmp_path)
        assert code == 1 and err.startswith("spontts-error[oov]")


class TestEvalFp:
    def test_monotone_recall(self, pipeline, tmp_path):
        run("eval-fp", "--checkpoint", pipeline / "fp" / "checkpoint", "--data",
            pipeline / "mined" / "spon_fp_test", "--out", tmp_path / "sweep.csv")
        rows = list(csv.DictReader((tmp_path / "sweep.csv").open()))
        assert [float(r["threshold"]) for r in rows] == sorted(float(r["threshold"]) for r in rows)
        recall = [float(r["recall"]) for r in rows]
        assert all(a <= b for a, b in zip(recall, recall[1:]))
        counts = [int(r["fp_count"]) for r in rows]
        assert all(a <= b for a, b in zip(counts, counts[1:]))

    def test_all_none_threshold(self, pipeline, tmp_path):
        run("eval-fp", "--checkpoint", pipeline / "fp" / "checkpoint", "--data",
            pipeline / "mined" / "spon_fp_test", "--thresholds", "0", "--out", tmp_path / "s.csv")
        row = next(csv.DictReader((tmp_path / "s.csv").open()))
        assert float(row["recall"]) == 0.0 and int(row["fp_count"]) == 0
        gold = 1 - int(row["gold_fp"]) / int(row["positions"])
        assert float(row["accuracy"]) == pytest.approx(gold, abs=1e-6)

    def test_empty_test_set(self, pipeline, tmp_path, capsys):
        (tmp_path / "empty").mkdir()
        (tmp_path / "empty" / "records.jsonl").write_text("")
        code, _, err = run_capture(capsys, "eval-fp", "--checkpoint", pipeline / "fp" / "checkpoint",
                                   "--data", tmp_path / "empty", "--out", tmp_path / "s.csv")
        assert code == 1 and err.startswith("spontts-error[data]")


class TestReport:
    def test_histogram_sums(self, pipeline, tmp_path):
        run("report", "--corpus", pipeline / "spon", "--out", tmp_path)
        rows = list(csv.DictReader((tmp_path / "duration_histogram.csv").open()))
        total = sum(len(r.durations) for r in read_corpus(pipeline / "spon"))
        assert sum(int(r["count"]) for r in rows) == total

    def test_mixed_corpus_has_both_styles(self, pipeline, tmp_path, capsys):
        write_corpus(read_corpus(pipeline / "read") + read_corpus(pipeline / "spon"), tmp_path / "mixed")
        code, out, _ = run_capture(capsys, "report", "--corpus", tmp_path / "mixed")
        rows = list(csv.DictReader(out.splitlines()))
        assert code == 0 and {r["style"] for r in rows} == {"reading", "spontaneous"}
        assert all(r["p95"] for r in rows)

    def test_log_echo(self, pipeline, capsys):
        code, out, _ = run_capture(capsys, "report", "--log", pipeline / "rhythm" / "training_log.csv")
        last = read_training_log(pipeline / "rhythm" / "training_log.csv")[-1]
        assert code == 0 and f"total={last['total']!r}" in out
        assert f"rhythm,{len(read_training_log(pipeline / 'rhythm' / 'training_log.csv'))}" in out

    def test_missing_input(self, tmp_path, capsys):
        code, _, err = run_capture(capsys, "report", "--corpus", tmp_path / "none")
        assert code == 1 and err.count("\n") == 1 and err.startswith("spontts-error[missing-input]: ")
