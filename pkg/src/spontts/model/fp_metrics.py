"""Threshold sweeps for the FP predictor.

Token level: every position of every utterance is one 3-class decision.
A true positive is a non-NONE prediction equal to the gold tag, so
``recall`` and ``precision`` are class-matched; ``det_*`` columns score
FP presence only (any FP vs none).  Sentence level asks whether an
utterance contains at least one FP.
"""

from __future__ import annotations

import csv
import io
from typing import Sequence

import numpy as np

from ..corpus.records import DataError, FpRecord
from ..numerics.tensor import no_grad
from .acoustic import AcousticModel, decide_fp_tags

COLUMNS = ("threshold", "recall", "precision", "accuracy", "fp_count", "det_recall", "det_precision",
           "sent_recall", "sent_precision", "sent_accuracy", "positions", "gold_fp", "sentences")


def _ratio(num: int, den: int) -> float:
    return num / den if den else float("nan")


def fp_probabilities(model: AcousticModel, records: Sequence[FpRecord]) -> list[tuple[np.ndarray, np.ndarray]]:
    """(probs [len, 3], gold tags) per record, BOS included."""
    out = []
    with no_grad():
        for r in records:
            ex = model.prepare(r)
            hidden = model.encode(model.phoneme_ids(ex.base_symbols), ex.speaker)
            out.append((model.predict_fp_probs(hidden).data.astype(np.float64),
                        np.asarray([int(t) for t in ex.tags])))
    return out


def score_threshold(scored: Sequence[tuple[np.ndarray, np.ndarray]], threshold: float) -> dict:
    gold = np.concatenate([g for _, g in scored])
    pred = np.concatenate([np.asarray([int(t) for t in decide_fp_tags(p, threshold)]) for p, _ in scored])
    tp = int(((pred == gold) & (gold != 0)).sum())
    det_tp = int(((pred != 0) & (gold != 0)).sum())
    n_pred, n_gold = int((pred != 0).sum()), int((gold != 0).sum())
    sent_gold, sent_pred, offset = [], [], 0
    for _, g in scored:
        sent_gold.append(bool((g != 0).any()))
        sent_pred.append(bool((pred[offset:offset + len(g)] != 0).any()))
        offset += len(g)
    sg, sp = np.asarray(sent_gold), np.asarray(sent_pred)
    return {
        "threshold": float(threshold),
        "recall": _ratio(tp, n_gold),
        "precision": _ratio(tp, n_pred),
        "accuracy": float((pred == gold).mean()),
        "fp_count": n_pred,
        "det_recall": _ratio(det_tp, n_gold),
        "det_precision": _ratio(det_tp, n_pred),
        "sent_recall": _ratio(int((sg & sp).sum()), int(sg.sum())),
        "sent_precision": _ratio(int((sg & sp).sum()), int(sp.sum())),
        "sent_accuracy": float((sg == sp).mean()),
        "positions": int(gold.size),
        "gold_fp": n_gold,
        "sentences": len(scored),
    }


def fp_threshold_sweep(model: AcousticModel, records: Sequence[FpRecord],
                       thresholds: Sequence[float]) -> list[dict]:
    if not records:
        raise DataError("FP evaluation needs a non-empty test set")
    scored = fp_probabilities(model, records)
    return [score_threshold(scored, t) for t in thresholds]


def sweep_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([row[c] if isinstance(row[c], int) else f"{row[c]:.6f}" for c in COLUMNS])
    return buf.getvalue()
