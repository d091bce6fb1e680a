"""Classification and regression losses shared by the training stages."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..numerics import ops
from ..numerics.ops import ConfigError
from ..numerics.tensor import Tensor, as_tensor

PROB_FLOOR = 1e-12


def weighted_ce_loss(probs, labels, sigma: float) -> Tensor:
    """Cross-entropy with every non-NONE label term scaled by ``sigma``.

    ``probs`` is ``[n, 3]`` (or a single ``[3]`` row) and ``labels`` holds
    class indices.  The labelled probability is floored at 1e-12 before the
    log; the result is the mean over positions.
    """
    if sigma <= 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    if not isinstance(probs, Tensor):
        probs = np.asarray(probs)
        probs = as_tensor(probs, probs.dtype if probs.dtype.kind == "f" else None)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if probs.ndim == 1:
        probs = ops.reshape(probs, (1, probs.shape[0]))
    if probs.shape[0] != labels.shape[0]:
        raise ValueError(f"{probs.shape[0]} probability rows but {labels.shape[0]} labels")
    weights = np.where(labels == 0, 1.0, sigma).astype(probs.dtype)
    log_p = ops.log(ops.clamp_min(ops.pick(probs, labels), PROB_FLOOR))
    return ops.mean(log_p * Tensor(-weights)) if labels.size else Tensor(np.zeros((), probs.dtype))


def cross_entropy(probs, labels) -> Tensor:
    return weighted_ce_loss(probs, labels, 1.0)


def mse(pred: Tensor, target: Sequence[float] | np.ndarray) -> Tensor:
    target = np.asarray(target, dtype=pred.dtype).reshape(pred.shape)
    return ops.mean(ops.square(pred - Tensor(target)))


def l1(pred: Tensor, target: np.ndarray) -> Tensor:
    target = np.asarray(target, dtype=pred.dtype)
    if target.shape != pred.shape:
        raise ValueError(f"prediction {pred.shape} vs target {target.shape}")
    if target.size == 0:
        return ops.sum(pred)
    return ops.mean(ops.abs(pred - Tensor(target)))
