from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Parameter, Tensor, backward


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    """|a - n| / max(|a|, |n|, floor); the floor keeps near-zero coordinates meaningful."""
    scale = max(abs(analytic), abs(numeric), floor)
    return abs(analytic - numeric) / scale


def gradient_check(
    forward_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    probe_count: int = 20,
    fd_epsilon: float = 1e-5,
    seed: int = 0,
) -> float:
    """Worst relative error between backprop and central differences.

    ``forward_fn`` must rebuild the scalar loss from the current parameter
    values on every call (and be deterministic).  ``probe_count``
    coordinates are sampled per parameter; smaller parameters are checked
    exhaustively.
    """
    for p in params:
        if p.dtype != np.float64:
            raise TypeError(f"gradient check needs float64 tensors, got {p.dtype}")
    rng = np.random.default_rng(seed)

    for p in params:
        p.grad = np.zeros_like(p.data)
    backward(forward_fn())
    analytic = {id(p): p.grad.copy() for p in params}

    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        if flat.size <= probe_count:
            coords = np.arange(flat.size)
        else:
            coords = rng.choice(flat.size, size=probe_count, replace=False)
        grad = analytic[id(p)].reshape(-1)
        for c in coords:
            original = flat[c]
            flat[c] = original + fd_epsilon
            up = forward_fn().item()
            flat[c] = original - fd_epsilon
            down = forward_fn().item()
            flat[c] = original
            numeric = (up - down) / (2.0 * fd_epsilon)
            worst = max(worst, relative_error(float(grad[c]), numeric))
    for p in params:
        p.grad = np.zeros_like(p.data) if isinstance(p, Parameter) else None
    return worst
