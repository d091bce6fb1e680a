"""Differentiable operations on :class:`Tensor`.

Every function accepts tensors or array-likes and returns a new tensor.
Backward closures return one gradient per parent (``None`` where the
parent does not need one).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import DimensionError, Tensor, as_tensor, make_node


class ConfigError(ValueError):
    """Raised on invalid layer configuration (e.g. even conv kernel)."""


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _lift(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    elif isinstance(b, Tensor) and not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=b.dtype))
    return as_tensor(a), as_tensor(b)


# -- elementwise -----------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _lift(a, b)

    def bw(g):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(g, b.shape) if b.requires_grad else None,
        )

    return make_node(a.data + b.data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = _lift(a, b)

    def bw(g):
        return (
            _unbroadcast(g, a.shape) if a.requires_grad else None,
            _unbroadcast(-g, b.shape) if b.requires_grad else None,
        )

    return make_node(a.data - b.data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _lift(a, b)

    def bw(g):
        return (
            _unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
        )

    return make_node(a.data * b.data, (a, b), bw)


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return make_node(out, (x,), lambda g: (g * out,))


def log(x: Tensor) -> Tensor:
    return make_node(np.log(x.data), (x,), lambda g: (g / x.data,))


def clamp_min(x: Tensor, floor: float) -> Tensor:
    """max(x, floor); gradient is zero where the floor is active."""
    keep = x.data >= floor
    out = np.where(keep, x.data, np.asarray(floor, dtype=x.dtype))
    return make_node(out, (x,), lambda g: (g * keep,))


def relu(x: Tensor) -> Tensor:
    keep = x.data > 0
    return make_node(x.data * keep, (x,), lambda g: (g * keep,))


def abs(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    sign = np.sign(x.data)
    return make_node(np.abs(x.data), (x,), lambda g: (g * sign,))


def square(x: Tensor) -> Tensor:
    return make_node(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,))


# -- reductions ------------------------------------------------------------

def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return make_node(np.asarray(out, dtype=x.dtype), (x,), bw)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    if count == 0:
        raise DimensionError("mean over an empty axis")
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / float(count))


# -- shape -----------------------------------------------------------------

def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    return make_node(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    axes = tuple(reversed(range(x.ndim))) if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_node(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def take_rows(x: Tensor, index) -> Tensor:
    """Gather rows ``x[index]``; the backward pass scatter-adds."""
    index = np.asarray(index, dtype=np.int64)

    def bw(g):
        out = np.zeros_like(x.data)
        np.add.at(out, index, g)
        return (out,)

    return make_node(x.data[index], (x,), bw)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        pieces = np.split(g, splits, axis=axis)
        return tuple(p if t.requires_grad else None for p, t in zip(pieces, tensors))

    return make_node(np.concatenate([t.data for t in tensors], axis=axis), tensors, bw)


def pick(x: Tensor, cols) -> Tensor:
    """Select ``x[i, cols[i]]`` for every row ``i`` of a 2-D tensor."""
    cols = np.asarray(cols, dtype=np.int64)
    rows = np.arange(x.shape[0])

    def bw(g):
        out = np.zeros_like(x.data)
        out[rows, cols] = g
        return (out,)

    return make_node(x.data[rows, cols], (x,), bw)


# -- linear algebra --------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = _lift(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def bw(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return make_node(a.data @ b.data, (a, b), bw)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    out = matmul(x, weight)
    return out if bias is None else add(out, bias)


def conv1d_same(x: Tensor, kernels: Tensor, bias: Tensor | None = None) -> Tensor:
    """Length-preserving 1-D cross-correlation along the sequence axis.

    ``x`` is ``[length, ch_in]``, ``kernels`` is ``[width, ch_in, ch_out]``
    with an odd width; the sequence is zero padded by ``width // 2`` on both
    sides.
    """
    x = as_tensor(x)
    kernels = as_tensor(kernels, dtype=x.dtype)
    width, ch_in, ch_out = kernels.shape
    if width % 2 == 0:
        raise ConfigError(f"conv kernel width must be odd, got {width}")
    if x.ndim != 2 or x.shape[1] != ch_in:
        raise DimensionError(f"conv input {x.shape} does not match kernel {kernels.shape}")
    length = x.shape[0]
    if length == 0:
        node = make_node(np.zeros((0, ch_out), dtype=x.dtype), (x, kernels),
                         lambda g: (np.zeros_like(x.data), np.zeros_like(kernels.data)))
        return node if bias is None else add(node, bias)
    pad = width // 2
    padded = np.pad(x.data, ((pad, pad), (0, 0)))
    # cols[t, j, c] = padded[t + j, c]
    cols = np.lib.stride_tricks.sliding_window_view(padded, width, axis=0)[:length]
    cols = np.ascontiguousarray(np.swapaxes(cols, 1, 2)).reshape(length, width * ch_in)
    flat_w = kernels.data.reshape(width * ch_in, ch_out)
    out = cols @ flat_w

    def bw(g):
        gx = gw = None
        if x.requires_grad:
            gcols = (g @ flat_w.T).reshape(length, width, ch_in)
            gpad = np.zeros_like(padded)
            for j in range(width):
                gpad[j:j + length] += gcols[:, j, :]
            gx = gpad[pad:pad + length]
        if kernels.requires_grad:
            gw = (cols.T @ g).reshape(kernels.shape)
        return gx, gw

    node = make_node(out, (x, kernels), bw)
    return node if bias is None else add(node, bias)


# -- normalization / activations ------------------------------------------

def layer_norm(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis to zero mean and unit variance.

    ``eps`` is added to the variance inside the square root, so a constant
    row maps to zeros.
    """
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std

    def bw(g):
        gm = g.mean(axis=-1, keepdims=True)
        gxm = (g * xhat).mean(axis=-1, keepdims=True)
        return (inv_std * (g - gm - xhat * gxm),)

    return make_node(xhat.astype(x.dtype, copy=False), (x,), bw)


def layer_norm_affine(x: Tensor, gamma, beta, eps: float = 1e-5) -> Tensor:
    return add(mul(layer_norm(x, eps), gamma), beta)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return make_node(s, (x,), bw)


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout; identity outside training."""
    if not training or rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return mul(x, Tensor(keep))


def sinusoid_table(length: int, dim: int, dtype=np.float32) -> np.ndarray:
    position = np.arange(length, dtype=np.float64)[:, None]
    rates = np.power(10000.0, -(2 * (np.arange(dim) // 2)) / dim)
    angles = position * rates[None, :]
    table = np.where(np.arange(dim) % 2 == 0, np.sin(angles), np.cos(angles))
    return table.astype(dtype)
