"""Parameterized layers used by the acoustic model.

Layers register their :class:`Parameter` objects in a shared
:class:`ParamStore` under dotted names, so training stages can select or
freeze them by name prefix.  Conditional layer norm generators are kept
under a separate top-level ``cln.`` namespace for that reason.
"""

from __future__ import annotations

from collections import OrderedDict
from typing import Iterable, Iterator

import numpy as np

from . import ops
from .ops import ConfigError
from .tensor import DEFAULT_DTYPE, DimensionError, Parameter, Tensor


class ParamStore:
    """Ordered mapping from unique dotted names to parameters."""

    def __init__(self, dtype=DEFAULT_DTYPE):
        self._params: "OrderedDict[str, Parameter]" = OrderedDict()
        self.dtype = np.dtype(dtype)

    def create(self, name: str, value: np.ndarray) -> Parameter:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        p = Parameter(value, name, dtype=self.dtype)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def with_prefix(self, prefixes: Iterable[str]) -> list[Parameter]:
        prefixes = tuple(prefixes)
        return [p for name, p in self._params.items() if name.startswith(prefixes)]

    def zero_grad(self) -> None:
        for p in self:
            p.zero_grad()

    def replace(self, name: str, value: np.ndarray) -> None:
        """Swap the array behind ``name`` (shape may change, e.g. a new speaker row)."""
        p = self._params[name]
        p.data = np.array(value, dtype=self.dtype)
        p.grad = np.zeros_like(p.data)

    def astype(self, dtype) -> None:
        self.dtype = np.dtype(dtype)
        for p in self:
            p.data = p.data.astype(dtype)
            p.grad = np.zeros_like(p.data)


def _normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    return rng.normal(0.0, std, size=shape)


class Linear:
    def __init__(self, store: ParamStore, name: str, d_in: int, d_out: int,
                 rng: np.random.Generator, bias: bool = True, zero_init: bool = False):
        w = np.zeros((d_in, d_out)) if zero_init else _normal(rng, (d_in, d_out), 1.0 / np.sqrt(d_in))
        self.weight = store.create(f"{name}.w", w)
        self.bias = store.create(f"{name}.b", np.zeros(d_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class Conv1d:
    def __init__(self, store: ParamStore, name: str, ch_in: int, ch_out: int, width: int,
                 rng: np.random.Generator):
        if width % 2 == 0:
            raise ConfigError(f"conv kernel width must be odd, got {width}")
        std = 1.0 / np.sqrt(width * ch_in)
        self.weight = store.create(f"{name}.w", _normal(rng, (width, ch_in, ch_out), std))
        self.bias = store.create(f"{name}.b", np.zeros(ch_out))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv1d_same(x, self.weight, self.bias)


class LayerNorm:
    def __init__(self, store: ParamStore, name: str, dim: int):
        self.gamma = store.create(f"{name}.gamma", np.ones(dim))
        self.beta = store.create(f"{name}.beta", np.zeros(dim))

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm_affine(x, self.gamma, self.beta)


class ConditionalLayerNorm:
    """Layer norm whose scale and shift are linear functions of a speaker vector."""

    def __init__(self, store: ParamStore, name: str, dim: int, cond_dim: int,
                 rng: np.random.Generator):
        std = 0.1 / np.sqrt(cond_dim)
        self.scale_w = store.create(f"cln.{name}.scale.w", _normal(rng, (cond_dim, dim), std))
        self.scale_b = store.create(f"cln.{name}.scale.b", np.ones(dim))
        self.shift_w = store.create(f"cln.{name}.shift.w", _normal(rng, (cond_dim, dim), std))
        self.shift_b = store.create(f"cln.{name}.shift.b", np.zeros(dim))

    def __call__(self, x: Tensor, condition: Tensor) -> Tensor:
        scale = ops.linear(condition, self.scale_w, self.scale_b)
        shift = ops.linear(condition, self.shift_w, self.shift_b)
        return ops.layer_norm_affine(x, scale, shift)


class MultiHeadAttention:
    """Scaled dot-product self-attention with ``heads`` heads."""

    def __init__(self, store: ParamStore, name: str, dim: int, heads: int,
                 rng: np.random.Generator):
        if dim % heads:
            raise ConfigError(f"hidden size {dim} not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.q = Linear(store, f"{name}.q", dim, dim, rng)
        self.k = Linear(store, f"{name}.k", dim, dim, rng)
        self.v = Linear(store, f"{name}.v", dim, dim, rng)
        self.out = Linear(store, f"{name}.o", dim, dim, rng)

    def _split(self, x: Tensor) -> Tensor:
        length = x.shape[0]
        x = ops.reshape(x, (length, self.heads, self.dim // self.heads))
        return ops.transpose(x, (1, 0, 2))

    def weights(self, x: Tensor) -> Tensor:
        q, k = self._split(self.q(x)), self._split(self.k(x))
        scores = ops.matmul(q, ops.transpose(k, (0, 2, 1)))
        return ops.softmax(scores * (1.0 / np.sqrt(self.dim // self.heads)), axis=-1)

    def __call__(self, x: Tensor) -> Tensor:
        length = x.shape[0]
        attn = self.weights(x)
        ctx = ops.matmul(attn, self._split(self.v(x)))
        ctx = ops.reshape(ops.transpose(ctx, (1, 0, 2)), (length, self.dim))
        return self.out(ctx)


class ConvFeedForward:
    def __init__(self, store: ParamStore, name: str, dim: int, filter_size: int, width: int,
                 rng: np.random.Generator):
        self.conv1 = Conv1d(store, f"{name}.conv1", dim, filter_size, width, rng)
        self.conv2 = Conv1d(store, f"{name}.conv2", filter_size, dim, 1, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.conv2(ops.relu(self.conv1(x)))


class FFTBlock:
    """Feed-forward Transformer block: attention and conv FFN sublayers,
    each with a residual connection followed by conditional layer norm."""

    def __init__(self, store: ParamStore, name: str, dim: int, heads: int, filter_size: int,
                 width: int, cond_dim: int, dropout: float, rng: np.random.Generator):
        self.dim = dim
        self.attn = MultiHeadAttention(store, f"{name}.attn", dim, heads, rng)
        self.attn_norm = ConditionalLayerNorm(store, f"{name}.attn_norm", dim, cond_dim, rng)
        self.ffn = ConvFeedForward(store, f"{name}.ffn", dim, filter_size, width, rng)
        self.ffn_norm = ConditionalLayerNorm(store, f"{name}.ffn_norm", dim, cond_dim, rng)
        self.dropout = dropout

    def __call__(self, x: Tensor, condition: Tensor, training: bool = False,
                 rng: np.random.Generator | None = None) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise DimensionError(f"block expects [len, {self.dim}], got {x.shape}")
        if x.shape[0] == 0:
            return x
        a = ops.dropout(self.attn(x), self.dropout, rng, training)
        x = self.attn_norm(x + a, condition)
        f = ops.dropout(self.ffn(x), self.dropout, rng, training)
        return self.ffn_norm(x + f, condition)


def transformer_ffn_block(x: Tensor, block: FFTBlock, speaker_condition: Tensor) -> Tensor:
    """Evaluation-mode application of one feed-forward Transformer block."""
    return block(x, speaker_condition, training=False)
