"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .tensor import Parameter, StateError


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.98
    epsilon: float = 1e-9
    learning_rate: float = 1e-3


def adam_step(param: Parameter, state: AdamState, learning_rate: float | None = None) -> None:
    """Apply one Adam update to ``param`` in place.  Gradients are left untouched."""
    if state.m.shape != param.shape or state.v.shape != param.shape:
        raise StateError(
            f"optimizer state for {param.name} has shape {state.m.shape}, parameter has {param.shape}"
        )
    lr = state.learning_rate if learning_rate is None else learning_rate
    g = param.grad
    state.step_count += 1
    t = state.step_count
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * g
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * (g * g)
    m_hat = state.m / (1.0 - state.beta1 ** t)
    v_hat = state.v / (1.0 - state.beta2 ** t)
    update = lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    param.data -= update.astype(param.dtype, copy=False)


@dataclass
class Adam:
    """Adam over a fixed parameter list.

    ``grad_masks`` optionally restricts updates to a subset of entries
    (e.g. one speaker row); masked entries see a zero gradient, so with
    fresh state their values never move.
    """

    params: Sequence[Parameter]
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.98
    epsilon: float = 1e-9
    grad_masks: Mapping[str, np.ndarray] = field(default_factory=dict)
    states: dict[str, AdamState] = field(default_factory=dict)

    def __post_init__(self):
        for p in self.params:
            if p.name not in self.states:
                self.states[p.name] = AdamState(
                    m=np.zeros_like(p.data),
                    v=np.zeros_like(p.data),
                    beta1=self.beta1,
                    beta2=self.beta2,
                    epsilon=self.epsilon,
                    learning_rate=self.learning_rate,
                )

    def step(self, learning_rate: float | None = None) -> None:
        for p in self.params:
            mask = self.grad_masks.get(p.name)
            if mask is not None:
                p.grad *= mask
            adam_step(p, self.states[p.name], learning_rate)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    @property
    def step_count(self) -> int:
        return max((s.step_count for s in self.states.values()), default=0)
