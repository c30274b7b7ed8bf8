"""Adam with bias correction, and the step learning-rate schedule."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .networks import NetworkParams

__all__ = ["adam_step", "scheduled_lr"]


def adam_step(params: NetworkParams, grads: Sequence[tuple[np.ndarray, np.ndarray]],
              lr: float) -> NetworkParams:
    """Apply one Adam update in place and return ``params``."""
    arrays = params.arrays()
    flat = [g for pair in grads for g in pair]
    if len(flat) != len(arrays):
        raise ValueError(f"expected gradients for {len(arrays) // 2} layers, got {len(grads)}")
    for a, g in zip(arrays, flat):
        if a.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {a.shape}")
    st = params.adam
    if not st.m:
        st.m = [np.zeros_like(a) for a in arrays]
        st.v = [np.zeros_like(a) for a in arrays]
    st.step += 1
    t = st.step
    b1, b2 = st.beta1, st.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    for a, g, m, v in zip(arrays, flat, st.m, st.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        a -= lr * (m / corr1) / (np.sqrt(v / corr2) + st.eps)
    return params


def scheduled_lr(epoch: int, base: float = 1e-3,
                 milestones: Sequence[tuple[int, float]] = ((150, 3e-4), (300, 1e-4))) -> float:
    """Learning rate for a 1-based ``epoch``.

    Each ``(after, lr)`` milestone takes effect on epoch ``after + 1``.
    """
    lr = base
    for after, value in sorted(milestones):
        if epoch > after:
            lr = value
    return lr
