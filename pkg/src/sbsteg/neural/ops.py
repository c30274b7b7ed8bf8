"""3x3 same-padding convolution and ReLU with hand-written backward passes.

Activations are kept channel-major, ``(C, N, H, W)``, inside the networks so
the im2col product is one contiguous GEMM per layer.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

KERNEL = 3


def _im2col(x: np.ndarray) -> np.ndarray:
    c, n, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (KERNEL, KERNEL), axis=(2, 3))
    # (C, 3, 3, N, H, W) -> rows ordered like weight.reshape(O, C*9)
    return win.transpose(0, 4, 5, 1, 2, 3).reshape(c * KERNEL * KERNEL, n * h * w)


def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """``x``: ``(C, N, H, W)``; ``weight``: ``(O, C, 3, 3)``; returns ``(O, N, H, W)``."""
    c, n, h, w = x.shape
    o = weight.shape[0]
    if weight.shape[1] != c:
        raise ValueError(f"conv expects {weight.shape[1]} input channels, got {c}")
    y = weight.reshape(o, -1) @ _im2col(x)
    y += bias[:, None]
    return y.reshape(o, n, h, w)


def conv2d_backward(x: np.ndarray, weight: np.ndarray, grad_out: np.ndarray,
                    need_input_grad: bool = True):
    """Gradients ``(d_weight, d_bias, d_x)`` of a :func:`conv2d` call.

    ``d_x`` is a same-padded correlation of ``grad_out`` with the spatially
    flipped, channel-transposed kernel; ``None`` when not requested.
    """
    o = weight.shape[0]
    g = grad_out.reshape(o, -1)
    d_weight = (g @ _im2col(x).T).reshape(weight.shape)
    d_bias = g.sum(axis=1)
    d_x = None
    if need_input_grad:
        flipped = np.ascontiguousarray(weight[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
        d_x = conv2d(grad_out, flipped, np.zeros(flipped.shape[0]))
    return d_weight, d_bias, d_x


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(y: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return grad_out * (y > 0.0)
