"""Frequency-domain MSE objective and the recorded forward/backward graph."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .networks import (
    Channel,
    DecoderTrace,
    EncoderTrace,
    NetworkParams,
    decoder_backward,
    decoder_forward,
    encoder_backward,
    encoder_forward,
)

__all__ = ["LossGraph", "forward_loss", "loss", "loss_grads"]


def _pair(a, b, what):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"{what} shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def loss(c, c_prime, s, s_prime, beta: float = 1.0) -> float:
    """``mean((c - c')**2) + beta * mean((s - s')**2)``."""
    c, c_prime = _pair(c, c_prime, "cover")
    s, s_prime = _pair(s, s_prime, "secret")
    return float(np.mean((c - c_prime) ** 2) + beta * np.mean((s - s_prime) ** 2))


def loss_grads(c, c_prime, s, s_prime, beta: float = 1.0):
    """Gradients of :func:`loss` with respect to ``c'`` and ``s'``."""
    c, c_prime = _pair(c, c_prime, "cover")
    s, s_prime = _pair(s, s_prime, "secret")
    return 2.0 * (c_prime - c) / c.size, 2.0 * beta * (s_prime - s) / s.size


@dataclass
class LossGraph:
    """One recorded encoder -> channel -> decoder pass and its loss."""

    params: NetworkParams
    value: float
    cover: np.ndarray
    cover_prime: np.ndarray
    secret: np.ndarray
    secret_prime: np.ndarray
    beta: float
    enc_trace: EncoderTrace
    dec_trace: DecoderTrace
    channel_vjp: object = None

    def backward(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Gradients for every layer, aligned with ``params.layers()``.

        Parameters are not touched; the graph can be backpropagated once.
        """
        g_cover, g_secret = loss_grads(self.cover, self.cover_prime, self.secret,
                                       self.secret_prime, self.beta)
        dec_grads, g_received = decoder_backward(self.dec_trace, g_secret, self.params)
        if self.channel_vjp is not None:
            g_received = self.channel_vjp(g_received)
        enc_grads, _ = encoder_backward(self.enc_trace, g_cover + g_received, self.params)
        return enc_grads + dec_grads


def forward_loss(params: NetworkParams, secret: np.ndarray, cover: np.ndarray,
                 beta: float = 1.0, channel: Channel | None = None) -> LossGraph:
    """Run encoder, optional transmission channel, and decoder; record everything.

    ``channel`` maps the encoder output to what the decoder receives and
    returns a vector-Jacobian closure for the backward pass.
    """
    cover_prime, enc_trace = encoder_forward(secret, cover, params, record=True)
    received, vjp = (cover_prime, None) if channel is None else channel(cover_prime)
    secret_prime, dec_trace = decoder_forward(received, params, record=True)
    value = loss(cover, cover_prime, secret, secret_prime, beta)
    return LossGraph(params, value, np.asarray(cover, dtype=np.float64), cover_prime,
                     np.asarray(secret, dtype=np.float64), secret_prime, beta,
                     enc_trace, dec_trace, vjp)
