"""Encoder and decoder convolutional networks.

The encoder runs two pre-processing groups over the secret's sub-bands,
concatenates the resulting feature maps with the cover's embedding band,
and codes them with a third group into the modified band. The decoder is a
single group mapping the (possibly file-round-tripped) band back to the
secret's sub-bands. Every layer is a 3x3, stride-1, same-padded convolution;
hidden layers use ReLU and output layers are linear because sub-band
coefficients are signed.

Public tensors are ``(N, C, H, W)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator

import numpy as np

from . import ops

__all__ = [
    "AdamState",
    "ArchSpec",
    "ConvLayer",
    "EncoderTrace",
    "DecoderTrace",
    "NetworkParams",
    "decoder_backward",
    "decoder_forward",
    "encoder_backward",
    "encoder_forward",
    "init_params",
]

ACTIVATIONS = ("relu", "identity")


@dataclass(frozen=True)
class ArchSpec:
    """Layer widths and the channel contract of both networks.

    ``group3`` and ``decoder`` list hidden widths only; their output layers
    have ``encoder_out`` and ``decoder_out`` channels. ``residual`` makes the
    encoder predict an offset that is added to the cover band.
    """

    secret_channels: int = 4
    cover_channels: int = 1
    encoder_out: int = 1
    decoder_out: int = 4
    group1: tuple[int, ...] = (32, 32)
    group2: tuple[int, ...] = (64, 64)
    group3: tuple[int, ...] = (64, 32)
    decoder: tuple[int, ...] = (64, 64, 32)
    residual: bool = False

    def validate(self) -> None:
        if self.encoder_out != self.cover_channels:
            raise ValueError(
                f"encoder must emit {self.cover_channels} channel(s) to replace the "
                f"cover band(s), architecture has {self.encoder_out}"
            )
        if self.decoder_out != self.secret_channels:
            raise ValueError(
                f"decoder must emit {self.secret_channels} secret channel(s), "
                f"architecture has {self.decoder_out}"
            )
        for name in ("group1", "group2", "decoder"):
            widths = getattr(self, name)
            if not widths or any(int(w) < 1 for w in widths):
                raise ValueError(f"{name} needs at least one positive width: {widths}")
        if any(int(w) < 1 for w in self.group3):
            raise ValueError(f"group3 widths must be positive: {self.group3}")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ArchSpec":
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**kw)

    def layer_shapes(self) -> list[tuple[str, int, int, str]]:
        """``(name, in_ch, out_ch, activation)`` for every layer in storage order."""
        out = []
        c = self.secret_channels
        for g, widths in (("enc.g1", self.group1), ("enc.g2", self.group2)):
            for i, w in enumerate(widths):
                out.append((f"{g}.{i}", c, int(w), "relu"))
                c = int(w)
        c += self.cover_channels
        for i, w in enumerate(self.group3):
            out.append((f"enc.g3.{i}", c, int(w), "relu"))
            c = int(w)
        out.append((f"enc.g3.{len(self.group3)}", c, self.encoder_out, "identity"))
        c = self.cover_channels
        for i, w in enumerate(self.decoder):
            out.append((f"dec.{i}", c, int(w), "relu"))
            c = int(w)
        out.append((f"dec.{len(self.decoder)}", c, self.decoder_out, "identity"))
        return out


@dataclass
class ConvLayer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "relu"

    def __post_init__(self) -> None:
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 4 or self.weight.shape[2:] != (3, 3):
            raise ValueError(f"expected (O, C, 3, 3) kernel, got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ValueError("bias length must equal output channels")

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    def copy(self) -> "ConvLayer":
        return ConvLayer(self.weight.copy(), self.bias.copy(), self.activation)


@dataclass
class AdamState:
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class NetworkParams:
    arch: ArchSpec
    encoder: list[list[ConvLayer]]
    decoder: list[ConvLayer]
    adam: AdamState = field(default_factory=AdamState)
    meta: dict = field(default_factory=dict)

    def named_layers(self) -> Iterator[tuple[str, ConvLayer]]:
        for gi, group in enumerate(self.encoder):
            for li, layer in enumerate(group):
                yield f"enc.g{gi + 1}.{li}", layer
        for li, layer in enumerate(self.decoder):
            yield f"dec.{li}", layer

    def layers(self) -> list[ConvLayer]:
        return [layer for _, layer in self.named_layers()]

    def arrays(self) -> list[np.ndarray]:
        """Weight and bias arrays, interleaved, in storage order."""
        out = []
        for layer in self.layers():
            out.extend((layer.weight, layer.bias))
        return out

    def n_parameters(self) -> int:
        return int(sum(a.size for a in self.arrays()))

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            arch=self.arch,
            encoder=[[l.copy() for l in g] for g in self.encoder],
            decoder=[l.copy() for l in self.decoder],
            adam=AdamState(self.adam.step, [m.copy() for m in self.adam.m],
                           [v.copy() for v in self.adam.v], self.adam.beta1,
                           self.adam.beta2, self.adam.eps),
            meta=dict(self.meta),
        )


def init_params(seed: int, arch: ArchSpec | None = None, **meta) -> NetworkParams:
    """He-uniform weights and zero biases, reproducible from ``seed``."""
    arch = arch or ArchSpec()
    arch.validate()
    rng = np.random.default_rng(seed)
    enc_groups: dict[str, list[ConvLayer]] = {"enc.g1": [], "enc.g2": [], "enc.g3": []}
    decoder: list[ConvLayer] = []
    for name, cin, cout, act in arch.layer_shapes():
        bound = np.sqrt(6.0 / (cin * 9))
        layer = ConvLayer(rng.uniform(-bound, bound, size=(cout, cin, 3, 3)),
                          np.zeros(cout), act)
        if name.startswith("dec."):
            decoder.append(layer)
        else:
            enc_groups[name.rsplit(".", 1)[0]].append(layer)
    params = NetworkParams(arch, list(enc_groups.values()), decoder, meta=dict(meta))
    params.meta.setdefault("seed", int(seed))
    return params


def _check_nchw(x: np.ndarray, channels: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise ValueError(f"{what} must be (N, C, H, W), got shape {x.shape}")
    if x.shape[1] != channels:
        raise ValueError(f"{what} must have {channels} channel(s), got {x.shape[1]}")
    return x


class _Trace:
    """Activations recorded by a forward pass; consumed by one backward."""

    def __init__(self) -> None:
        self.inputs: list[np.ndarray] = []
        self.outputs: list[np.ndarray] = []
        self.used = False

    def claim(self) -> None:
        if self.used:
            raise RuntimeError("trace already consumed by a backward pass")
        self.used = True


class EncoderTrace(_Trace):
    feature_channels: int = 0


class DecoderTrace(_Trace):
    pass


def _run(layers: list[ConvLayer], x: np.ndarray, trace: _Trace | None) -> np.ndarray:
    for layer in layers:
        y = ops.conv2d(x, layer.weight, layer.bias)
        if layer.activation == "relu":
            y = ops.relu(y)
        if trace is not None:
            trace.inputs.append(x)
            trace.outputs.append(y)
        x = y
    return x


def _run_backward(layers: list[ConvLayer], trace: _Trace, grad: np.ndarray,
                  offset: int, first_needs_grad: bool):
    grads = []
    for k in range(len(layers) - 1, -1, -1):
        layer = layers[k]
        if layer.activation == "relu":
            grad = ops.relu_backward(trace.outputs[offset + k], grad)
        need = k > 0 or first_needs_grad
        dw, db, grad = ops.conv2d_backward(trace.inputs[offset + k], layer.weight,
                                           grad, need_input_grad=need)
        grads.append((dw, db))
    grads.reverse()
    return grads, grad


def encoder_forward(secret_bands: np.ndarray, cover_band: np.ndarray,
                    params: NetworkParams, record: bool = False):
    """Embed the secret's sub-bands into the cover band.

    Returns the modified band, ``(N, encoder_out, H, W)``, or a
    ``(band, trace)`` pair when ``record`` is set.
    """
    arch = params.arch
    s = _check_nchw(secret_bands, arch.secret_channels, "secret bands")
    c = _check_nchw(cover_band, arch.cover_channels, "cover band")
    if s.shape[0] != c.shape[0] or s.shape[2:] != c.shape[2:]:
        raise ValueError(f"secret {s.shape} and cover {c.shape} batch/spatial mismatch")
    trace = EncoderTrace() if record else None
    g1, g2, g3 = params.encoder
    x = _run(g1 + g2, s.transpose(1, 0, 2, 3), trace)
    cover_t = c.transpose(1, 0, 2, 3)
    if trace is not None:
        trace.feature_channels = x.shape[0]
    x = _run(g3, np.concatenate([x, cover_t], axis=0), trace)
    if arch.residual:
        x = x + cover_t
    out = np.ascontiguousarray(x.transpose(1, 0, 2, 3))
    return (out, trace) if record else out


def encoder_backward(trace: EncoderTrace | None, grad_out: np.ndarray,
                     params: NetworkParams):
    """Parameter gradients of the encoder, in :meth:`NetworkParams.layers` order.

    Returns ``(grads, grad_cover)``; ``grads`` is a list of ``(dW, db)``.
    """
    if trace is None:
        raise RuntimeError("encoder_backward called without a recorded forward pass")
    trace.claim()
    g1, g2, g3 = params.encoder
    grad = np.asarray(grad_out, dtype=np.float64).transpose(1, 0, 2, 3)
    grad_cover = grad.copy() if params.arch.residual else 0.0
    n12 = len(g1) + len(g2)
    grads3, grad = _run_backward(g3, trace, grad, n12, True)
    f = trace.feature_channels
    grad_cover = grad_cover + grad[f:]
    grads12, _ = _run_backward(g1 + g2, trace, grad[:f], 0, False)
    return grads12 + grads3, np.ascontiguousarray(grad_cover.transpose(1, 0, 2, 3))


def decoder_forward(stego_band: np.ndarray, params: NetworkParams, record: bool = False):
    """Recover the secret's sub-bands, ``(N, decoder_out, H, W)``."""
    x = _check_nchw(stego_band, params.arch.cover_channels, "stego band")
    trace = DecoderTrace() if record else None
    y = _run(params.decoder, x.transpose(1, 0, 2, 3), trace)
    out = np.ascontiguousarray(y.transpose(1, 0, 2, 3))
    return (out, trace) if record else out


def decoder_backward(trace: DecoderTrace | None, grad_out: np.ndarray,
                     params: NetworkParams):
    """Returns ``(grads, grad_input)`` for the decoder."""
    if trace is None:
        raise RuntimeError("decoder_backward called without a recorded forward pass")
    trace.claim()
    grad = np.asarray(grad_out, dtype=np.float64).transpose(1, 0, 2, 3)
    grads, grad_in = _run_backward(params.decoder, trace, grad, 0, True)
    return grads, np.ascontiguousarray(grad_in.transpose(1, 0, 2, 3))


Channel = Callable[[np.ndarray], tuple[np.ndarray, Callable[[np.ndarray], np.ndarray]]]
