"""Choose the embedding region of a cover image and put stego images together.

The default region is the diagonal detail band (``cD``) of the blue channel.
The channel and region are parameters so ablations over other channels or
colour spaces, and over other sub-bands, reuse the same code path.

All functions accept a single image ``(H, W, 3)`` or a batch ``(N, H, W, 3)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .image_core import convert_color_space, from_color_space, quantize
from .metrics import modification_percentage
from .wavelet import BANDS, SubBands, Wavelet, dwt2, filter_bank, idwt2, make_wavelet

__all__ = [
    "CHANNELS",
    "REGIONS",
    "StegoContext",
    "extract_embedding_output",
    "reassemble_stego",
    "region_bands",
    "secret_to_subbands",
    "select_embedding_input",
    "subbands_to_secret",
    "transmission_channel",
    "zero_subband_experiment",
]

# policy -> (colour space or None for RGB, channel index, scale to 8-bit range)
CHANNELS: dict[str, tuple[str | None, int, float]] = {
    "R": (None, 0, 1.0),
    "G": (None, 1, 1.0),
    "B": (None, 2, 1.0),
    "Y": ("YUV", 0, 1.0),
    "L": ("LAB", 0, 2.55),
    "V": ("HSV", 2, 1.0),
}
REGIONS = ("cD", "cA", "all", "spatial")


def region_bands(region: str) -> tuple[str, ...]:
    """Sub-band names a region replaces; empty for the spatial region."""
    if region in ("cD", "cA", "cH", "cV"):
        return (region,)
    if region == "all":
        return BANDS
    if region == "spatial":
        return ()
    raise ValueError(f"unknown region {region!r}; expected one of {REGIONS}")


def _channel(policy: str) -> tuple[str | None, int, float]:
    try:
        return CHANNELS[policy.upper()]
    except KeyError:
        raise ValueError(f"unknown channel policy {policy!r}; expected one of "
                         f"{sorted(CHANNELS)}") from None


def _check_images(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim not in (3, 4) or arr.shape[-1] != 3:
        raise ValueError(f"expected (H, W, 3) or (N, H, W, 3) RGB, got shape {arr.shape}")
    if arr.shape[-3] < 2 or arr.shape[-2] < 2:
        raise ValueError(f"image must be at least 2x2, got {arr.shape[-3:-1]}")
    return arr


@dataclass(frozen=True)
class StegoContext:
    """What is needed to rebuild the cover around a modified region.

    ``space`` holds all three channels of the cover in the policy's colour
    space (RGB for R/G/B); ``bands`` is the full decomposition of the
    selected channel, ``None`` for the spatial region.
    """

    policy: str
    region: str
    wavelet: Wavelet
    shape: tuple[int, int]
    space: np.ndarray
    plane: np.ndarray
    bands: SubBands | None

    @property
    def r(self) -> np.ndarray:
        return self.space[..., 0]

    @property
    def g(self) -> np.ndarray:
        return self.space[..., 1]


def _channel_plane(img: np.ndarray, policy: str):
    space_name, idx, scale = _channel(policy)
    space = img if space_name is None else convert_color_space(img, space_name)
    return space, space[..., idx] * scale


def select_embedding_input(cover, policy: str = "B", wavelet: str | Wavelet = "dmey",
                           region: str = "cD"):
    """Split ``cover`` into the region to embed in and everything else.

    Returns ``(x, ctx)``. ``x`` is one band ``(..., h, w)`` for ``cD``/``cA``,
    the stacked bands ``(..., 4, h, w)`` for ``all``, or the channel plane for
    ``spatial``.
    """
    img = _check_images(cover)
    wav = make_wavelet(wavelet)
    names = region_bands(region)
    space, plane = _channel_plane(img, policy)
    shape = tuple(img.shape[-3:-1])
    if region == "spatial":
        ctx = StegoContext(policy.upper(), region, wav, shape, space, plane, None)
        return plane.copy(), ctx
    bands = dwt2(plane, wav)
    ctx = StegoContext(policy.upper(), region, wav, shape, space, plane, bands)
    if len(names) == 1:
        return getattr(bands, names[0]).copy(), ctx
    return bands.stack(), ctx


def _expected_shape(ctx: StegoContext) -> tuple[int, ...]:
    if ctx.bands is None:
        return ctx.plane.shape
    h, w = ctx.bands.cA.shape[-2:]
    lead = ctx.bands.cA.shape[:-2]
    if len(region_bands(ctx.region)) == 4:
        return lead + (4, h, w)
    return lead + (h, w)


def _replaced_plane(x: np.ndarray, ctx: StegoContext) -> np.ndarray:
    if ctx.bands is None:
        return x
    names = region_bands(ctx.region)
    if len(names) == 1:
        bands = ctx.bands.replace(**{names[0]: x})
    else:
        bands = SubBands.from_stack(x, ctx.wavelet, ctx.shape)
    return idwt2(bands)


def reassemble_stego(x, ctx: StegoContext) -> np.ndarray:
    """Put the modified region back and return the 8-bit stego image.

    For RGB policies the two other channels are copied through unchanged.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != _expected_shape(ctx):
        raise ValueError(f"embedded region {x.shape} does not match context "
                         f"{_expected_shape(ctx)}")
    space_name, idx, scale = _channel(ctx.policy)
    plane = _replaced_plane(x, ctx) / scale
    space = ctx.space.copy()
    space[..., idx] = plane
    rgb = space if space_name is None else from_color_space(space, space_name)
    return quantize(rgb)


def extract_embedding_output(stego, policy: str = "B", wavelet: str | Wavelet = "dmey",
                             region: str = "cD") -> np.ndarray:
    """Mirror of :func:`select_embedding_input` for the receiving side."""
    x, _ = select_embedding_input(stego, policy, wavelet, region)
    return x


def secret_to_subbands(secret, wavelet: str | Wavelet = "dmey") -> SubBands:
    arr = np.asarray(secret, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise ValueError(f"expected a gray image (H, W) or batch (N, H, W), got {arr.shape}")
    return dwt2(arr, wavelet)


def subbands_to_secret(bands: SubBands) -> np.ndarray:
    """Inverse transform, quantized to an 8-bit gray image."""
    return quantize(idwt2(bands))


def zero_subband_experiment(plane, which: str, wavelet: str | Wavelet = "dmey",
                            threshold: float = 5.0):
    """Zero one sub-band of ``plane`` and measure the damage.

    Returns ``(reconstruction, stats)`` where ``reconstruction`` is 8-bit and
    ``stats`` holds ``modification_percentage`` (pixels changed by more than
    ``threshold``) and ``max_error``.
    """
    if which not in BANDS:
        raise ValueError(f"unknown sub-band {which!r}; expected one of {BANDS}")
    p = np.asarray(plane, dtype=np.float64)
    bands = dwt2(p, wavelet)
    recon = quantize(idwt2(bands.replace(**{which: np.zeros_like(bands.cA)})))
    diff = np.abs(recon.astype(np.float64) - p)
    stats = {
        "modification_percentage": modification_percentage(p, recon, threshold),
        "max_error": float(diff.max()),
    }
    return recon, stats


def transmission_channel(ctx: StegoContext, norm: float = 255.0) -> Callable:
    """Differentiable model of reassemble -> 8-bit file -> extract.

    The returned callable takes the encoder output in network units
    (coefficients divided by ``norm``) shaped ``(N, C, h, w)`` and returns
    ``(received, vjp)``. Rounding uses a straight-through gradient and the
    gradient is zero where the plane was clipped. Every channel plane is
    quantized in its 8-bit-scaled units; for non-RGB policies that stands in
    for the colour round trip actually applied at reassembly.
    """
    names = region_bands(ctx.region)
    lo_hi = {"cA": ("lo", "lo"), "cH": ("hi", "lo"), "cV": ("lo", "hi"), "cD": ("hi", "hi")}
    h, w = ctx.shape
    if names:
        fr = filter_bank(ctx.wavelet, h)
        fc = filter_bank(ctx.wavelet, w)
        fixed = ctx.bands.replace(**{b: np.zeros_like(ctx.bands.cA) for b in names})
        base = idwt2(fixed)
        ops = [(getattr(fr, "syn_" + lo_hi[b][0]), getattr(fc, "syn_" + lo_hi[b][1]),
                getattr(fr, lo_hi[b][0]), getattr(fc, lo_hi[b][1])) for b in names]
    else:
        base = 0.0
        ops = []

    def channel(x: np.ndarray):
        x = np.asarray(x, dtype=np.float64) * norm
        if ops:
            plane = base + sum(sr @ x[:, k] @ sc.T for k, (sr, sc, _, _) in enumerate(ops))
        else:
            plane = x[:, 0]
        inside = (plane >= 0.0) & (plane <= 255.0)
        q = np.floor(np.clip(plane, 0.0, 255.0) + 0.5)
        if ops:
            out = np.stack([ar @ q @ ac.T for (_, _, ar, ac) in ops], axis=1)
        else:
            out = q[:, None]

        def vjp(g: np.ndarray) -> np.ndarray:
            g = np.asarray(g, dtype=np.float64)
            if ops:
                gq = sum(ar.T @ g[:, k] @ ac for k, (_, _, ar, ac) in enumerate(ops))
            else:
                gq = g[:, 0]
            gq = gq * inside
            if ops:
                return np.stack([sr.T @ gq @ sc for (sr, sc, _, _) in ops], axis=1)
            return gq[:, None]

        return out / norm, vjp

    return channel
