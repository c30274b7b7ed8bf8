"""Image I/O, quantization, and colour-space conversions.

Images are plain numpy arrays: colour images are ``(H, W, 3)`` in RGB order,
grayscale images and single planes are ``(H, W)``. Files are 8-bit; in
memory any real dtype is accepted and computation is done in float64.

Colour constants
----------------
YUV
    BT.601 analog form in 8-bit units: ``Y`` in ``[0, 255]``, ``U`` and ``V``
    zero-centred.
LAB
    CIE L*a*b* relative to D65, from sRGB with the standard companding curve.
HSV
    Hexcone model with ``H`` in degrees ``[0, 360)``, ``S`` in ``[0, 1]`` and
    ``V`` in the input's units (``max(R, G, B)``).
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

__all__ = [
    "COLOR_SPACES",
    "ImageReadError",
    "LUMA_WEIGHTS",
    "as_plane",
    "as_rgb",
    "convert_color_space",
    "from_color_space",
    "lab_to_rgb",
    "load_gray",
    "load_image",
    "quantize",
    "rgb_to_lab",
    "save_image",
    "to_gray",
]

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
COLOR_SPACES = ("YUV", "LAB", "HSV")

_RGB2YUV = np.vstack([
    LUMA_WEIGHTS,
    0.492111 * (np.array([0.0, 0.0, 1.0]) - LUMA_WEIGHTS),
    0.877283 * (np.array([1.0, 0.0, 0.0]) - LUMA_WEIGHTS),
])
_YUV2RGB = np.linalg.inv(_RGB2YUV)

_SRGB2XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_XYZ2SRGB = np.linalg.inv(_SRGB2XYZ)
D65_WHITE = _SRGB2XYZ @ np.ones(3)

_LAB_EPS = 216.0 / 24389.0
_LAB_KAPPA = 24389.0 / 27.0

_FORMATS = {"PNG", "PPM"}


class ImageReadError(OSError):
    """Raised when a file cannot be decoded as an 8-bit PNG/PPM/PGM image."""


def as_plane(plane) -> np.ndarray:
    arr = np.asarray(plane, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D plane, got shape {arr.shape}")
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise ValueError(f"plane must be at least 2x2, got {arr.shape}")
    return arr


def as_rgb(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB image, got shape {arr.shape}")
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise ValueError(f"image must be at least 2x2, got {arr.shape[:2]}")
    return arr


def _open(path: str | os.PathLike) -> Image.Image:
    path = Path(path)
    try:
        img = Image.open(path)
        img.load()
    except FileNotFoundError:
        raise ImageReadError(f"unreadable: no such file {path}") from None
    except UnidentifiedImageError:
        raise ImageReadError(f"unsupported format: {path}") from None
    except (OSError, SyntaxError, ValueError) as exc:
        raise ImageReadError(f"unreadable: {path}: {exc}") from None
    if img.format not in _FORMATS:
        raise ImageReadError(f"unsupported format {img.format}: {path}")
    if img.width == 0 or img.height == 0:
        raise ImageReadError(f"unreadable: zero-dimension image {path}")
    if img.mode not in ("L", "RGB", "P", "1"):
        raise ImageReadError(f"unsupported mode {img.mode}: {path}")
    return img


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Decode a PNG or binary PPM/PGM file into an ``(H, W, 3)`` uint8 array.

    Grayscale sources are replicated across the three channels.
    """
    img = _open(path)
    return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()


def load_gray(path: str | os.PathLike) -> np.ndarray:
    """Decode a file as a grayscale ``(H, W)`` uint8 array.

    Single-channel files are returned as stored; colour files go through
    :func:`to_gray`.
    """
    img = _open(path)
    if img.mode in ("L", "1"):
        return np.asarray(img.convert("L"), dtype=np.uint8).copy()
    return to_gray(np.asarray(img.convert("RGB")))


def save_image(path: str | os.PathLike, img) -> Path:
    """Write an 8-bit image; the format follows the suffix (.png, .ppm, .pgm)."""
    path = Path(path)
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        arr = quantize(arr)
    suffix = path.suffix.lower()
    if suffix not in (".png", ".ppm", ".pgm"):
        raise ValueError(f"unsupported output format {suffix!r}")
    if arr.ndim == 2:
        mode = "L"
        if suffix == ".ppm":
            arr = np.repeat(arr[..., None], 3, axis=2)
            mode = "RGB"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        if suffix == ".pgm":
            raise ValueError("cannot write a colour image as PGM")
        mode = "RGB"
    else:
        raise ValueError(f"cannot save array of shape {arr.shape}")
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode=mode).save(path, format="PNG" if suffix == ".png" else "PPM")
    return path


def quantize(x) -> np.ndarray:
    """Clamp to ``[0, 255]`` and round half up, giving uint8."""
    arr = np.asarray(x, dtype=np.float64)
    return np.floor(np.clip(arr, 0.0, 255.0) + 0.5).astype(np.uint8)


def to_gray(img) -> np.ndarray:
    """BT.601 luma, quantized to uint8."""
    return quantize(as_rgb(img) @ LUMA_WEIGHTS)


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(c: np.ndarray) -> np.ndarray:
    c = np.clip(c, 0.0, None)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1.0 / 2.4) - 0.055)


def rgb_to_lab(img) -> np.ndarray:
    """8-bit sRGB ``(..., 3)`` to CIE L*a*b* (D65)."""
    rgb = np.asarray(img, dtype=np.float64) / 255.0
    xyz = _srgb_to_linear(rgb) @ _SRGB2XYZ.T / D65_WHITE
    f = np.where(xyz > _LAB_EPS, np.cbrt(xyz), (_LAB_KAPPA * xyz + 16.0) / 116.0)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def lab_to_rgb(lab) -> np.ndarray:
    """Inverse of :func:`rgb_to_lab`; returns unquantized 8-bit-scale RGB."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    f3 = f ** 3
    xyz = np.where(f3 > _LAB_EPS, f3, (116.0 * f - 16.0) / _LAB_KAPPA)
    # exact for L*: the luminance branch switches on L*, not on f^3
    y_lin = np.where(lab[..., 0] > _LAB_KAPPA * _LAB_EPS, f3[..., 1], lab[..., 0] / _LAB_KAPPA)
    xyz[..., 1] = y_lin
    lin = (xyz * D65_WHITE) @ _XYZ2SRGB.T
    return _linear_to_srgb(lin) * 255.0


def _rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    r, g, b = np.moveaxis(rgb, -1, 0)
    v = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    delta = v - mn
    s = np.divide(delta, v, out=np.zeros_like(v), where=v > 0)
    safe = np.where(delta > 0, delta, 1.0)
    h = np.where(
        v == r, ((g - b) / safe) % 6.0,
        np.where(v == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    h = np.where(delta > 0, h * 60.0, 0.0)
    return np.stack([h, s, v], axis=-1)


def _hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = np.moveaxis(hsv, -1, 0)
    hp = (h % 360.0) / 60.0
    c = v * s
    x = c * (1.0 - np.abs(hp % 2.0 - 1.0))
    m = v - c
    sector = np.floor(hp).astype(int) % 6
    zeros = np.zeros_like(c)
    table = [
        (c, x, zeros), (x, c, zeros), (zeros, c, x),
        (zeros, x, c), (x, zeros, c), (c, zeros, x),
    ]
    out = np.zeros(hsv.shape)
    for k, (rr, gg, bb) in enumerate(table):
        sel = sector == k
        out[..., 0] = np.where(sel, rr, out[..., 0])
        out[..., 1] = np.where(sel, gg, out[..., 1])
        out[..., 2] = np.where(sel, bb, out[..., 2])
    return out + m[..., None]


def convert_color_space(img, target: str) -> np.ndarray:
    """RGB ``(..., 3)`` to ``YUV``, ``LAB`` or ``HSV`` channels on the last axis."""
    rgb = np.asarray(img, dtype=np.float64)
    if rgb.shape[-1] != 3:
        raise ValueError(f"expected RGB channels on the last axis, got {rgb.shape}")
    key = target.upper()
    if key == "YUV":
        return rgb @ _RGB2YUV.T
    if key == "LAB":
        return rgb_to_lab(rgb)
    if key == "HSV":
        return _rgb_to_hsv(rgb)
    raise ValueError(f"unknown colour space {target!r}; expected one of {COLOR_SPACES}")


def from_color_space(channels, source: str) -> np.ndarray:
    """Inverse of :func:`convert_color_space`; unquantized 8-bit-scale RGB."""
    arr = np.asarray(channels, dtype=np.float64)
    key = source.upper()
    if key == "YUV":
        return arr @ _YUV2RGB.T
    if key == "LAB":
        return lab_to_rgb(arr)
    if key == "HSV":
        return _hsv_to_rgb(arr)
    raise ValueError(f"unknown colour space {source!r}; expected one of {COLOR_SPACES}")
