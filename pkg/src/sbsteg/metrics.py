"""Image-quality metrics for cover/stego and secret/reconstruction pairs.

All functions take 8-bit-scale arrays, ``(H, W)`` or ``(H, W, 3)``.
Comparisons that would divide by zero on identical inputs (PSNR, CL-PSNR)
return the :data:`PSNR_CAP` sentinel instead.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .image_core import LUMA_WEIGHTS, as_rgb, quantize, rgb_to_lab

__all__ = [
    "CL_MAX",
    "CSV_HEADER",
    "Cie94Params",
    "PSNR_CAP",
    "QualityReport",
    "amplified_residual",
    "cie94_delta_e",
    "cl_mse",
    "cl_mse_lab",
    "cl_psnr",
    "error_per_pixel",
    "heat_map",
    "jnd_map",
    "jnd_threshold",
    "modification_percentage",
    "mse",
    "psnr",
    "quality_report",
    "read_reports_csv",
    "ssim",
    "write_reports_csv",
]

PSNR_CAP = 100.0
CL_MAX = 140.0
CL_MSE_FLOOR = 1e-10
SSIM_WINDOW = 8
CSV_HEADER = ("pair_id", "psnr", "cl_psnr", "ssim", "err_px", "mod_pct")


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, peak: float = 255.0) -> float:
    """PSNR in dB over all samples; identical inputs give :data:`PSNR_CAP`."""
    err = mse(a, b)
    if err == 0.0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(peak ** 2 / err)))


def _ssim_plane(x: np.ndarray, y: np.ndarray, win: int, c1: float, c2: float) -> float:
    wx = sliding_window_view(x, (win, win))
    wy = sliding_window_view(y, (win, win))
    mx = wx.mean(axis=(-2, -1))
    my = wy.mean(axis=(-2, -1))
    vx = wx.var(axis=(-2, -1))
    vy = wy.var(axis=(-2, -1))
    cov = (wx * wy).mean(axis=(-2, -1)) - mx * my
    num = (2 * mx * my + c1) * (2 * cov + c2)
    den = (mx ** 2 + my ** 2 + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


def ssim(a, b, window: int = SSIM_WINDOW, peak: float = 255.0) -> float:
    """Mean SSIM over all ``window x window`` positions (uniform weights).

    Window statistics use population moments. Colour images are scored per
    channel and averaged.
    """
    a, b = _pair(a, b)
    if a.shape[0] < window or a.shape[1] < window:
        raise ValueError(f"image {a.shape[:2]} smaller than the {window}x{window} window")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    if a.ndim == 2:
        return _ssim_plane(a, b, window, c1, c2)
    return float(np.mean([_ssim_plane(a[..., k], b[..., k], window, c1, c2)
                          for k in range(a.shape[-1])]))


def error_per_pixel(a, b) -> float:
    """Mean absolute difference over all channel samples, in 8-bit units."""
    a, b = _pair(a, b)
    return float(np.mean(np.abs(a - b)))


def modification_percentage(a, b, threshold: float = 5.0) -> float:
    """Percentage (0-100) of pixels whose largest channel error exceeds ``threshold``."""
    a, b = _pair(a, b)
    diff = np.abs(a - b)
    if diff.ndim == 3:
        diff = diff.max(axis=-1)
    return float(100.0 * np.mean(diff > threshold))


@dataclass(frozen=True)
class Cie94Params:
    """CIE94 weights; defaults are the graphic-arts set."""

    k_l: float = 1.0
    k_c: float = 1.0
    k_h: float = 1.0
    s_l: float = 1.0
    k1: float = 0.045
    k2: float = 0.015

    def s_c(self, chroma):
        return 1.0 + self.k1 * chroma

    def s_h(self, chroma):
        return 1.0 + self.k2 * chroma


def cie94_delta_e(p, q, params: Cie94Params | None = None):
    """CIE94 colour difference between LAB values ``p`` (reference) and ``q``.

    Broadcasts over leading axes. Chroma weighting uses the reference's
    chroma, so the result is not symmetric in its arguments.
    """
    params = params or Cie94Params()
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    c1 = np.hypot(p[..., 1], p[..., 2])
    c2 = np.hypot(q[..., 1], q[..., 2])
    dl = p[..., 0] - q[..., 0]
    dc = c1 - c2
    da = p[..., 1] - q[..., 1]
    db = p[..., 2] - q[..., 2]
    dh2 = np.maximum(da ** 2 + db ** 2 - dc ** 2, 0.0)
    out = np.sqrt(
        (dl / (params.k_l * params.s_l)) ** 2
        + (dc / (params.k_c * params.s_c(c1))) ** 2
        + dh2 / (params.k_h * params.s_h(c1)) ** 2
    )
    return float(out) if out.ndim == 0 else out


def cl_mse(a, b, params: Cie94Params | None = None) -> float:
    """Mean per-pixel CIE94 difference of two RGB images, divided by 140.

    ``a`` is the reference (cover) image.
    """
    a, b = _pair(a, b)
    as_rgb(a)
    return cl_mse_lab(rgb_to_lab(a), rgb_to_lab(b), params)


def cl_mse_lab(p, q, params: Cie94Params | None = None) -> float:
    """:func:`cl_mse` on LAB arrays; also accepts values outside the sRGB gamut."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.shape[-1] != 3:
        raise ValueError(f"LAB arrays must share a (..., 3) shape: {p.shape} vs {q.shape}")
    return float(np.mean(cie94_delta_e(p, q, params) / CL_MAX))


def _cl_psnr_from_mse(value: float, bits: int = 8) -> float:
    value = max(value, CL_MSE_FLOOR)
    return float(min(PSNR_CAP, 10.0 * np.log10((2 ** bits - 1) ** 2 / value)))


def cl_psnr(a, b, params: Cie94Params | None = None, bits: int = 8) -> float:
    """PSNR with the MSE term replaced by :func:`cl_mse`."""
    return _cl_psnr_from_mse(cl_mse(a, b, params), bits)


# Background-luminance and directional-gradient operators of the classic
# spatial JND model (luminance adaptation vs. texture masking).
_JND_BG = np.array([
    [1, 1, 1, 1, 1],
    [1, 2, 2, 2, 1],
    [1, 2, 0, 2, 1],
    [1, 2, 2, 2, 1],
    [1, 1, 1, 1, 1],
], dtype=np.float64) / 32.0
_JND_GRAD = np.array([
    [[0, 0, 0, 0, 0], [1, 3, 8, 3, 1], [0, 0, 0, 0, 0], [-1, -3, -8, -3, -1], [0, 0, 0, 0, 0]],
    [[0, 0, 1, 0, 0], [0, 8, 3, 0, 0], [1, 3, 0, -3, -1], [0, 0, -3, -8, 0], [0, 0, -1, 0, 0]],
    [[0, 0, 1, 0, 0], [0, 0, 3, 8, 0], [-1, -3, 0, 3, 1], [0, -8, -3, 0, 0], [0, 0, -1, 0, 0]],
    [[0, 1, 0, -1, 0], [0, 3, 0, -3, 0], [0, 8, 0, -8, 0], [0, 3, 0, -3, 0], [0, 1, 0, -1, 0]],
], dtype=np.float64) / 16.0


def _luma(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    return arr @ LUMA_WEIGHTS if arr.ndim == 3 else arr


def jnd_map(img, t0: float = 17.0, gamma: float = 3.0 / 128.0, lam: float = 0.5) -> np.ndarray:
    """Per-pixel visibility threshold of the luminance plane.

    ``max(luminance adaptation, texture masking)``: the first term rises in
    dark and bright backgrounds, the second with the strongest of four
    directional gradients.
    """
    y = _luma(img)
    bg = ndimage.correlate(y, _JND_BG, mode="reflect")
    grad = np.max([np.abs(ndimage.correlate(y, g, mode="reflect")) for g in _JND_GRAD], axis=0)
    lum = np.where(
        bg <= 127.0,
        t0 * (1.0 - np.sqrt(np.clip(bg, 0.0, None) / 127.0)) + 3.0,
        gamma * (bg - 127.0) + 3.0,
    )
    alpha = bg * 0.0001 + 0.115
    beta = lam - bg * 0.01
    texture = grad * alpha + beta
    return np.maximum(lum, texture)


def jnd_threshold(img) -> float:
    """Image-level JND: the mean of :func:`jnd_map`."""
    return float(np.mean(jnd_map(img)))


def heat_map(cover, stego) -> np.ndarray:
    """Signed residual on a red-white-blue ramp, as an ``(H, W, 3)`` uint8 image.

    Red marks pixels whose (channel-summed) value increased, blue where it
    decreased; the ramp is scaled by the largest absolute change.
    """
    a, b = _pair(cover, stego)
    d = b - a
    if d.ndim == 3:
        d = d.sum(axis=-1)
    scale = np.max(np.abs(d))
    t = d / scale if scale > 0 else np.zeros_like(d)
    pos = np.clip(t, 0.0, 1.0)
    neg = np.clip(-t, 0.0, 1.0)
    out = np.empty(d.shape + (3,))
    out[..., 0] = 255.0 * (1.0 - neg)
    out[..., 1] = 255.0 * (1.0 - pos - neg)
    out[..., 2] = 255.0 * (1.0 - pos)
    return quantize(out)


def amplified_residual(cover, stego, factor: float = 10.0) -> np.ndarray:
    a, b = _pair(cover, stego)
    return quantize(np.abs(a - b) * factor)


@dataclass
class QualityReport:
    """Metrics for one image pair; ``cl_psnr`` is ``None`` for grayscale pairs."""

    pair_id: str
    psnr: float
    cl_psnr: float | None
    ssim: float
    error_per_pixel: float
    modification_percentage: float
    per_channel: dict[str, dict[str, float]] = field(default_factory=dict)

    def row(self) -> list[str]:
        cl = "" if self.cl_psnr is None else f"{self.cl_psnr:.6f}"
        return [self.pair_id, f"{self.psnr:.6f}", cl, f"{self.ssim:.6f}",
                f"{self.error_per_pixel:.6f}", f"{self.modification_percentage:.6f}"]


def quality_report(reference, test, pair_id: str = "0",
                   params: Cie94Params | None = None) -> QualityReport:
    a, b = _pair(reference, test)
    per_channel = {}
    cl = None
    if a.ndim == 3:
        cl = cl_psnr(a, b, params)
        for k, name in enumerate("RGB"):
            per_channel[name] = {
                "psnr": psnr(a[..., k], b[..., k]),
                "ssim": ssim(a[..., k], b[..., k]),
                "err_px": error_per_pixel(a[..., k], b[..., k]),
            }
    return QualityReport(
        pair_id=str(pair_id),
        psnr=psnr(a, b),
        cl_psnr=cl,
        ssim=ssim(a, b),
        error_per_pixel=error_per_pixel(a, b),
        modification_percentage=modification_percentage(a, b),
        per_channel=per_channel,
    )


def write_reports_csv(reports: Iterable[QualityReport], path=None) -> str:
    """Serialize reports with the fixed header; returns the CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rep in reports:
        writer.writerow(rep.row())
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_reports_csv(path) -> list[QualityReport]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header {rows[0] if rows else None}")
    out = []
    for pid, p, cl, s, e, m in rows[1:]:
        out.append(QualityReport(pid, float(p), float(cl) if cl else None, float(s),
                                 float(e), float(m)))
    return out


def summarize(values: Sequence[float]) -> float:
    return float(np.mean(values)) if len(values) else float("nan")
