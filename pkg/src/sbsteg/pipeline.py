"""Dataset ingestion, training, embed/extract, evaluation and ablation runs."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .config import RunConfig
from .image_core import ImageReadError, load_gray, load_image, quantize, save_image, to_gray
from .metrics import QualityReport, quality_report, summarize, write_reports_csv
from .neural import (
    ArchSpec,
    NetworkParams,
    adam_step,
    decoder_forward,
    encoder_forward,
    forward_loss,
    init_params,
    read_checkpoint,
    scheduled_lr,
    write_checkpoint,
)
from .subband_select import (
    extract_embedding_output,
    reassemble_stego,
    region_bands,
    secret_to_subbands,
    select_embedding_input,
    subbands_to_secret,
    transmission_channel,
)
from .wavelet import SubBands, make_wavelet

__all__ = [
    "SUMMARY_COLUMNS",
    "REFERENCE_FULL_SCALE",
    "AblationRow",
    "DatasetSplit",
    "EvalResult",
    "TrainResult",
    "ablate",
    "arch_for",
    "capacity_bpp",
    "capacity_report",
    "embed",
    "embed_arrays",
    "evaluate",
    "extract",
    "extract_arrays",
    "ingest_dataset",
    "load_split_arrays",
    "train",
]

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("C_Err", "S_Err", "C_PSNR", "CL-PSNR", "S_PSNR", "C_SSIM", "S_SSIM")
# Reference 250x250 / 400-epoch result for RGB/B, cD. Kept for comparison only.
REFERENCE_FULL_SCALE = {"C_Err": 0.66, "S_Err": 3.3586, "C_PSNR": 82.31, "CL-PSNR": 44.33,
                        "S_PSNR": 37.75, "C_SSIM": 0.9975, "S_SSIM": 0.9999}
CHECKPOINT_NAME = "checkpoint.sbck"
_CHUNK = 16


# -- data -----------------------------------------------------------------

@dataclass(frozen=True)
class DatasetSplit:
    """Image paths for training and testing; pairs are index-aligned."""

    train_covers: tuple[Path, ...]
    train_secrets: tuple[Path, ...]
    test_covers: tuple[Path, ...]
    test_secrets: tuple[Path, ...]
    size: int
    seed: int
    skipped: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        covers = set(self.train_covers) | set(self.test_covers)
        secrets = set(self.train_secrets) | set(self.test_secrets)
        if covers & secrets:
            raise ValueError("cover and secret sets overlap")
        if len(self.train_covers) != len(self.train_secrets):
            raise ValueError("training covers and secrets differ in count")
        if len(self.test_covers) != len(self.test_secrets):
            raise ValueError("test covers and secrets differ in count")


def ingest_dataset(root: str | Path, config: RunConfig) -> DatasetSplit:
    """Shuffle the images under ``root`` with the config seed and split them.

    The first ``n_train`` decodable images form the training pool and the
    next ``n_test`` the test pool; each pool is halved into covers and
    secrets. Undecodable files are skipped with a warning.
    """
    root = Path(root)
    if not root.is_dir():
        raise ValueError(f"dataset root {root} is not a directory")
    files = sorted(p for p in root.rglob("*") if p.is_file() and not p.name.startswith("."))
    if not files:
        raise ValueError(f"dataset root {root} is empty")
    order = np.random.default_rng(config.train.seed).permutation(len(files))
    need = config.n_train + config.n_test
    good: list[Path] = []
    skipped: list[str] = []
    for i in order:
        path = files[i]
        try:
            load_image(path)
        except ImageReadError as exc:
            warnings.warn(f"skipping {path}: {exc}", stacklevel=2)
            skipped.append(str(path))
            continue
        good.append(path)
        if len(good) == need:
            break
    if not good:
        raise ValueError(f"no decodable images under {root}")
    if len(good) < need:
        raise ValueError(f"need {need} images under {root}, found {len(good)} decodable")
    tr, te = good[:config.n_train], good[config.n_train:]
    htr, hte = len(tr) // 2, len(te) // 2
    return DatasetSplit(tuple(tr[:htr]), tuple(tr[htr:2 * htr]), tuple(te[:hte]),
                        tuple(te[hte:2 * hte]), config.size, config.train.seed, tuple(skipped))


def _resized(img: np.ndarray, size: int) -> np.ndarray:
    if img.shape[:2] == (size, size):
        return img
    return np.asarray(Image.fromarray(img).resize((size, size), Image.LANCZOS))


def load_split_arrays(split: DatasetSplit):
    """Decode and resize a split: ``(train_covers, train_secrets, test_covers, test_secrets)``.

    Covers are ``(N, size, size, 3)`` uint8, secrets ``(N, size, size)`` uint8 gray.
    """
    def covers(paths):
        return np.stack([_resized(load_image(p), split.size) for p in paths])

    def secrets(paths):
        return np.stack([quantize(to_gray(_resized(load_image(p), split.size))) for p in paths])

    return (covers(split.train_covers), secrets(split.train_secrets),
            covers(split.test_covers), secrets(split.test_secrets))


# -- model plumbing -------------------------------------------------------

def arch_for(config: RunConfig) -> ArchSpec:
    """Network shapes for the configured region.

    Band regions take the four secret sub-bands; ``all`` also replaces all
    four cover bands; ``spatial`` maps the raw secret plane into the raw
    cover plane with the same layer widths.
    """
    region_bands(config.region)
    if config.region == "spatial":
        sec, cov = 1, 1
    else:
        sec, cov = 4, len(region_bands(config.region))
    return ArchSpec(secret_channels=sec, cover_channels=cov, encoder_out=cov, decoder_out=sec,
                    group1=config.group1, group2=config.group2, group3=config.group3,
                    decoder=config.decoder, residual=config.residual)


def _meta(config: RunConfig) -> dict:
    return {"channel": config.channel.upper(), "region": config.region,
            "wavelet": make_wavelet(config.wavelet).name, "size": int(config.size),
            "norm": float(config.norm), "seed": int(config.train.seed),
            "epochs": int(config.train.epochs), "batch_size": int(config.train.batch_size),
            "lr": float(config.train.lr), "beta": float(config.train.beta),
            "milestones": [list(m) for m in config.train.milestones],
            "channel_sim": bool(config.channel_sim)}


def _nchw(x: np.ndarray, region: str) -> np.ndarray:
    # (N, h, w) -> (N, 1, h, w); stacks are already (N, 4, h, w)
    return x if region == "all" else x[:, None]


def _un_nchw(x: np.ndarray, region: str) -> np.ndarray:
    return x if region == "all" else x[:, 0]


def _secret_input(secrets: np.ndarray, region: str, wavelet, norm: float) -> np.ndarray:
    secrets = np.asarray(secrets, dtype=np.float64)
    if region == "spatial":
        return secrets[:, None] / norm
    return secret_to_subbands(secrets, wavelet).stack() / norm


def _check_size(images: np.ndarray, params: NetworkParams, what: str) -> None:
    size = params.meta.get("size")
    if size is not None and tuple(images.shape[1:3]) != (size, size):
        raise ValueError(f"{what} size {images.shape[1]}x{images.shape[2]} does not match "
                         f"checkpoint size {size}x{size}")


def embed_arrays(params: NetworkParams, covers, secrets) -> np.ndarray:
    """Hide ``secrets`` (N, H, W) in ``covers`` (N, H, W, 3); returns uint8 stego images."""
    covers = np.asarray(covers)
    secrets = np.asarray(secrets)
    if covers.ndim != 4 or secrets.ndim != 3:
        raise ValueError(f"expected covers (N,H,W,3) and secrets (N,H,W), got "
                         f"{covers.shape} and {secrets.shape}")
    if covers.shape[:3] != secrets.shape:
        raise ValueError(f"cover {covers.shape[1:3]} and secret {secrets.shape[1:]} sizes differ")
    _check_size(covers, params, "cover")
    m = params.meta
    wav, region, norm = make_wavelet(m["wavelet"]), m["region"], m["norm"]
    out = []
    for i in range(0, len(covers), _CHUNK):
        x, ctx = select_embedding_input(covers[i:i + _CHUNK], m["channel"], wav, region)
        s_in = _secret_input(secrets[i:i + _CHUNK], region, wav, norm)
        y = encoder_forward(s_in, _nchw(x, region) / norm, params) * norm
        out.append(reassemble_stego(_un_nchw(y, region), ctx))
    return np.concatenate(out)


def extract_arrays(params: NetworkParams, stegos) -> np.ndarray:
    """Recover uint8 gray secrets (N, H, W) from stego images (N, H, W, 3)."""
    stegos = np.asarray(stegos)
    if stegos.ndim != 4:
        raise ValueError(f"expected stego images (N,H,W,3), got {stegos.shape}")
    _check_size(stegos, params, "stego")
    m = params.meta
    wav, region, norm = make_wavelet(m["wavelet"]), m["region"], m["norm"]
    shape = tuple(stegos.shape[1:3])
    out = []
    for i in range(0, len(stegos), _CHUNK):
        x = extract_embedding_output(stegos[i:i + _CHUNK], m["channel"], wav, region)
        y = decoder_forward(_nchw(x, region) / norm, params) * norm
        if region == "spatial":
            out.append(quantize(y[:, 0]))
        else:
            out.append(subbands_to_secret(SubBands.from_stack(y, wav, shape)))
    return np.concatenate(out)


# -- training -------------------------------------------------------------

@dataclass
class TrainResult:
    checkpoint: Path
    loss_log: Path
    losses: list[float]
    params: NetworkParams


def _channel_model(ctx, config: RunConfig):
    return transmission_channel(ctx, norm=config.norm) if config.channel_sim else None


def train(config: RunConfig, split: DatasetSplit | None = None, data=None,
          out: str | Path | None = None) -> TrainResult:
    """Train one encoder/decoder pair and write its checkpoint and loss log.

    ``data`` may carry already-loaded arrays from :func:`load_split_arrays`
    to avoid decoding the split again.
    """
    config.validate()
    out = Path(out or config.out)
    if data is None:
        if split is None:
            if not config.dataset:
                raise ValueError("no dataset configured")
            split = ingest_dataset(config.dataset, config)
        data = load_split_arrays(split)
    covers, secrets = data[0], data[1]
    n = len(covers)
    if n == 0:
        raise ValueError("empty training set")
    if covers.shape[1:3] != (config.size, config.size):
        raise ValueError(f"training images are {covers.shape[1:3]}, config size is {config.size}")
    tc = config.train
    wav = make_wavelet(config.wavelet)
    params = init_params(tc.seed, arch_for(config))
    params.meta.update(_meta(config))
    rng = np.random.default_rng(tc.seed)
    losses: list[float] = []
    rows = []
    for epoch in range(1, tc.epochs + 1):
        lr = scheduled_lr(epoch, tc.lr, tc.milestones)
        perm = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, tc.batch_size):
            idx = perm[start:start + tc.batch_size]
            x, ctx = select_embedding_input(covers[idx], config.channel, wav, config.region)
            s_in = _secret_input(secrets[idx], config.region, wav, config.norm)
            c_in = _nchw(x, config.region) / config.norm
            graph = forward_loss(params, s_in, c_in, tc.beta, _channel_model(ctx, config))
            if not math.isfinite(graph.value):
                norms = {name: float(np.abs(l.weight).max()) for name, l in params.named_layers()}
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch}, batch {start // tc.batch_size} "
                    f"(lr={lr}); max |w| per layer: {json.dumps(norms)}")
            adam_step(params, graph.backward(), lr)
            batch_losses.append(graph.value)
        ep_loss = float(np.mean(batch_losses))
        losses.append(ep_loss)
        rows.append((epoch, lr, ep_loss))
        log.info("epoch %d lr %.4g loss %.6g", epoch, lr, ep_loss)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = write_checkpoint(out / CHECKPOINT_NAME, params)
    loss_log = out / "loss_log.csv"
    with open(loss_log, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("epoch", "lr", "loss"))
        for ep, lr, value in rows:
            w.writerow((ep, repr(float(lr)), repr(value)))
    return TrainResult(ckpt, loss_log, losses, params)


def read_loss_log(path: str | Path) -> list[float]:
    with open(path, newline="") as fh:
        return [float(r["loss"]) for r in csv.DictReader(fh)]


# -- single-file commands -------------------------------------------------

def _params(checkpoint) -> NetworkParams:
    return checkpoint if isinstance(checkpoint, NetworkParams) else read_checkpoint(checkpoint)


def embed(cover_path, secret_path, checkpoint, out_path) -> tuple[Path, QualityReport]:
    """Write the stego PNG for one pair and report its quality against the cover."""
    cover = load_image(cover_path)
    secret = load_gray(secret_path)
    params = _params(checkpoint)
    if cover.shape[:2] != secret.shape:
        raise ValueError(f"cover {cover.shape[:2]} and secret {secret.shape} sizes differ")
    stego = embed_arrays(params, cover[None], secret[None])[0]
    path = save_image(out_path, stego)
    return path, quality_report(cover, stego, Path(cover_path).stem)


def extract(stego_path, checkpoint, out_path, reference=None
            ) -> tuple[Path, QualityReport | None]:
    """Write the recovered gray secret; report against ``reference`` if given."""
    stego = load_image(stego_path)
    params = _params(checkpoint)
    secret = extract_arrays(params, stego[None])[0]
    path = save_image(out_path, secret)
    report = None
    if reference is not None:
        report = quality_report(load_gray(reference), secret, Path(stego_path).stem)
    return path, report


# -- evaluation -----------------------------------------------------------

@dataclass
class EvalResult:
    cover_reports: list[QualityReport]
    secret_reports: list[QualityReport]
    summary: dict[str, float]
    paths: dict[str, Path] = field(default_factory=dict)


def _summary(cover_reports, secret_reports) -> dict[str, float]:
    cl = [r.cl_psnr for r in cover_reports if r.cl_psnr is not None]
    return {
        "C_Err": summarize([r.error_per_pixel for r in cover_reports]),
        "S_Err": summarize([r.error_per_pixel for r in secret_reports]),
        "C_PSNR": summarize([r.psnr for r in cover_reports]),
        "CL-PSNR": summarize(cl),
        "S_PSNR": summarize([r.psnr for r in secret_reports]),
        "C_SSIM": summarize([r.ssim for r in cover_reports]),
        "S_SSIM": summarize([r.ssim for r in secret_reports]),
    }


def summary_csv(rows: Sequence[tuple[str, dict[str, float]]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("row",) + SUMMARY_COLUMNS)
    for name, s in rows:
        w.writerow((name,) + tuple(f"{s[k]:.6f}" for k in SUMMARY_COLUMNS))
    return buf.getvalue()


def evaluate(split: DatasetSplit | None, checkpoint, out: str | Path | None = None,
             data=None) -> EvalResult:
    """Per-pair reports for stego vs cover and recovered vs secret, plus means.

    With ``out`` set, writes ``cover_report.csv``, ``secret_report.csv`` and
    ``summary.csv`` there.
    """
    params = _params(checkpoint)
    if data is None:
        if split is None:
            raise ValueError("evaluate needs a split or loaded arrays")
        data = load_split_arrays(split)
    covers, secrets = data[2], data[3]
    if len(covers) == 0:
        raise ValueError("empty test set")
    stegos = embed_arrays(params, covers, secrets)
    recovered = extract_arrays(params, stegos)
    cover_reports = [quality_report(c, s, f"{i:04d}") for i, (c, s) in enumerate(zip(covers, stegos))]
    secret_reports = [quality_report(s, r, f"{i:04d}")
                      for i, (s, r) in enumerate(zip(secrets, recovered))]
    result = EvalResult(cover_reports, secret_reports, _summary(cover_reports, secret_reports))
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        result.paths = {"cover": out / "cover_report.csv", "secret": out / "secret_report.csv",
                        "summary": out / "summary.csv"}
        write_reports_csv(cover_reports, result.paths["cover"])
        write_reports_csv(secret_reports, result.paths["secret"])
        result.paths["summary"].write_text(
            summary_csv([("measured", result.summary), ("reference_full_scale",
                                                        REFERENCE_FULL_SCALE)]))
    return result


# -- ablation -------------------------------------------------------------

@dataclass
class AblationRow:
    channel: str
    region: str
    status: str
    summary: dict[str, float] | None = None
    error: str = ""
    first_loss: float | None = None
    final_loss: float | None = None
    seconds: float = 0.0  # wall time; not written to the CSV

    @property
    def cell(self) -> str:
        return f"{self.channel}/{self.region}"


def _run_cell(config: RunConfig, channel: str, region: str, data, out: Path) -> AblationRow:
    cell_cfg = config.with_overrides(channel=channel, region=region)
    cell_dir = out / f"{channel}_{region}"
    t0 = time.perf_counter()
    try:
        tr = train(cell_cfg, data=data, out=cell_dir)
        ev = evaluate(None, tr.params, cell_dir, data=data)
        return AblationRow(channel, region, "ok", ev.summary, first_loss=tr.losses[0],
                           final_loss=tr.losses[-1], seconds=time.perf_counter() - t0)
    except Exception as exc:  # one bad cell must not stop the others
        log.exception("ablation cell %s/%s failed", channel, region)
        return AblationRow(channel, region, "failed", error=f"{type(exc).__name__}: {exc}",
                           seconds=time.perf_counter() - t0)


def ablation_csv(rows: Sequence[AblationRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("channel", "subband", "status") + SUMMARY_COLUMNS
               + ("first_loss", "final_loss", "error"))
    for r in rows:
        vals = (tuple(f"{r.summary[k]:.6f}" for k in SUMMARY_COLUMNS) if r.summary
                else ("",) * len(SUMMARY_COLUMNS))
        losses = tuple("" if v is None else f"{v:.6g}" for v in (r.first_loss, r.final_loss))
        w.writerow((r.channel, r.region, r.status) + vals + losses + (r.error,))
    return buf.getvalue()


def ablate(config: RunConfig, cells: Sequence[tuple[str, str]], split: DatasetSplit | None = None,
           data=None, out: str | Path | None = None, workers: int = 1) -> list[AblationRow]:
    """Train and evaluate every ``(channel, region)`` cell on one shared split.

    Cells run one after another unless ``workers > 1``. Failures are
    recorded in the row instead of raised. Writes ``ablation.csv``.
    """
    if not cells:
        raise ValueError("no ablation cells given")
    out = Path(out or config.out)
    if data is None:
        if split is None:
            if not config.dataset:
                raise ValueError("no dataset configured")
            split = ingest_dataset(config.dataset, config)
        data = load_split_arrays(split)
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as pool:
            futures = [pool.submit(_run_cell, config, c, r, data, out) for c, r in cells]
            rows = [f.result() for f in futures]
    else:
        rows = [_run_cell(config, c, r, data, out) for c, r in cells]
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.csv").write_text(ablation_csv(rows))
    return rows


# -- capacity -------------------------------------------------------------

def capacity_bpp(cover_shape: tuple[int, int], secret_shape: tuple[int, int],
                 bits: int = 8) -> float:
    """Payload bits per cover pixel. Only equal-size secrets are supported."""
    ch, cw = cover_shape[:2]
    sh, sw = secret_shape[:2]
    if (ch, cw) != (sh, sw):
        ratio = bits * sh * sw / (ch * cw)
        raise ValueError(f"secret {sh}x{sw} differs from cover {ch}x{cw} "
                         f"({ratio:g} bpp); only equal sizes are supported")
    return float(bits)


def capacity_report(config: RunConfig) -> dict:
    """Capacity of the configured model; independent of wavelet and channel."""
    size = (config.size, config.size)
    return {"cover": f"{config.size}x{config.size}x3", "secret": f"{config.size}x{config.size}x1",
            "bpp": capacity_bpp(size, size), "wavelet": config.wavelet}


def config_dict(config: RunConfig) -> dict:
    return asdict(config)
