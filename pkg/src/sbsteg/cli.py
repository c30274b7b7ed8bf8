"""Command line entry point: ``sbsteg {train,embed,extract,evaluate,ablate,capacity}``.

Every subcommand reads an optional ``--config`` file (``key = value`` lines)
and then applies flag overrides. On success a single JSON object is printed
to stdout; on failure a single JSON line ``{"error": ..., "message": ...}``
goes to stderr and the exit status is nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import RunConfig, desk_config, load_config

__all__ = ["main", "build_parser"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("UsageError", message, 2)


def _fail(kind: str, message: str, code: int = 1):
    print(json.dumps({"error": kind, "message": " ".join(str(message).split())}),
          file=sys.stderr)
    raise SystemExit(code)


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="key=value config file")
    p.add_argument("--dataset", help="image directory")
    p.add_argument("--size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--wavelet", choices=("haar", "dmey"))
    p.add_argument("--channel", choices=("B", "R", "G", "Y", "L", "V"))
    p.add_argument("--subband", choices=("cD", "cA", "all", "spatial"), dest="region")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory or file")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="sbsteg", description="Hide a gray image in a colour cover's DWT sub-band.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("train", parents=[common], help="train and write a checkpoint")
    p = sub.add_parser("embed", parents=[common], help="hide one secret in one cover")
    p.add_argument("--cover", required=True)
    p.add_argument("--secret", required=True)
    p.add_argument("--checkpoint", required=True)
    p = sub.add_parser("extract", parents=[common], help="recover the secret from a stego image")
    p.add_argument("--stego", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--reference", help="original secret, to report S_PSNR")
    p = sub.add_parser("evaluate", parents=[common], help="score a checkpoint on the test split")
    p.add_argument("--checkpoint", required=True)
    p = sub.add_parser("ablate", parents=[common], help="train/evaluate a matrix of cells")
    p.add_argument("--cells", default="B:cD,B:cA,B:all,B:spatial",
                   help="comma-separated CHANNEL:SUBBAND pairs")
    p.add_argument("--workers", type=int, default=1)
    sub.add_parser("capacity", parents=[common], help="report payload bits per pixel")
    return parser


def config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else desk_config()
    keys = ("dataset", "size", "epochs", "batch_size", "lr", "beta", "wavelet", "channel",
            "region", "seed", "out")
    cfg = cfg.with_overrides(**{k: getattr(args, k) for k in keys})
    return cfg.validate()


def _parse_cells(text: str) -> list[tuple[str, str]]:
    cells = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if ":" not in item:
            raise ValueError(f"cell {item!r} is not CHANNEL:SUBBAND")
        ch, region = item.split(":", 1)
        cells.append((ch.strip().upper(), region.strip()))
    return cells


def _out_file(args, default: str) -> Path:
    out = Path(args.out) if args.out else Path(default)
    return out / default if out.is_dir() else out


def run(args, cfg: RunConfig) -> dict:
    cmd = args.command
    if cmd == "train":
        res = pipeline.train(cfg)
        return {"checkpoint": str(res.checkpoint), "loss_log": str(res.loss_log),
                "first_loss": res.losses[0], "final_loss": res.losses[-1]}
    if cmd == "embed":
        path, rep = pipeline.embed(args.cover, args.secret, args.checkpoint,
                                   _out_file(args, "stego.png"))
        return {"stego": str(path), "psnr": rep.psnr, "cl_psnr": rep.cl_psnr, "ssim": rep.ssim,
                "err_px": rep.error_per_pixel}
    if cmd == "extract":
        path, rep = pipeline.extract(args.stego, args.checkpoint, _out_file(args, "secret.png"),
                                     args.reference)
        out = {"secret": str(path)}
        if rep is not None:
            out.update(s_psnr=rep.psnr, s_ssim=rep.ssim)
        return out
    if cmd == "evaluate":
        if not cfg.dataset:
            raise ValueError("evaluate needs --dataset or dataset= in the config")
        split = pipeline.ingest_dataset(cfg.dataset, cfg)
        res = pipeline.evaluate(split, args.checkpoint, cfg.out)
        return {"summary": res.summary, **{f"{k}_csv": str(v) for k, v in res.paths.items()}}
    if cmd == "ablate":
        rows = pipeline.ablate(cfg, _parse_cells(args.cells), workers=args.workers)
        return {"csv": str(Path(cfg.out) / "ablation.csv"),
                "cells": [{"cell": r.cell, "status": r.status, "error": r.error} for r in rows]}
    if cmd == "capacity":
        return pipeline.capacity_report(cfg)
    raise ValueError(f"unknown command {cmd}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        result = run(args, cfg)
    except SystemExit:
        raise
    except Exception as exc:
        _fail(type(exc).__name__, str(exc))
    print(json.dumps(result, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
