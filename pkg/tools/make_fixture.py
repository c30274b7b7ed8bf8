"""Regenerate the committed natural-image fixture under tests/data/desk/.

Random crops of scikit-image's bundled photographs, resampled to 64x64.
Crop positions and scales come from a fixed seed, so the output is
reproducible for a given scikit-image release.

    python tools/make_fixture.py [--count 440] [--size 64] [--out tests/data/desk]
"""

import argparse
from pathlib import Path

import numpy as np
from PIL import Image
from skimage import data

SOURCES = ("astronaut", "coffee", "chelsea", "rocket", "hubble_deep_field",
           "immunohistochemistry", "retina", "motorcycle_left", "motorcycle_right")


def load_sources():
    out = {}
    for name in SOURCES:
        fn = getattr(data, name, None)
        if fn is None:
            continue
        img = fn()
        if isinstance(img, tuple):
            img = img[0]
        img = np.asarray(img)
        if img.ndim == 3 and img.shape[2] >= 3:
            out[name] = img[..., :3].astype(np.uint8)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--count", type=int, default=440)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--seed", type=int, default=20221014)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests/data/desk"))
    args = ap.parse_args()

    sources = load_sources()
    names = sorted(sources)
    rng = np.random.default_rng(args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        name = names[k % len(names)]
        img = sources[name]
        h, w = img.shape[:2]
        side = int(args.size * rng.uniform(1.0, 4.0))
        side = min(side, h, w)
        y = int(rng.integers(0, h - side + 1))
        x = int(rng.integers(0, w - side + 1))
        crop = Image.fromarray(img[y:y + side, x:x + side])
        crop = crop.resize((args.size, args.size), Image.LANCZOS)
        crop.save(out / f"{k:04d}_{name}.png")
    print(f"wrote {args.count} images to {out}")


if __name__ == "__main__":
    main()
