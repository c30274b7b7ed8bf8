"""
Measuring how visible a change is
=================================

PSNR looks at raw channel error; CL-PSNR feeds per-pixel CIE94 colour
differences through the same log formula; SSIM compares local structure.
Here all three watch the same image get noisier.
"""

from pathlib import Path

import numpy as np

from sbsteg import metrics as M
from sbsteg.image_core import load_image, save_image

here = Path(__file__).parent
cover = load_image(here.parent / "tests" / "data" / "desk" / "0002_coffee.png").astype(float)
rng = np.random.default_rng(0)
out = here / "out"
out.mkdir(exist_ok=True)

print(f"{'noise':>5} {'PSNR':>7} {'CL-PSNR':>8} {'SSIM':>7} {'err/px':>7} {'mod%':>6}")
for amp in (0, 1, 2, 4, 8, 16):
    noisy = np.clip(cover + amp * rng.choice([-1.0, 1.0], cover.shape), 0, 255)
    r = M.quality_report(cover, noisy)
    print(f"{amp:5d} {r.psnr:7.2f} {r.cl_psnr:8.2f} {r.ssim:7.4f} "
          f"{r.error_per_pixel:7.2f} {r.modification_percentage:6.2f}")

###############################################################################
# Identical images hit the 100 dB cap rather than infinity.

print("PSNR(a, a) =", M.psnr(cover, cover), " CL-PSNR(a, a) =", M.cl_psnr(cover, cover))

###############################################################################
# A just-noticeable-difference map says how much each pixel could move
# unseen: more in bright or busy areas, less in flat mid-gray.

jnd = M.jnd_map(cover)
print(f"JND range {jnd.min():.1f} .. {jnd.max():.1f}, mean {M.jnd_threshold(cover):.2f}")

###############################################################################
# Heat map of a blue-only change: red where the stego got brighter.

stego = cover.copy()
stego[16:48, 16:48, 2] += 6
save_image(out / "heat_map.png", M.heat_map(cover, stego))
save_image(out / "residual_x10.png", M.amplified_residual(cover, stego))
