"""
Hiding a gray image in a colour one
===================================

Train a small encoder/decoder pair on the committed 64x64 fixture, hide a
held-out secret in a held-out cover, write the stego PNG, read it back and
recover the secret. A handful of epochs is enough to see the idea; the
acceptance suite trains the full 50.
"""

import sys
from pathlib import Path

from sbsteg import pipeline
from sbsteg.config import desk_config
from sbsteg.image_core import save_image
from sbsteg.metrics import amplified_residual

here = Path(__file__).parent
out = here / "out"
epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 8

cfg = desk_config(dataset=str(here.parent / "tests" / "data" / "desk"), epochs=epochs,
                  out=str(out / "run"))
split = pipeline.ingest_dataset(cfg.dataset, cfg)
print(f"{len(split.train_covers)} training pairs, {len(split.test_covers)} test pairs")

###############################################################################
# Training: the encoder writes the secret's four sub-bands into cD of the
# cover's blue channel; the decoder reads them back after the stego has been
# rounded to 8 bits, which the training loop simulates.

res = pipeline.train(cfg, split=split)
print(f"loss {res.losses[0]:.4f} -> {res.losses[-1]:.4f} over {epochs} epochs")

###############################################################################
# One pair through the file-based commands.

cover, secret = split.test_covers[0], split.test_secrets[0]
secret_png = out / "secret.png"
covers, secrets = pipeline.load_split_arrays(split)[2:]
save_image(secret_png, secrets[0])
stego_png, rep = pipeline.embed(cover, secret_png, res.checkpoint, out / "stego.png")
print(f"stego vs cover: PSNR {rep.psnr:.2f} dB, CL-PSNR {rep.cl_psnr:.2f} dB, SSIM {rep.ssim:.4f}")
rec_png, srep = pipeline.extract(stego_png, res.checkpoint, out / "recovered.png",
                                 reference=secret_png)
print(f"recovered vs secret: PSNR {srep.psnr:.2f} dB, SSIM {srep.ssim:.4f}")
save_image(out / "residual_x10.png", amplified_residual(covers[0], pipeline.embed_arrays(
    res.params, covers[:1], secrets[:1])[0]))

###############################################################################
# The whole test split, summarised like a results table.

ev = pipeline.evaluate(split, res.checkpoint, out / "eval")
print({k: round(v, 3) for k, v in ev.summary.items()})
print("capacity:", pipeline.capacity_report(cfg)["bpp"], "bpp")
