#!/usr/bin/env python3
"""Walk one image through the preprocessing pipeline step by step.

Writes a synthetic PGM, loads it back, resizes it with corner-aligned
bilinear sampling, and applies local contrast normalization, saving each
stage as a PNG and printing the statistics that the normalization is
supposed to flatten.
"""

import argparse
from pathlib import Path

import numpy as np

from mlcsc import (
    gaussian_local_mean,
    load_pgm,
    local_contrast_normalize,
    resize_bilinear,
    write_pgm,
)
from mlcsc.figures import save_png, scale_to_u8

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--out", default="demos/output/preprocessing")
args = parser.parse_args()
out_dir = Path(args.out)
out_dir.mkdir(parents=True, exist_ok=True)

rng = np.random.default_rng(11)

# A synthetic "portrait": smooth blobs plus a bright vignette, 92x112 like
# a typical face-corpus source frame.
yy, xx = np.mgrid[0:112, 0:92] / 100.0
img = (
    0.55
    + 0.25 * np.exp(-((yy - 0.5) ** 2 + (xx - 0.45) ** 2) / 0.02)
    - 0.20 * np.exp(-((yy - 0.75) ** 2 + (xx - 0.45) ** 2) / 0.01)
    + 0.05 * rng.standard_normal((112, 92))
)
img = np.clip(img, 0.0, 1.0)

pgm_path = out_dir / "source.pgm"
write_pgm(pgm_path, img)
loaded = load_pgm(pgm_path)
print(f"wrote and re-read {pgm_path}: shape {loaded.shape}, "
      f"range [{loaded.min():.3f}, {loaded.max():.3f}]")

resized = resize_bilinear(loaded, 64, 64)
print(f"resized to {resized.shape}; range stays within the input range: "
      f"[{resized.min():.3f}, {resized.max():.3f}]")

normalized = local_contrast_normalize(resized, window=9)
local_mean_before = gaussian_local_mean(resized, 9)
print(f"local mean spread before LCN: {local_mean_before.std():.4f}")
print(f"LCN output: mean {normalized.mean():+.4f}, std {normalized.std():.4f}")

flat = local_contrast_normalize(np.full((64, 64), 0.7), window=9)
print(f"constant image maps to zero: max |output| = {np.abs(flat).max():.2e}")

save_png(out_dir / "1_source.png", scale_to_u8(loaded))
save_png(out_dir / "2_resized.png", scale_to_u8(resized))
save_png(out_dir / "3_normalized.png", scale_to_u8(normalized))
print(f"wrote stage images to {out_dir}")
