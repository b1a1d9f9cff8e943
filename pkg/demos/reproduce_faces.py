#!/usr/bin/env python3
"""Full face-corpus experiment: the two-layer 8@8x8 + 16@16x16 pipeline.

Points the training CLI at a directory of face images (40 subjects of 10
PGM frames in the usual ``s<N>/<M>.pgm`` layout), trains the two-layer
model on 64x64 contrast-normalized images, then exports the dictionary
montages, reconstruction grid, and metric charts.

At full scale (1000 epochs over 400 images) this runs for hours; pass
--epochs for a shorter look at the same pipeline.
"""

import argparse
import sys
from pathlib import Path

from mlcsc.cli import main as cli_main
from mlcsc.data import default_data_dir

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--data", default=default_data_dir(),
                    help="face corpus root (default: MLCSC_DATA_DIR)")
parser.add_argument("--epochs", type=int, default=1000)
parser.add_argument("--out", default="demos/output/faces")
parser.add_argument("--checkpoint-every", type=int, default=25)
args = parser.parse_args()

if not args.data:
    sys.exit("no corpus: pass --data or set MLCSC_DATA_DIR")

out_dir = Path(args.out)
out_dir.mkdir(parents=True, exist_ok=True)

config_text = f"""
[model]
architecture = 8@8x8, 16@16x16

[data]
source = {args.data}
image_size = 64x64
lcn_window = 9
lcn_epsilon = 1e-8

[training]
learning_rate = 1e-3
dict_thresholds = 1e-4
epochs = {args.epochs}
batch_size = 20
seed = 0

[fista]
penalty = 0.1
max_iters = 200
rel_tol = 1e-6
lipschitz_iters = 50
seed = 0

[output]
directory = {out_dir / "run"}
checkpoint_every = {args.checkpoint_every}
"""
config_path = out_dir / "faces.cfg"
config_path.write_text(config_text)
print(f"wrote {config_path}")

status = cli_main(["-v", "train", "--config", str(config_path)])
if status != 0:
    sys.exit(status)

ckpt = out_dir / "run" / f"ckpt-{args.epochs:05d}.ckpt"
status = cli_main(["export-figures", "--ckpt", str(ckpt),
                   "--out", str(out_dir / "figures")])
if status != 0:
    sys.exit(status)
print(f"done; metrics in {out_dir / 'run' / 'metrics.csv'}, "
      f"figures in {out_dir / 'figures'}")
