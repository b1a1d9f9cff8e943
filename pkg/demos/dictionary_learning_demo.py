#!/usr/bin/env python3
"""Learn a two-layer convolutional dictionary from synthetic images.

Generates a corpus from a known two-layer model with sparse deep codes,
trains a fresh model on it, and saves the error curve plus montages of
the learned atoms and their effective (composed) receptive fields.
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from mlcsc import (
    FistaParams,
    TrainingConfig,
    compose_effective,
    fit,
    init_model,
    normalize_atoms,
    synthesize,
)
from mlcsc.figures import atom_montage, save_png

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--epochs", type=int, default=60)
parser.add_argument("--images", type=int, default=24)
parser.add_argument("--out", default="demos/output/dictionary_learning")
args = parser.parse_args()
out_dir = Path(args.out)
out_dir.mkdir(parents=True, exist_ok=True)

rng = np.random.default_rng(3)

# The generating model: 3 atoms of 3x3 under 3 atoms of 3x3 (5x5 effective).
truth_atoms1, _ = normalize_atoms(rng.standard_normal((3, 1, 3, 3)))
truth_atoms2, _ = normalize_atoms(rng.standard_normal((3, 3, 3, 3)))
from mlcsc.model import LayerDictionary, MlcscModel

truth = MlcscModel(layers=(
    LayerDictionary(truth_atoms1, 1), LayerDictionary(truth_atoms2, 2),
))
eff_truth = compose_effective(truth, 2)

images = []
code_shape = (3, 12, 12)  # 16x16 images with 5x5 effective atoms
for _ in range(args.images):
    mask = rng.random(code_shape) < 0.06
    amp = rng.uniform(0.5, 1.5, code_shape) * rng.choice([-1.0, 1.0], code_shape)
    images.append(synthesize(eff_truth.atoms, np.where(mask, amp, 0.0))[0])
print(f"generated {len(images)} images of 16x16 from the known model")

cfg = TrainingConfig(
    learning_rate=0.1,
    dict_thresholds=(1e-4,),
    epochs=args.epochs,
    batch_size=8,
    seed=1,
    fista=FistaParams(penalty=0.15, max_iters=100, rel_tol=1e-8,
                      lipschitz_iters=20, seed=2),
)
student = init_model([(3, 3), (3, 3)], seed=42)
model, metrics = fit(images, cfg, student)

mse = [m.mse for m in metrics]
print(f"MSE epoch 1: {mse[0]:.3e}  epoch {len(mse)}: {mse[-1]:.3e} "
      f"(ratio {mse[-1] / mse[0]:.3f})")
print(f"final code density {metrics[-1].code_density:.3f}, "
      f"layer-2 dictionary density {metrics[-1].dict_density[1]:.3f}")

fig, ax = plt.subplots(figsize=(5, 3.2))
ax.plot(range(1, len(mse) + 1), mse)
ax.set_xlabel("epoch")
ax.set_ylabel("dataset MSE")
ax.set_title("Reconstruction error while learning")
fig.tight_layout()
fig.savefig(out_dir / "error_curve.png", dpi=120)

save_png(out_dir / "learned_layer1.png", atom_montage(model.layers[0].atoms, scale=16))
save_png(out_dir / "learned_effective.png",
         atom_montage(compose_effective(model, 2).atoms, scale=16))
save_png(out_dir / "truth_effective.png", atom_montage(eff_truth.atoms, scale=16))
print(f"wrote error curve and atom montages to {out_dir}")
