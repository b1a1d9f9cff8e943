#!/usr/bin/env python3
"""Sparse-code one image against a random dictionary and watch FISTA work.

Builds a small single-layer dictionary, synthesizes an image from a known
sparse code, then recovers a code from the image alone. Prints the
objective trace and compares the recovered support with the truth.
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from mlcsc import (
    FistaParams,
    fista_solve,
    lasso_objective,
    normalize_atoms,
    sparsity_fraction,
    synthesize,
)
from mlcsc.model import EffectiveDictionary

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--out", default="demos/output/sparse_coding")
args = parser.parse_args()
out_dir = Path(args.out)
out_dir.mkdir(parents=True, exist_ok=True)

rng = np.random.default_rng(7)

# A dictionary of 3 unit-norm 5x5 atoms.
atoms, _ = normalize_atoms(rng.standard_normal((3, 1, 5, 5)))
dictionary = EffectiveDictionary(atoms=atoms, depth=1)

# Ground-truth code: 6 active coefficients out of 3 * 12 * 12.
true_code = np.zeros((3, 12, 12))
for _ in range(6):
    j, r, c = rng.integers(3), rng.integers(12), rng.integers(12)
    true_code[j, r, c] = rng.uniform(0.8, 1.6) * rng.choice([-1, 1])
image = synthesize(atoms, true_code)[0]
print(f"image 16x16 synthesized from {np.count_nonzero(true_code)} active coefficients")

# Recover a sparse code from the image alone.
params = FistaParams(penalty=0.15, max_iters=400, rel_tol=1e-12)
result = fista_solve(image, dictionary, params)
code = result.code.maps

print(f"FISTA ran {result.iterations_used} iterations (converged={result.converged})")
print(f"objective {result.objective_trace[0]:.4f} -> {result.objective_trace[-1]:.6f}")
print(f"code density {sparsity_fraction(code):.3f} "
      f"(truth {sparsity_fraction(true_code):.3f})")

true_support = set(zip(*np.nonzero(true_code)))
found_support = set(zip(*np.nonzero(code)))
print(f"true support recovered: {len(true_support & found_support)}/{len(true_support)}")

recon = synthesize(atoms, code)[0]
print(f"reconstruction MSE {((image - recon) ** 2).mean():.2e}")
print(f"objective re-check {lasso_objective(image, dictionary, result.code, params.penalty):.6f}")

fig, axes = plt.subplots(1, 2, figsize=(9, 3.2))
axes[0].semilogy(result.objective_trace)
axes[0].set_xlabel("iteration")
axes[0].set_ylabel("objective")
axes[0].set_title("FISTA objective trace")
axes[1].imshow(np.hstack([image, recon]), cmap="gray")
axes[1].set_title("image | reconstruction")
axes[1].axis("off")
fig.tight_layout()
fig.savefig(out_dir / "sparse_coding.png", dpi=120)
print(f"wrote {out_dir / 'sparse_coding.png'}")
