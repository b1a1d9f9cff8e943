"""Figure export: atom montages, reconstruction grids, metric charts."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from PIL import Image


def scale_to_u8(tile: np.ndarray) -> np.ndarray:
    """Min-max scale one tile to uint8; flat tiles map to mid-gray."""
    lo, hi = float(tile.min()), float(tile.max())
    if hi - lo < 1e-300:
        return np.full(tile.shape, 128, dtype=np.uint8)
    return np.rint((tile - lo) / (hi - lo) * 255.0).astype(np.uint8)


def montage(tiles: Sequence[np.ndarray], cols: int | None = None,
            pad: int = 1, scale: int = 4) -> np.ndarray:
    """Arrange 2-D uint8 tiles on a near-square grid with separators.

    Tiles are upscaled by ``scale`` with nearest-neighbor replication so
    small atoms stay visible.
    """
    tiles = [np.kron(t, np.ones((scale, scale), dtype=np.uint8)) for t in tiles]
    n = len(tiles)
    cols = int(np.ceil(np.sqrt(n))) if cols is None else cols
    rows = int(np.ceil(n / cols))
    th = max(t.shape[0] for t in tiles)
    tw = max(t.shape[1] for t in tiles)
    canvas = np.zeros((rows * (th + pad) + pad, cols * (tw + pad) + pad), dtype=np.uint8)
    for idx, tile in enumerate(tiles):
        r, c = divmod(idx, cols)
        top = pad + r * (th + pad)
        left = pad + c * (tw + pad)
        canvas[top : top + tile.shape[0], left : left + tile.shape[1]] = tile
    return canvas


def atom_montage(atoms: np.ndarray, scale: int = 4) -> np.ndarray:
    """Montage of a filter bank; each atom min-max scaled independently.

    Multichannel atoms are laid out as one row of channel planes per atom
    (scaled jointly across the atom's channels).
    """
    num_atoms, channels = atoms.shape[:2]
    tiles = []
    for j in range(num_atoms):
        scaled = scale_to_u8(atoms[j])
        tiles.append(np.hstack([scaled[c] for c in range(channels)]))
    cols = 1 if channels > 1 else None
    return montage(tiles, cols=cols, scale=scale)


def save_png(path, gray: np.ndarray) -> None:
    Image.fromarray(np.asarray(gray, dtype=np.uint8), mode="L").save(path)


def reconstruction_grid(pairs: Sequence[tuple[np.ndarray, np.ndarray]],
                        scale: int = 2) -> np.ndarray:
    """Side-by-side original|reconstruction tiles, shared scaling per pair."""
    tiles = []
    for original, recon in pairs:
        stacked = np.stack([original, recon])
        u8 = scale_to_u8(stacked)
        tiles.append(np.hstack([u8[0], u8[1]]))
    return montage(tiles, cols=1, pad=2, scale=scale)


def line_chart_svg(path, xs: Sequence[float], ys: Sequence[float],
                   title: str, ylabel: str) -> None:
    """One SVG line chart; a single point renders as a marker."""
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(list(xs), list(ys), marker="o" if len(xs) <= 60 else None, lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def export_figures(model, metrics_history, out_dir, sample_pairs=()) -> list[str]:
    """Write all montages and charts for a trained model; returns the paths."""
    from .model import compose_effective

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    for lyr in model.layers:
        path = out / f"dictionary_layer{lyr.layer_index}.png"
        save_png(path, atom_montage(lyr.atoms))
        written.append(str(path))

    eff = compose_effective(model, model.num_layers)
    path = out / "effective_dictionary.png"
    save_png(path, atom_montage(eff.atoms))
    written.append(str(path))

    if sample_pairs:
        path = out / "reconstructions.png"
        save_png(path, reconstruction_grid(sample_pairs))
        written.append(str(path))

    if metrics_history:
        epochs = list(range(1, len(metrics_history) + 1))
        path = out / "mse.svg"
        line_chart_svg(
            path, epochs, [m.mse for m in metrics_history],
            "Reconstruction error", "mean squared error",
        )
        written.append(str(path))
        deepest = len(metrics_history[0].dict_density)
        path = out / "dict_density.svg"
        line_chart_svg(
            path, epochs,
            [m.dict_density[deepest - 1] for m in metrics_history],
            f"Layer {deepest} dictionary density", "fraction of nonzero entries",
        )
        written.append(str(path))
    return written
