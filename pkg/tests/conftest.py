"""Shared test oracles: dense operator assembly, naive loops, reference solvers.

Everything here deliberately avoids the library's convolution code paths
so the tests compare two independent routes to the same quantity.
"""

from __future__ import annotations

import numpy as np
import pytest

from mlcsc.model import LayerDictionary, MlcscModel, SparseCode


def dense_full_conv_matrix(in_shape: tuple[int, int], kernel: np.ndarray) -> np.ndarray:
    """Toeplitz-structured matrix of full convolution with ``kernel``.

    Maps vec(x) with shape ``in_shape`` (row-major) to vec of the full
    convolution output; assembled entry by entry from the definition
    ``out[i, j] = sum a[p, q] k[i-p, j-q]``.
    """
    ha, wa = in_shape
    hk, wk = kernel.shape
    ho, wo = ha + hk - 1, wa + wk - 1
    mat = np.zeros((ho * wo, ha * wa))
    for i in range(ho):
        for j in range(wo):
            for p in range(ha):
                for q in range(wa):
                    ki, kj = i - p, j - q
                    if 0 <= ki < hk and 0 <= kj < wk:
                        mat[i * wo + j, p * wa + q] = kernel[ki, kj]
    return mat


def dense_synthesis_matrix(atoms: np.ndarray, map_shape: tuple[int, int]) -> np.ndarray:
    """Dense matrix of multichannel synthesis: vec(maps) -> vec(signal).

    Block (c, j) is the full-convolution matrix of atom j's channel c.
    Vectorization is row-major over (index, height, width).
    """
    num_atoms, channels, kh, kw = atoms.shape
    mh, mw = map_shape
    oh, ow = mh + kh - 1, mw + kw - 1
    mat = np.zeros((channels * oh * ow, num_atoms * mh * mw))
    for c in range(channels):
        for j in range(num_atoms):
            block = dense_full_conv_matrix(map_shape, atoms[j, c])
            mat[
                c * oh * ow : (c + 1) * oh * ow,
                j * mh * mw : (j + 1) * mh * mw,
            ] += block
    return mat


def naive_correlate_valid(a: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Sliding-window dot products by two nested loops."""
    ha, wa = a.shape
    hk, wk = k.shape
    out = np.zeros((ha - hk + 1, wa - wk + 1))
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            out[i, j] = float((a[i : i + hk, j : j + wk] * k).sum())
    return out


def naive_full_convolve(a: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Full convolution straight from the definition (nested loops)."""
    ha, wa = a.shape
    hk, wk = k.shape
    out = np.zeros((ha + hk - 1, wa + wk - 1))
    for p in range(ha):
        for q in range(wa):
            out[p : p + hk, q : q + wk] += a[p, q] * k
    return out


def random_model(
    rng: np.random.Generator,
    arch: list[tuple[int, tuple[int, int]]],
    unit_norm: bool = True,
) -> MlcscModel:
    """Random model without going through the library's initializer."""
    layers = []
    in_channels = 1
    for index, (num_atoms, (kh, kw)) in enumerate(arch, start=1):
        atoms = rng.standard_normal((num_atoms, in_channels, kh, kw))
        if unit_norm:
            atoms /= np.sqrt((atoms**2).sum(axis=(1, 2, 3)))[:, None, None, None]
        layers.append(LayerDictionary(atoms=atoms, layer_index=index))
        in_channels = num_atoms
    return MlcscModel(layers=tuple(layers))


def dense_effective_matrix(model: MlcscModel, image_shape: tuple[int, int]) -> np.ndarray:
    """Dense matrix of the whole model: vec(deepest code) -> vec(image).

    Built as the product of per-layer dense synthesis matrices, entirely
    outside the library's composition code. ``map_shape[i]`` is the
    spatial shape of layer i's coefficient maps (full-convolution size
    law applied downward from the image).
    """
    map_shape = {0: image_shape}
    for lyr in model.layers:
        kh, kw = lyr.kernel_shape
        ph, pw = map_shape[lyr.layer_index - 1]
        map_shape[lyr.layer_index] = (ph - kh + 1, pw - kw + 1)
    mat = None
    for depth in range(1, model.num_layers + 1):
        block = dense_synthesis_matrix(
            model.layers[depth - 1].atoms, map_shape[depth]
        )
        mat = block if mat is None else mat @ block
    return mat


def ista_dense(
    mat: np.ndarray,
    y_vec: np.ndarray,
    penalty: float,
    iters: int,
    lipschitz: float | None = None,
) -> tuple[np.ndarray, list[float]]:
    """Reference ISTA on the dense operator for ``min ||Ax-y||^2 + p||x||_1``.

    Uses the exact largest eigenvalue of A^T A for the step size; returns
    the final iterate and the objective trace (including the start).
    """
    gram = mat.T @ mat
    corr = mat.T @ y_vec
    if lipschitz is None:
        lipschitz = float(np.linalg.eigvalsh(gram).max())
    x = np.zeros(mat.shape[1])

    def objective(v):
        r = mat @ v - y_vec
        return float(r @ r + penalty * np.abs(v).sum())

    trace = [objective(x)]
    thresh = penalty / (2.0 * lipschitz)
    for _ in range(iters):
        grad_half = gram @ x - corr
        x = x - grad_half / lipschitz
        x = np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)
        trace.append(objective(x))
    return x, trace


def finite_difference_gradient(objective, atoms: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar objective w.r.t. an atom tensor."""
    grad = np.zeros_like(atoms)
    it = np.nditer(atoms, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        bumped = atoms.copy()
        bumped[idx] += h
        f_plus = objective(bumped)
        bumped[idx] -= 2 * h
        f_minus = objective(bumped)
        grad[idx] = (f_plus - f_minus) / (2 * h)
        it.iternext()
    return grad


def synthetic_corpus(
    model: MlcscModel,
    n_images: int,
    image_shape: tuple[int, int],
    density: float,
    seed: int,
    amplitude: tuple[float, float] = (0.5, 1.5),
) -> list[np.ndarray]:
    """Images generated from a known model with sparse random codes.

    Active coefficients get a random sign and a magnitude bounded away
    from zero (near-zero activations are unidentifiable and say nothing
    about the learner). The generative construction itself is the oracle:
    a learner given the same architecture should drive the error down.
    """
    from mlcsc.model import compose_effective
    from mlcsc import ops

    rng = np.random.default_rng(seed)
    eff = compose_effective(model, model.num_layers)
    eh, ew = eff.kernel_shape
    shape = (eff.num_atoms, image_shape[0] - eh + 1, image_shape[1] - ew + 1)
    images = []
    for _ in range(n_images):
        mask = rng.random(shape) < density
        magnitudes = rng.uniform(amplitude[0], amplitude[1], shape)
        signs = rng.choice([-1.0, 1.0], shape)
        images.append(ops.synthesize(eff.atoms, np.where(mask, magnitudes * signs, 0.0))[0])
    return images


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
