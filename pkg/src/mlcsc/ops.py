"""Multichannel 2D convolution operators, their adjoints, and spectral estimation.

Array conventions used throughout the package (all float64):

* plane:  2-D array ``(height, width)`` -- a single image or coefficient map
* signal: 3-D array ``(channels, height, width)``
* filter bank: 4-D array ``(num_atoms, in_channels, kernel_h, kernel_w)``
* code maps:   3-D array ``(num_atoms, map_h, map_w)``

Synthesis is true convolution (kernel flip) with zero padding and a "full"
output; the adjoint is cross-correlation (no flip) with a "valid" output.
That pairing is what makes ``<synthesize(d, x), y> == <x, analyze(d, y)>``
hold exactly, and the tests enforce it.

Convolutions are evaluated with scipy's direct (non-FFT) kernels; stride
is always 1 and the only boundary mode is zero padding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import signal as _sig


def _as_plane(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    return a


def conv2d_full(a: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Full (zero padded) 2-D convolution of plane ``a`` with kernel ``k``.

    ``out[i, j] = sum_{p,q} a[p, q] * k[i - p, j - q]`` with output shape
    ``(Ha + Hk - 1, Wa + Wk - 1)``.
    """
    a = _as_plane(a, "a")
    k = _as_plane(k, "k")
    return _sig.convolve2d(a, k, mode="full", boundary="fill")


def conv2d_valid(a: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Valid cross-correlation of ``a`` with ``k`` (no kernel flip).

    Sliding-window dot products at complete-overlap shifts only; output
    shape ``(Ha - Hk + 1, Wa - Wk + 1)``. This is the adjoint of
    ``conv2d_full(., k)``.
    """
    a = _as_plane(a, "a")
    k = _as_plane(k, "k")
    if a.shape[0] < k.shape[0] or a.shape[1] < k.shape[1]:
        raise ValueError(
            f"kernel {k.shape} larger than array {a.shape} in valid correlation"
        )
    return _sig.correlate2d(a, k, mode="valid", boundary="fill")


def synthesize(atoms: np.ndarray, maps: np.ndarray) -> np.ndarray:
    """Synthesize a multichannel signal from code maps and a filter bank.

    Parameters
    ----------
    atoms : (J, C, kh, kw) array
        Filter bank; atom j contributes its channel-c kernel to output
        channel c.
    maps : (J, mh, mw) array
        One coefficient map per atom.

    Returns
    -------
    (C, mh + kh - 1, mw + kw - 1) array
        ``out[c] = sum_j conv2d_full(maps[j], atoms[j, c])``.
    """
    atoms = np.asarray(atoms, dtype=np.float64)
    maps = np.asarray(maps, dtype=np.float64)
    if atoms.ndim != 4:
        raise ValueError(f"atoms must be 4-D, got shape {atoms.shape}")
    if maps.ndim != 3:
        raise ValueError(f"maps must be 3-D, got shape {maps.shape}")
    num_atoms, channels, kh, kw = atoms.shape
    if maps.shape[0] != num_atoms:
        raise ValueError(
            f"code has {maps.shape[0]} maps but the bank has {num_atoms} atoms"
        )
    out_h = maps.shape[1] + kh - 1
    out_w = maps.shape[2] + kw - 1
    out = np.zeros((channels, out_h, out_w))
    for j in range(num_atoms):
        for c in range(channels):
            out[c] += _sig.convolve2d(maps[j], atoms[j, c], mode="full")
    return out


def analyze(atoms: np.ndarray, signal: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`synthesize`: correlate a signal against a filter bank.

    Returns a ``(J, H - kh + 1, W - kw + 1)`` array with
    ``out[j] = sum_c conv2d_valid(signal[c], atoms[j, c])``.
    """
    atoms = np.asarray(atoms, dtype=np.float64)
    signal = np.asarray(signal, dtype=np.float64)
    if atoms.ndim != 4:
        raise ValueError(f"atoms must be 4-D, got shape {atoms.shape}")
    if signal.ndim != 3:
        raise ValueError(f"signal must be 3-D, got shape {signal.shape}")
    num_atoms, channels, kh, kw = atoms.shape
    if signal.shape[0] != channels:
        raise ValueError(
            f"signal has {signal.shape[0]} channels but the bank expects {channels}"
        )
    if signal.shape[1] < kh or signal.shape[2] < kw:
        raise ValueError(
            f"signal {signal.shape} smaller than kernel ({kh}, {kw})"
        )
    out = np.zeros((num_atoms, signal.shape[1] - kh + 1, signal.shape[2] - kw + 1))
    for j in range(num_atoms):
        for c in range(channels):
            out[j] += _sig.correlate2d(signal[c], atoms[j, c], mode="valid")
    return out


@dataclass(frozen=True)
class LinearOp:
    """A linear operator given by matching forward/adjoint callables.

    The contract (enforced by the dot-product tests, not at call time) is
    ``<forward(x), y> == <x, adjoint(y)>`` for all conforming x, y.
    """

    forward: Callable[[np.ndarray], np.ndarray]
    adjoint: Callable[[np.ndarray], np.ndarray]
    in_shape: tuple[int, ...]
    out_shape: tuple[int, ...]


def synthesis_operator(atoms: np.ndarray, map_shape: tuple[int, int]) -> LinearOp:
    """The :func:`synthesize` / :func:`analyze` pair as a :class:`LinearOp`.

    ``map_shape`` is the spatial shape of each coefficient map.
    """
    atoms = np.asarray(atoms, dtype=np.float64)
    num_atoms, channels, kh, kw = atoms.shape
    mh, mw = map_shape
    return LinearOp(
        forward=lambda x: synthesize(atoms, x),
        adjoint=lambda y: analyze(atoms, y),
        in_shape=(num_atoms, mh, mw),
        out_shape=(channels, mh + kh - 1, mw + kw - 1),
    )


def operator_norm_sq(op: LinearOp, iters: int = 50, seed: int = 0) -> float:
    """Power-iteration estimate of the largest eigenvalue of ``adjoint o forward``.

    Equals the squared spectral norm of ``forward``; this is the Lipschitz
    scale used for FISTA step sizes. Deterministic given ``seed``; the
    estimate is non-decreasing in ``iters``. A zero operator returns 0.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.in_shape)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return 0.0
    v /= nv
    est = 0.0
    for _ in range(iters):
        w = op.adjoint(op.forward(v))
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        est = nw
        v = w / nw
    return est
