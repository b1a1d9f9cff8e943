"""Layered convolutional dictionaries: composition, normalization, inference.

A model is an ordered stack of layer dictionaries. Layer 1 filters the
single-channel input; layer i has one input channel per atom of layer
i - 1. Composing the stack by full convolution yields the "effective
dictionary": the input-space receptive field of each deepest-layer atom.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import ops
from .errors import DegenerateAtomError

NORM_EPS = 1e-12


@dataclass(frozen=True)
class LayerDictionary:
    """One layer's filter bank: ``atoms`` is (num_atoms, in_channels, kh, kw)."""

    atoms: np.ndarray
    layer_index: int

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=np.float64)
        object.__setattr__(self, "atoms", atoms)
        if atoms.ndim != 4 or min(atoms.shape) < 1:
            raise ValueError(f"atoms must be a non-empty 4-D tensor, got {atoms.shape}")
        if self.layer_index < 1:
            raise ValueError(f"layer_index must be >= 1, got {self.layer_index}")
        if not np.isfinite(atoms).all():
            raise ValueError("atoms contain non-finite entries")

    @property
    def num_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def in_channels(self) -> int:
        return self.atoms.shape[1]

    @property
    def kernel_shape(self) -> tuple[int, int]:
        return self.atoms.shape[2], self.atoms.shape[3]


@dataclass(frozen=True)
class EffectiveDictionary:
    """Composed single-channel atoms: ``atoms`` is (num_atoms, 1, eff_h, eff_w)."""

    atoms: np.ndarray
    depth: int

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=np.float64)
        object.__setattr__(self, "atoms", atoms)
        if atoms.ndim != 4 or atoms.shape[1] != 1:
            raise ValueError(
                f"effective atoms must be (J, 1, h, w), got {atoms.shape}"
            )

    @property
    def num_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def kernel_shape(self) -> tuple[int, int]:
        return self.atoms.shape[2], self.atoms.shape[3]


@dataclass(frozen=True)
class SparseCode:
    """Per-atom coefficient maps for one layer: ``maps`` is (num_atoms, mh, mw)."""

    maps: np.ndarray
    layer_index: int

    def __post_init__(self):
        maps = np.asarray(self.maps, dtype=np.float64)
        object.__setattr__(self, "maps", maps)
        if maps.ndim != 3:
            raise ValueError(f"maps must be 3-D, got {maps.shape}")

    @property
    def num_atoms(self) -> int:
        return self.maps.shape[0]


@dataclass(frozen=True)
class MlcscModel:
    """An ordered stack of layer dictionaries plus the expected input shape.

    ``input_shape`` is ``(1, H, W)`` once bound (the trainer binds it from
    the first image it sees); ``None`` until then.
    """

    layers: tuple[LayerDictionary, ...]
    input_shape: tuple[int, int, int] | None = None

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ValueError("a model needs at least one layer")
        if layers[0].in_channels != 1:
            raise ValueError(
                f"layer 1 must have 1 input channel, got {layers[0].in_channels}"
            )
        for lower, upper in zip(layers, layers[1:]):
            if upper.in_channels != lower.num_atoms:
                raise ValueError(
                    f"layer {upper.layer_index} expects {upper.in_channels} input "
                    f"channels but layer {lower.layer_index} has {lower.num_atoms} atoms"
                )
        if self.input_shape is not None:
            c, h, w = self.input_shape
            if c != 1 or h < 1 or w < 1:
                raise ValueError(f"input_shape must be (1, H, W), got {self.input_shape}")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def effective_kernel_shape(self, depth: int | None = None) -> tuple[int, int]:
        """Spatial size of the depth-``depth`` effective atoms (size law)."""
        depth = self.num_layers if depth is None else depth
        hs = [lyr.kernel_shape[0] for lyr in self.layers[:depth]]
        ws = [lyr.kernel_shape[1] for lyr in self.layers[:depth]]
        return sum(hs) - (depth - 1), sum(ws) - (depth - 1)

    def code_shape(self, image_shape: tuple[int, int]) -> tuple[int, int, int]:
        """Deepest code-map shape so reconstruction returns ``image_shape``."""
        eh, ew = self.effective_kernel_shape()
        h, w = image_shape
        if h < eh or w < ew:
            raise ValueError(
                f"image {image_shape} smaller than the effective atoms ({eh}, {ew})"
            )
        return self.layers[-1].num_atoms, h - eh + 1, w - ew + 1


def compose_effective(model: MlcscModel, depth: int) -> EffectiveDictionary:
    """Compose layers 1..depth into input-space atoms by full convolution.

    Atom j of the result is obtained by treating atom j of layer ``depth``
    as a stack of coefficient maps (one per layer depth-1 atom) and
    synthesizing down through the layers below.
    """
    if not 1 <= depth <= model.num_layers:
        raise ValueError(f"depth must be in [1, {model.num_layers}], got {depth}")
    top = model.layers[depth - 1]
    if depth == 1:
        return EffectiveDictionary(atoms=top.atoms.copy(), depth=1)
    composed = []
    for j in range(top.num_atoms):
        sig = top.atoms[j]
        for i in range(depth - 1, 0, -1):
            sig = ops.synthesize(model.layers[i - 1].atoms, sig)
        composed.append(sig)
    return EffectiveDictionary(atoms=np.stack(composed), depth=depth)


def atom_norms(d: LayerDictionary | EffectiveDictionary | np.ndarray) -> np.ndarray:
    """Per-atom l2 norm over all channels and pixels.

    May return inf for extreme inputs; callers that update dictionaries
    treat non-finite norms as divergence.
    """
    atoms = d if isinstance(d, np.ndarray) else d.atoms
    with np.errstate(over="ignore"):
        return np.sqrt((atoms * atoms).sum(axis=(1, 2, 3)))


def normalize_atoms(d):
    """Scale every atom to unit l2 norm; returns ``(normalized, norms)``.

    The reported norms are always the true computed ones (they are what
    code maps get rescaled by). Atoms already unit to within 1e-12 are
    returned unchanged, making repeated normalization a fixed point.
    """
    atoms = d if isinstance(d, np.ndarray) else d.atoms
    norms = atom_norms(atoms)
    if not np.isfinite(norms).all():
        raise DegenerateAtomError(
            "non-finite atom norms", np.flatnonzero(~np.isfinite(norms))
        )
    degenerate = np.flatnonzero(norms <= NORM_EPS)
    if degenerate.size:
        raise DegenerateAtomError("atom norm below 1e-12", degenerate)
    scale = np.where(np.abs(norms - 1.0) <= 1e-12, 1.0, norms)
    normalized = atoms / scale[:, None, None, None]
    if isinstance(d, np.ndarray):
        return normalized, norms
    return replace(d, atoms=normalized), norms


def project_down(code: SparseCode, model: MlcscModel, from_layer: int) -> SparseCode:
    """One top-down inference step: the layer ``from_layer - 1`` representation.

    Deep codes determine the shallower ones by plain synthesis, so a full
    descending pass followed by layer-1 synthesis equals reconstruction
    with the effective dictionary.
    """
    if from_layer < 2:
        raise ValueError(f"from_layer must be >= 2, got {from_layer}")
    if from_layer > model.num_layers:
        raise ValueError(
            f"from_layer {from_layer} exceeds model depth {model.num_layers}"
        )
    if code.layer_index != from_layer:
        raise ValueError(
            f"code belongs to layer {code.layer_index}, not {from_layer}"
        )
    maps = ops.synthesize(model.layers[from_layer - 1].atoms, code.maps)
    return SparseCode(maps=maps, layer_index=from_layer - 1)


def reconstruct(model: MlcscModel, code_deepest: SparseCode) -> np.ndarray:
    """Synthesize the input-space image from the deepest code."""
    depth = model.num_layers
    if code_deepest.layer_index != depth:
        raise ValueError(
            f"expected a layer-{depth} code, got layer {code_deepest.layer_index}"
        )
    eff = compose_effective(model, depth)
    out = ops.synthesize(eff.atoms, code_deepest.maps)
    if model.input_shape is not None and out.shape != model.input_shape:
        raise ValueError(
            f"reconstruction shape {out.shape} != model input shape {model.input_shape}"
        )
    return out[0]


def sparsity_fraction(t: np.ndarray) -> float:
    """Fraction of exactly-nonzero entries (soft thresholding yields exact zeros)."""
    t = np.asarray(t)
    if t.size == 0:
        return 0.0
    return float(np.count_nonzero(t)) / t.size


@dataclass(frozen=True)
class LayerCheck:
    """Per-layer result of :func:`validate_mlcsc`."""

    layer_index: int
    nonzeros: int
    sparsity_bound: float
    sparsity_ok: bool
    residual: float | None
    consistency_ok: bool | None


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[LayerCheck, ...]
    ok: bool


def validate_mlcsc(
    model: MlcscModel,
    codes: list[SparseCode],
    sparsity_bounds,
    signal: np.ndarray | None = None,
    tol: float = 1e-8,
) -> ValidationReport:
    """Check that per-layer codes form a valid multi-layer representation.

    For each layer i the l0 count of the code must not exceed
    ``sparsity_bounds[i-1]``, and for i >= 2 the layer i-1 code must equal
    the synthesis of the layer i code (l2 residual <= ``tol``). When
    ``signal`` is given the layer-1 equation against the input is checked
    too. Failures are reported, not raised.
    """
    if len(codes) != model.num_layers:
        raise ValueError(
            f"expected one code per layer ({model.num_layers}), got {len(codes)}"
        )
    bounds = list(sparsity_bounds)
    if len(bounds) != model.num_layers:
        raise ValueError(
            f"expected {model.num_layers} sparsity bounds, got {len(bounds)}"
        )
    checks = []
    for i in range(1, model.num_layers + 1):
        code = codes[i - 1]
        nnz = int(np.count_nonzero(code.maps))
        sparsity_ok = nnz <= bounds[i - 1]
        residual = None
        if i >= 2:
            below = ops.synthesize(model.layers[i - 1].atoms, code.maps)
            residual = float(np.linalg.norm(below - codes[i - 2].maps))
        elif signal is not None:
            below = ops.synthesize(model.layers[0].atoms, code.maps)
            residual = float(np.linalg.norm(below[0] - signal))
        consistency_ok = None if residual is None else residual <= tol
        checks.append(
            LayerCheck(
                layer_index=i,
                nonzeros=nnz,
                sparsity_bound=float(bounds[i - 1]),
                sparsity_ok=sparsity_ok,
                residual=residual,
                consistency_ok=consistency_ok,
            )
        )
    ok = all(c.sparsity_ok and (c.consistency_ok is not False) for c in checks)
    return ValidationReport(checks=tuple(checks), ok=ok)
