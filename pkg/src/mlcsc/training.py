"""Multi-layer convolutional dictionary learning.

One training step per sample: compose the effective dictionary, normalize
its atoms, sparse-code the sample with FISTA, undo the normalization on
the code, then take one gradient step on every layer dictionary (soft
thresholding the layers above the first) and re-normalize atom-wise.
Epochs repeat the pass; metrics are computed with frozen dictionaries
after each epoch so the error curve is well defined.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import ops
from .data import make_batches
from .errors import DivergenceError
from .fista import FistaParams, fista_solve, soft_threshold
from .model import (
    NORM_EPS,
    LayerDictionary,
    MlcscModel,
    SparseCode,
    atom_norms,
    compose_effective,
    normalize_atoms,
    sparsity_fraction,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters for dictionary learning.

    ``dict_thresholds`` holds the soft-threshold amounts for layers 2..L
    (layer 1 is updated without thresholding); the code l1 weight lives in
    ``fista.penalty``.
    """

    learning_rate: float = 1e-3
    dict_thresholds: tuple[float, ...] = ()
    epochs: int = 1
    batch_size: int = 20
    seed: int = 0
    fista: FistaParams = field(default_factory=FistaParams)

    def __post_init__(self):
        object.__setattr__(self, "dict_thresholds", tuple(self.dict_thresholds))
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if any(z < 0 for z in self.dict_thresholds):
            raise ValueError("dict_thresholds must be >= 0")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class EpochMetrics:
    """Dataset-level diagnostics computed with frozen dictionaries."""

    mse: float
    dict_density: tuple[float, ...]
    code_density: float
    mean_fista_iters: float


@dataclass(frozen=True)
class StepRecord:
    """Per-sample record returned by :func:`train_step`."""

    squared_error: float
    mse: float
    code_density: float
    fista_iters: int
    converged: bool
    reinitialized_atoms: tuple[tuple[int, int], ...] = ()


@dataclass
class TrainingState:
    """Mutable training progress: the model, epoch counter, metrics, RNG."""

    model: MlcscModel
    epoch: int
    metrics_history: list[EpochMetrics]
    rng: np.random.Generator


def init_model(
    arch: Sequence[tuple[int, int | tuple[int, int]]],
    seed: int = 0,
    input_shape: tuple[int, int, int] | None = None,
) -> MlcscModel:
    """Random unit-norm model for an architecture of (num_atoms, kernel_size).

    Kernel sizes may be ints (square) or (kh, kw) pairs. Atoms are drawn
    from an isotropic Gaussian and normalized; deterministic per seed.
    """
    if not arch:
        raise ValueError("architecture must list at least one layer")
    rng = np.random.default_rng(seed)
    layers = []
    in_channels = 1
    for index, (num_atoms, size) in enumerate(arch, start=1):
        if num_atoms < 1:
            raise ValueError(f"layer {index}: num_atoms must be >= 1, got {num_atoms}")
        kh, kw = (size, size) if isinstance(size, int) else size
        if kh < 1 or kw < 1:
            raise ValueError(f"layer {index}: kernel sides must be >= 1")
        atoms = rng.standard_normal((num_atoms, in_channels, kh, kw))
        atoms, _ = normalize_atoms(atoms)
        layers.append(LayerDictionary(atoms=atoms, layer_index=index))
        in_channels = num_atoms
    return MlcscModel(layers=tuple(layers), input_shape=input_shape)


def _forward_signals(model: MlcscModel, code_deepest: SparseCode) -> list[np.ndarray]:
    """Signals at every level, deepest code first down to the image estimate."""
    depth = model.num_layers
    signals = [None] * (depth + 1)
    sig = code_deepest.maps
    signals[depth] = sig
    for i in range(depth, 0, -1):
        sig = ops.synthesize(model.layers[i - 1].atoms, sig)
        signals[i - 1] = sig
    return signals


def _all_gradients(
    model: MlcscModel, code_deepest: SparseCode, y: np.ndarray
) -> list[np.ndarray]:
    """Gradients of ``||y - reconstruction||_2^2`` w.r.t. every layer's atoms.

    The residual (times 2) is pushed upward through each layer's adjoint;
    the gradient for a layer correlates the incoming sensitivity against
    the signal entering that layer.
    """
    depth = model.num_layers
    signals = _forward_signals(model, code_deepest)
    grads: list[np.ndarray] = []
    g = 2.0 * (signals[0] - y[None])
    for i in range(1, depth + 1):
        atoms = model.layers[i - 1].atoms
        entering = signals[i]
        grad = np.empty_like(atoms)
        for j in range(atoms.shape[0]):
            for c in range(atoms.shape[1]):
                grad[j, c] = ops.conv2d_valid(g[c], entering[j])
        grads.append(grad)
        if i < depth:
            g = ops.analyze(atoms, g)
    return grads


def data_term_gradient(
    model: MlcscModel, code_deepest: SparseCode, y: np.ndarray, layer: int
) -> np.ndarray:
    """Exact gradient of the squared reconstruction error w.r.t. one layer.

    ``code_deepest`` must already be rescaled back to the unnormalized
    dictionaries (the trainer's step does this right after sparse coding).
    """
    if not 1 <= layer <= model.num_layers:
        raise ValueError(f"layer must be in [1, {model.num_layers}], got {layer}")
    if code_deepest.layer_index != model.num_layers:
        raise ValueError(
            f"expected a layer-{model.num_layers} code, got {code_deepest.layer_index}"
        )
    return _all_gradients(model, code_deepest, y)[layer - 1]


def _reinit_dead_atoms(atoms: np.ndarray, layer_index: int, rng: np.random.Generator):
    """Replace zero-norm atoms with fresh unit-norm Gaussian noise."""
    norms = atom_norms(atoms)
    if not np.isfinite(norms).all():
        raise DivergenceError(
            f"layer {layer_index}: non-finite atom norms after update"
        )
    dead = np.flatnonzero(norms <= NORM_EPS)
    events = []
    for j in dead:
        draw = rng.standard_normal(atoms.shape[1:])
        atoms[j] = draw / np.linalg.norm(draw)
        events.append((layer_index, int(j)))
        logger.warning("re-initialized dead atom %d of layer %d", j, layer_index)
    return events


def train_step(
    state: TrainingState, y_k: np.ndarray, cfg: TrainingConfig
) -> tuple[TrainingState, StepRecord]:
    """One per-sample update of every layer dictionary.

    Order of operations: compose the effective dictionary, normalize it
    (remembering the per-atom norms), FISTA-solve the sample, divide each
    code map by its atom's norm, then for layers L..2 apply
    ``normalize(soft_threshold(D - lr * grad))`` and for layer 1 the same
    without thresholding. All gradients are taken at the pre-update model.
    """
    model = state.model
    depth = model.num_layers
    if len(cfg.dict_thresholds) != depth - 1:
        raise ValueError(
            f"dict_thresholds must have length {depth - 1} (layers 2..{depth}), "
            f"got {len(cfg.dict_thresholds)}"
        )
    y_k = np.asarray(y_k, dtype=np.float64)
    if model.input_shape is not None and (1,) + y_k.shape != model.input_shape:
        raise ValueError(
            f"image shape {y_k.shape} does not match model input {model.input_shape}"
        )

    eff = compose_effective(model, depth)
    eff_hat, norms = normalize_atoms(eff)
    result = fista_solve(y_k, eff_hat, cfg.fista)
    raw_maps = result.code.maps
    code = SparseCode(maps=raw_maps / norms[:, None, None], layer_index=depth)

    recon = ops.synthesize(eff_hat.atoms, raw_maps)[0]
    squared_error = float(((y_k - recon) ** 2).sum())

    grads = _all_gradients(model, code, y_k)

    new_atoms: dict[int, np.ndarray] = {}
    reinit: list[tuple[int, int]] = []
    for i in range(depth, 0, -1):
        updated = model.layers[i - 1].atoms - cfg.learning_rate * grads[i - 1]
        if i >= 2:
            updated = soft_threshold(updated, cfg.dict_thresholds[i - 2])
        if not np.isfinite(updated).all():
            raise DivergenceError(f"layer {i}: non-finite dictionary update")
        reinit.extend(_reinit_dead_atoms(updated, i, state.rng))
        updated, _ = normalize_atoms(updated)
        new_atoms[i] = updated

    new_layers = tuple(
        replace(model.layers[i - 1], atoms=new_atoms[i]) for i in range(1, depth + 1)
    )
    new_model = replace(model, layers=new_layers)
    new_state = TrainingState(
        model=new_model,
        epoch=state.epoch,
        metrics_history=state.metrics_history,
        rng=state.rng,
    )
    record = StepRecord(
        squared_error=squared_error,
        mse=squared_error / y_k.size,
        code_density=sparsity_fraction(raw_maps),
        fista_iters=result.iterations_used,
        converged=result.converged,
        reinitialized_atoms=tuple(reinit),
    )
    return new_state, record


def evaluate_epoch(
    model: MlcscModel, dataset: Sequence[np.ndarray], fista: FistaParams
) -> EpochMetrics:
    """Re-encode the whole dataset with frozen dictionaries and summarize."""
    eff = compose_effective(model, model.num_layers)
    eff_hat, _ = normalize_atoms(eff)
    eh, ew = eff_hat.kernel_shape
    map_shape = (dataset[0].shape[0] - eh + 1, dataset[0].shape[1] - ew + 1)
    op = ops.synthesis_operator(eff_hat.atoms, map_shape)
    lip = 1.05 * ops.operator_norm_sq(op, iters=fista.lipschitz_iters, seed=fista.seed)

    mses, densities, iters = [], [], []
    for y in dataset:
        res = fista_solve(y, eff_hat, fista, lipschitz=lip)
        recon = ops.synthesize(eff_hat.atoms, res.code.maps)[0]
        mses.append(float(((y - recon) ** 2).sum()) / y.size)
        densities.append(sparsity_fraction(res.code.maps))
        iters.append(res.iterations_used)
    return EpochMetrics(
        mse=float(np.mean(mses)),
        dict_density=tuple(sparsity_fraction(lyr.atoms) for lyr in model.layers),
        code_density=float(np.mean(densities)),
        mean_fista_iters=float(np.mean(iters)),
    )


def continue_fit(
    dataset: Sequence[np.ndarray],
    cfg: TrainingConfig,
    state: TrainingState,
    on_epoch: Callable[[TrainingState], None] | None = None,
) -> tuple[MlcscModel, list[EpochMetrics]]:
    """Run epochs ``state.epoch + 1 .. cfg.epochs`` (used for resume)."""
    if not dataset:
        raise ValueError("dataset is empty")
    shapes = {y.shape for y in dataset}
    if len(shapes) != 1:
        raise ValueError(f"dataset images have mixed shapes: {sorted(shapes)}")
    (h, w) = next(iter(shapes))
    if state.model.input_shape is None:
        state.model = replace(state.model, input_shape=(1, h, w))
    state.model.code_shape((h, w))  # raises if atoms exceed the image

    for epoch in range(state.epoch + 1, cfg.epochs + 1):
        shuffle_seed = int(state.rng.integers(0, 2**63 - 1))
        for batch in make_batches(len(dataset), cfg.batch_size, shuffle_seed):
            for idx in batch:
                state, _ = train_step(state, dataset[idx], cfg)
        metrics = evaluate_epoch(state.model, dataset, cfg.fista)
        state.epoch = epoch
        state.metrics_history.append(metrics)
        logger.info(
            "epoch %d: mse=%.6g code_density=%.3f", epoch, metrics.mse,
            metrics.code_density,
        )
        if on_epoch is not None:
            on_epoch(state)
    return state.model, list(state.metrics_history)


def fit(
    dataset: Sequence[np.ndarray],
    cfg: TrainingConfig,
    init: MlcscModel,
    on_epoch: Callable[[TrainingState], None] | None = None,
) -> tuple[MlcscModel, list[EpochMetrics]]:
    """Train ``init`` on the dataset for ``cfg.epochs`` passes.

    Samples are visited in a per-epoch shuffled batch order; one
    :func:`train_step` per sample. The returned metrics list has one entry
    per epoch, each computed by re-encoding the dataset with the epoch's
    final dictionaries. ``(dataset, cfg, init)`` fully determine the output.
    """
    state = TrainingState(
        model=init,
        epoch=0,
        metrics_history=[],
        rng=np.random.default_rng(cfg.seed),
    )
    return continue_fit(dataset, cfg, state, on_epoch=on_epoch)


def mlcdl_objective(
    model: MlcscModel,
    dataset: Sequence[np.ndarray],
    cfg: TrainingConfig,
    dict_weights: Sequence[float] | None = None,
) -> float:
    """Full learning objective on a frozen corpus.

    Sum over images of the squared reconstruction error plus the weighted
    l1 of the codes, plus the weighted l1 of the deep dictionaries
    (weights default to ``cfg.dict_thresholds``).
    """
    weights = cfg.dict_thresholds if dict_weights is None else tuple(dict_weights)
    eff = compose_effective(model, model.num_layers)
    eff_hat, norms = normalize_atoms(eff)
    total = 0.0
    for y in dataset:
        res = fista_solve(y, eff_hat, cfg.fista)
        recon = ops.synthesize(eff_hat.atoms, res.code.maps)[0]
        rescaled = res.code.maps / norms[:, None, None]
        total += float(((y - recon) ** 2).sum())
        total += cfg.fista.penalty * float(np.abs(rescaled).sum())
    for weight, lyr in zip(weights, model.layers[1:]):
        total += weight * float(np.abs(lyr.atoms).sum())
    return total
