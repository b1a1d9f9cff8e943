"""Convolutional LASSO solver: FISTA with soft-thresholding proximal steps.

Solves ``min_x ||y - D * x||_2^2 + penalty * ||x||_1`` for the deepest
code, with D an effective dictionary of single-channel atoms. Note the
data term carries no 1/2 factor, so its gradient is ``2 A^T (A x - y)``
and the proximal threshold is ``penalty / (2 Lip)`` with ``Lip`` the
largest eigenvalue of ``A^T A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import ops
from .errors import DivergenceError
from .model import EffectiveDictionary, SparseCode

LIPSCHITZ_MARGIN = 1.05


@dataclass(frozen=True)
class FistaParams:
    """Solver settings.

    ``penalty`` is the l1 weight on the code; ``lipschitz_iters`` and
    ``seed`` control the power-iteration step-size estimate.
    """

    penalty: float = 0.1
    max_iters: int = 200
    rel_tol: float = 1e-6
    lipschitz_iters: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.penalty < 0:
            raise ValueError(f"penalty must be >= 0, got {self.penalty}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.rel_tol <= 0:
            raise ValueError(f"rel_tol must be > 0, got {self.rel_tol}")
        if self.lipschitz_iters < 1:
            raise ValueError("lipschitz_iters must be >= 1")


@dataclass(frozen=True)
class FistaResult:
    code: SparseCode
    objective_trace: np.ndarray
    iterations_used: int
    converged: bool
    lipschitz: float = field(default=0.0, compare=False)


def soft_threshold(x: np.ndarray, zeta: float) -> np.ndarray:
    """Entrywise ``sign(x) * max(|x| - zeta, 0)``; exact zeros where |x| <= zeta."""
    if zeta < 0:
        raise ValueError(f"threshold must be >= 0, got {zeta}")
    x = np.asarray(x, dtype=np.float64)
    if zeta == 0.0:
        return x.copy()
    return np.sign(x) * np.maximum(np.abs(x) - zeta, 0.0)


def lasso_objective(
    y: np.ndarray,
    eff: EffectiveDictionary,
    code: SparseCode | np.ndarray,
    penalty: float,
) -> float:
    """``||y - D * code||_2^2 + penalty * ||code||_1`` for one image."""
    y = np.asarray(y, dtype=np.float64)
    maps = code.maps if isinstance(code, SparseCode) else np.asarray(code, float)
    recon = ops.synthesize(eff.atoms, maps)
    if recon.shape != (1,) + y.shape:
        raise ValueError(
            f"reconstruction {recon.shape[1:]} does not match image {y.shape}"
        )
    resid = recon[0] - y
    return float((resid * resid).sum() + penalty * np.abs(maps).sum())


def fista_solve(
    y: np.ndarray,
    eff: EffectiveDictionary,
    params: FistaParams,
    x0: np.ndarray | None = None,
    lipschitz: float | None = None,
) -> FistaResult:
    """Run FISTA on one image against a (unit-norm) effective dictionary.

    Cold-starts at zero unless ``x0`` is given (warm starts are opt-in;
    the trainer recomputes codes per sample). ``lipschitz`` may be passed
    to reuse a step-size estimate when the dictionary is frozen across
    many solves; by default it is estimated by power iteration with a 5%
    safety margin, since an underestimate makes the iteration diverge.

    Raises
    ------
    DivergenceError
        If the objective stops being finite.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {y.shape}")
    eh, ew = eff.kernel_shape
    if y.shape[0] < eh or y.shape[1] < ew:
        raise ValueError(f"image {y.shape} smaller than effective atoms ({eh}, {ew})")
    map_shape = (y.shape[0] - eh + 1, y.shape[1] - ew + 1)
    op = ops.synthesis_operator(eff.atoms, map_shape)
    target = y[None]

    if lipschitz is None:
        lip = LIPSCHITZ_MARGIN * ops.operator_norm_sq(
            op, iters=params.lipschitz_iters, seed=params.seed
        )
    else:
        lip = float(lipschitz)

    if x0 is None:
        x = np.zeros(op.in_shape)
    else:
        x = np.asarray(x0, dtype=np.float64).copy()
        if x.shape != op.in_shape:
            raise ValueError(f"x0 has shape {x.shape}, expected {op.in_shape}")

    def objective(c: np.ndarray) -> float:
        resid = op.forward(c) - target
        return float((resid * resid).sum() + params.penalty * np.abs(c).sum())

    trace = [objective(x)]
    if not math.isfinite(trace[0]):
        raise DivergenceError(f"initial objective is not finite: {trace[0]}")

    if lip == 0.0:
        # Zero dictionary: the data term is constant and the minimizer is 0.
        code = SparseCode(maps=np.zeros(op.in_shape), layer_index=eff.depth)
        return FistaResult(code, np.asarray(trace), 0, True, 0.0)

    step = 1.0 / lip
    thresh = params.penalty / (2.0 * lip)
    z = x.copy()
    t = 1.0
    iterations = 0
    converged = False
    # The synthesis of each iterate is computed directly once per
    # iteration; the momentum point's synthesis follows by linearity, so
    # every iteration costs one forward plus one adjoint pass.
    fwd_x = op.forward(x)
    fwd_z = fwd_x
    for _ in range(params.max_iters):
        grad_half = op.adjoint(fwd_z - target)
        x_new = soft_threshold(z - step * grad_half, thresh)
        fwd_new = op.forward(x_new)
        t_new = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        momentum = (t - 1.0) / t_new
        z = x_new + momentum * (x_new - x)
        fwd_z = fwd_new + momentum * (fwd_new - fwd_x)
        resid = fwd_new - target
        f_new = float((resid * resid).sum() + params.penalty * np.abs(x_new).sum())
        if not math.isfinite(f_new):
            raise DivergenceError(
                "objective became non-finite; Lipschitz estimate too small"
            )
        f_prev = trace[-1]
        trace.append(f_new)
        x = x_new
        fwd_x = fwd_new
        t = t_new
        iterations += 1
        if abs(f_new - f_prev) <= params.rel_tol * max(abs(f_prev), 1e-30):
            converged = True
            break

    code = SparseCode(maps=x, layer_index=eff.depth)
    return FistaResult(code, np.asarray(trace), iterations, converged, lip)
