"""Multi-layer convolutional sparse coding and dictionary learning.

A stack of convolutional dictionaries is learned from images by
alternating FISTA sparse coding of the deepest layer (against the
composed, atom-normalized effective dictionary) with soft-thresholded
gradient steps on every layer's filters.
"""

from .container import load_arrays, load_checkpoint, save_arrays, save_checkpoint
from .data import (
    Corpus,
    gaussian_local_mean,
    load_corpus,
    load_pgm,
    local_contrast_normalize,
    make_batches,
    resize_bilinear,
    write_pgm,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateAtomError,
    DivergenceError,
    MlcscError,
    PgmParseError,
)
from .fista import FistaParams, FistaResult, fista_solve, lasso_objective, soft_threshold
from .model import (
    EffectiveDictionary,
    LayerDictionary,
    MlcscModel,
    SparseCode,
    ValidationReport,
    atom_norms,
    compose_effective,
    normalize_atoms,
    project_down,
    reconstruct,
    sparsity_fraction,
    validate_mlcsc,
)
from .ops import (
    LinearOp,
    analyze,
    conv2d_full,
    conv2d_valid,
    operator_norm_sq,
    synthesis_operator,
    synthesize,
)
from .training import (
    EpochMetrics,
    StepRecord,
    TrainingConfig,
    TrainingState,
    data_term_gradient,
    evaluate_epoch,
    fit,
    continue_fit,
    init_model,
    mlcdl_objective,
    train_step,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Corpus",
    "DataError",
    "DegenerateAtomError",
    "DivergenceError",
    "EffectiveDictionary",
    "EpochMetrics",
    "FistaParams",
    "FistaResult",
    "LayerDictionary",
    "LinearOp",
    "MlcscError",
    "MlcscModel",
    "PgmParseError",
    "SparseCode",
    "StepRecord",
    "TrainingConfig",
    "TrainingState",
    "ValidationReport",
    "analyze",
    "atom_norms",
    "compose_effective",
    "continue_fit",
    "conv2d_full",
    "conv2d_valid",
    "data_term_gradient",
    "evaluate_epoch",
    "fista_solve",
    "fit",
    "gaussian_local_mean",
    "init_model",
    "lasso_objective",
    "load_arrays",
    "load_checkpoint",
    "load_corpus",
    "load_pgm",
    "local_contrast_normalize",
    "make_batches",
    "mlcdl_objective",
    "normalize_atoms",
    "operator_norm_sq",
    "project_down",
    "reconstruct",
    "resize_bilinear",
    "save_arrays",
    "save_checkpoint",
    "soft_threshold",
    "sparsity_fraction",
    "synthesis_operator",
    "synthesize",
    "train_step",
    "validate_mlcsc",
    "write_pgm",
]
