"""Coupled tensor norm regularization for classification.

A library and CLI implementing the regularizer ``||[X, f(X)]||_*`` that
couples input features with model outputs, its exact (sub)gradients, a
Wolfe-linesearch trainer for multinomial logistic regression, and a
quadratic-penalty alternating-minimization trainer for small feed-forward
networks, alongside l1/l2/Tikhonov baselines and a comparison harness.
"""

from .errors import (
    ConfigError,
    DegenerateInputError,
    InvalidInputError,
    InvalidModeError,
    NumericalError,
)
from .linalg import (
    ThinSvd,
    coupled_tensor_norm,
    mode_n_fold,
    mode_n_unfold,
    nuclear_norm,
    nuclear_norm_subgrad,
    thin_svd,
)
from .regularizers import (
    ConcatSubgradient,
    RegularizerSpec,
    baseline_reg,
    concat_value_and_subgrad,
    coupled_reg_mlr,
    estimate_lipschitz,
)

__version__ = "0.1.0"

__all__ = [
    "ConcatSubgradient",
    "ConfigError",
    "DegenerateInputError",
    "InvalidInputError",
    "InvalidModeError",
    "NumericalError",
    "RegularizerSpec",
    "ThinSvd",
    "baseline_reg",
    "concat_value_and_subgrad",
    "coupled_reg_mlr",
    "coupled_tensor_norm",
    "estimate_lipschitz",
    "mode_n_fold",
    "mode_n_unfold",
    "nuclear_norm",
    "nuclear_norm_subgrad",
    "thin_svd",
    "__version__",
]
