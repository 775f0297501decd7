"""Box-constrained generalized elastic net regression."""

from .model import (
    PRESETS,
    ArgenConfig,
    Dataset,
    FittedModel,
    fit,
    make_preset,
    predict,
    transform_to_qp,
)
from .qp import (
    QpProblem,
    QpSolution,
    SolverOptions,
    auxiliary_g,
    kkt_residual,
    mu_update,
    objective,
    solve_qp,
    split_matrix,
)
from .tuning import SearchSpace, bisection_lambda1, random_search

__version__ = "0.1.0"

__all__ = [
    "PRESETS",
    "ArgenConfig",
    "Dataset",
    "FittedModel",
    "QpProblem",
    "QpSolution",
    "SearchSpace",
    "SolverOptions",
    "auxiliary_g",
    "bisection_lambda1",
    "fit",
    "kkt_residual",
    "make_preset",
    "mu_update",
    "objective",
    "predict",
    "random_search",
    "solve_qp",
    "split_matrix",
    "transform_to_qp",
]
