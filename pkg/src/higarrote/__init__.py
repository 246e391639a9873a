"""Automated analysis of designed experiments with the hierarchical garrote.

Pipeline: Gaussian-process-induced prior -> profiled-likelihood
hyperparameter fit -> generalized-ridge initial estimate ->
heredity-constrained nonnegative-garrote path tuned by GCV.
"""
from .design import (
    DesignTable,
    EffectColumn,
    FactorSpec,
    ModelMatrix,
    build_model_matrix,
    center_response,
    coding_matrix,
    heredity_constraints,
)
from .errors import (
    DegenerateResponseError,
    HiGarroteError,
    InvalidCodingError,
    InvalidInputError,
    NonconvergenceError,
    NumericalFailureError,
    ParseError,
)
from .garrote import (
    FitReport,
    GarroteSolution,
    HiGarroteOptions,
    gcv_value,
    higarrote,
    ls_refit,
    replicated_fit,
    shrinkage_qp,
    solve_path,
)
from .likelihood import (
    FitOptions,
    InitialEstimate,
    ProfiledLikelihood,
    backend_name,
    fit_hyperparams,
    initial_estimate,
    nll,
    nll_grad,
)
from .prior import (
    Hyperparams,
    PriorDiagonal,
    factor_correlation,
    prior_diag,
    rho_dimension,
    run_correlation,
    tau2_over_nu2,
)
from .qp import QpProblem, QpSolution
from .qp import solve as qp_solve
from .simulate import SimSpec, run_simulation

__version__ = "0.1.0"

__all__ = [
    "DesignTable", "EffectColumn", "FactorSpec", "ModelMatrix",
    "build_model_matrix", "center_response", "coding_matrix",
    "heredity_constraints",
    "HiGarroteError", "InvalidCodingError", "InvalidInputError",
    "DegenerateResponseError", "NumericalFailureError", "NonconvergenceError",
    "ParseError",
    "FitReport", "GarroteSolution", "HiGarroteOptions", "gcv_value",
    "higarrote", "ls_refit", "replicated_fit", "shrinkage_qp", "solve_path",
    "FitOptions", "InitialEstimate", "ProfiledLikelihood", "backend_name",
    "fit_hyperparams", "initial_estimate", "nll", "nll_grad",
    "Hyperparams", "PriorDiagonal", "factor_correlation", "prior_diag",
    "rho_dimension", "run_correlation", "tau2_over_nu2",
    "QpProblem", "QpSolution", "qp_solve",
    "SimSpec", "run_simulation",
    "__version__",
]
