"""Polyatomic Frank-Wolfe for the LASSO, with proximal baselines and a Fourier benchmark."""

__version__ = "0.1.0"

from .operators import (
    CountingOperator,
    DenseOperator,
    FourierOperator,
    FrequencySampleSet,
    dft_adjoint,
    dft_forward,
    hermitian_inner,
    operator_norm_sq,
    restrict_columns,
)
from .solvers import (
    ActiveSet,
    DualCertificate,
    LassoProblem,
    PfwConfig,
    SolverTrace,
    dual_certificate,
    lasso_objective,
    pfw_candidates,
    run_apgd,
    run_ista,
    run_pfw,
    run_vfw,
    soft_threshold,
    vfw_direction,
)
