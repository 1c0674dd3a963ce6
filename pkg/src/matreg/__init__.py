"""Kernel-smoothed matrix-response regression with low-rank shrinkage.

The estimator of the matrix-valued regression function is the kernel-
weighted local average of the responses, optionally passed through
singular-value soft-thresholding (nuclear-norm shrinkage) or elementwise
soft-thresholding at a point-dependent level. Bandwidth and shrinkage are
selected jointly by a BIC built on unbiased degrees-of-freedom estimates.
"""

from .data import Dataset, Sample
from .dataio import read_stack, sliding_covariance, write_stack
from .errors import (
    ConvergenceError,
    DegenerateFitError,
    DegenerateNeighborhoodError,
    DegenerateSpectrumError,
    EvaluationError,
    ExhaustedGridError,
    MatregError,
    StackFormatError,
)
from .estimators import (
    FitConfig,
    FitResult,
    fit_lasso,
    fit_nuclear,
    fit_nw,
    fit_path,
    predict_matrices,
)
from .kernels import KernelSpec, kernel_at_zero, kernel_value, weights
from .linalg import (
    MatrixNorms,
    Svd,
    norms,
    numeric_rank,
    soft_threshold_elementwise,
    soft_threshold_nuclear,
    svd,
)
from .regressor import MatrixResponseRegressor
from .simulation import (
    ShapeSpec,
    SimResult,
    SimSpec,
    default_study_grid,
    generate,
    integrated_error,
    make_signal,
    run_study,
    sample_errors,
)
from .tuning import (
    BicEntry,
    BicReport,
    CvResult,
    TuneGrid,
    bic,
    default_grid,
    df_lasso,
    df_nuclear,
    loocv,
    tune,
)

__version__ = "0.1.0"

__all__ = [
    "BicEntry",
    "BicReport",
    "ConvergenceError",
    "CvResult",
    "Dataset",
    "DegenerateFitError",
    "DegenerateNeighborhoodError",
    "DegenerateSpectrumError",
    "EvaluationError",
    "ExhaustedGridError",
    "FitConfig",
    "FitResult",
    "KernelSpec",
    "MatregError",
    "MatrixNorms",
    "MatrixResponseRegressor",
    "Sample",
    "ShapeSpec",
    "SimResult",
    "SimSpec",
    "StackFormatError",
    "Svd",
    "TuneGrid",
    "bic",
    "default_grid",
    "default_study_grid",
    "df_lasso",
    "df_nuclear",
    "fit_lasso",
    "fit_nuclear",
    "fit_nw",
    "fit_path",
    "generate",
    "integrated_error",
    "kernel_at_zero",
    "kernel_value",
    "loocv",
    "make_signal",
    "norms",
    "numeric_rank",
    "predict_matrices",
    "read_stack",
    "run_study",
    "sample_errors",
    "sliding_covariance",
    "soft_threshold_elementwise",
    "soft_threshold_nuclear",
    "svd",
    "tune",
    "weights",
    "write_stack",
]
