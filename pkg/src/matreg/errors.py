"""Exception types raised by matreg."""

import numpy as np


class MatregError(Exception):
    """Base class for all matreg-specific errors."""


class ConvergenceError(MatregError):
    """SVD iteration failed to converge.

    Carries ``residual`` with the norm the backend reported, when available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateNeighborhoodError(MatregError):
    """Every kernel weight vanished at an evaluation point.

    Happens with compact-support kernels far from the data, or when the
    bandwidth is small enough that gaussian weights underflow.
    """

    def __init__(self, x, bandwidth):
        super().__init__(
            f"all kernel weights are zero at x={np.asarray(x).tolist()} "
            f"with bandwidth h={bandwidth}"
        )
        self.x = x
        self.bandwidth = bandwidth


class DegenerateSpectrumError(MatregError):
    """Singular-value pair too close for the df formula (strict mode only)."""

    def __init__(self, sample_index, pair):
        super().__init__(
            f"near-tied singular values {pair} in fit at sample {sample_index}; "
            "the df formula is singular there (use tie_mode='limit' to proceed)"
        )
        self.sample_index = sample_index
        self.pair = pair


class DegenerateFitError(MatregError):
    """In-sample residual sum of squares is zero; BIC's log term is undefined."""


class ExhaustedGridError(MatregError):
    """Every tuning-grid cell failed. Carries per-cell failures."""

    def __init__(self, failures):
        lines = "; ".join(f"(h={h}, lam={lam}): {msg}" for h, lam, msg in failures)
        super().__init__(f"all {len(failures)} grid cells failed: {lines}")
        self.failures = failures


class EvaluationError(MatregError):
    """One or more points of a batch evaluation failed. Carries (index, error) pairs."""

    def __init__(self, failures):
        lines = "; ".join(f"[{i}] {err}" for i, err in failures)
        super().__init__(f"{len(failures)} evaluation point(s) failed: {lines}")
        self.failures = failures


class StackFormatError(MatregError):
    """Malformed stack file. Carries the byte offset of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
