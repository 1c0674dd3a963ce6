"""Dense real-matrix primitives: SVD, norms, numeric rank, proximal operators.

All operations are pure functions over float64 arrays and are safe to call
concurrently. The two soft-threshold operators are the closed-form proximal
maps of the nuclear norm and the elementwise l1 norm.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import check_matrix, check_tau, frozen
from .errors import ConvergenceError


@dataclass(frozen=True)
class Svd:
    """Thin singular value decomposition m = u @ diag(sigma) @ v.T.

    u is p x r and v is q x r with orthonormal columns, r = min(p, q);
    sigma is nonincreasing and nonnegative, zero values retained so callers
    can truncate however they like.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank_hint(self):
        return self.sigma.shape[0]

    def reconstruct(self):
        return (self.u * self.sigma) @ self.v.T

    def reconstruct_with(self, sigma):
        """Rebuild using a replacement spectrum (same singular vectors)."""
        return (self.u * sigma) @ self.v.T


class MatrixNorms(NamedTuple):
    frobenius: float
    nuclear: float
    spectral: float
    l1: float


def svd(m):
    """Thin SVD with r = min(p, q) columns and nonincreasing spectrum.

    Raises ConvergenceError if the backend's iteration does not converge.
    """
    a = check_matrix(m)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(
            f"SVD did not converge for {a.shape[0]}x{a.shape[1]} matrix: {exc}",
            residual=float(np.linalg.norm(a)),
        ) from exc
    return Svd(u=frozen(u), sigma=frozen(s), v=frozen(vt.T))


def soft_threshold_nuclear(m, tau):
    """Proximal map of tau * nuclear norm: shrink each singular value by tau.

    Returns argmin_X 0.5 * ||m - X||_F^2 + tau * ||X||_*.
    """
    t = check_tau(tau)
    dec = svd(m)
    clipped = np.maximum(dec.sigma - t, 0.0)
    return dec.reconstruct_with(clipped)


def soft_threshold_elementwise(m, tau):
    """Proximal map of tau * l1 norm: y -> sign(y) * max(|y| - tau, 0)."""
    t = check_tau(tau)
    a = check_matrix(m)
    return np.sign(a) * np.maximum(np.abs(a) - t, 0.0)


def rank_from_sigma(sigma, tol):
    """Count singular values above both tol * sigma[0] and the 1e-12 floor."""
    if tol < 0:
        raise ValueError(f"rank tolerance must be nonnegative, got {tol}")
    s = np.asarray(sigma, dtype=np.float64)
    if s.size == 0 or s[0] <= 0.0:
        return 0
    return int(np.sum((s > tol * s[0]) & (s > 1e-12)))


def numeric_rank(m, tol=1e-8):
    """Numeric rank of m at relative tolerance tol."""
    return rank_from_sigma(svd(m).sigma, tol)


def norms(m):
    """Frobenius, nuclear, spectral and elementwise-l1 norms of m."""
    a = check_matrix(m)
    s = svd(a).sigma
    return MatrixNorms(
        frobenius=float(np.linalg.norm(a)),
        nuclear=float(np.sum(s)),
        spectral=float(s[0]),
        l1=float(np.sum(np.abs(a))),
    )
