"""Kernel functions and bandwidth-scaled weights.

The smoothing weight attached to a training point is
``w_i = h**(-s) * K((x - X_i) / h)`` with a single isotropic bandwidth h
applied to all s covariate coordinates. The gaussian kernel is the
multivariate product form ``(2*pi)**(-s/2) * exp(-||u||^2 / 2)``; the
epanechnikov kernel is the per-coordinate product ``prod 0.75*(1-u_j^2)+``
and has compact support, so it can produce all-zero weights.
"""

import math
from dataclasses import dataclass

import numpy as np

FAMILIES = ("gaussian", "epanechnikov")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus isotropic bandwidth for s covariate dimensions."""

    bandwidth: float
    dim: int = 1
    family: str = "gaussian"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; choose from {FAMILIES}")
        if not (np.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError(f"bandwidth must be a positive real, got {self.bandwidth}")
        if self.dim < 1:
            raise ValueError(f"covariate dimension must be >= 1, got {self.dim}")


def kernel_value(spec, u):
    """Evaluate the unscaled kernel K at a single point u (length spec.dim)."""
    v = np.ascontiguousarray(u, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.shape != (spec.dim,):
        raise ValueError(f"point has shape {v.shape}, expected ({spec.dim},)")
    if spec.family == "gaussian":
        return float((2 * math.pi) ** (-spec.dim / 2) * math.exp(-0.5 * float(v @ v)))
    return float(np.prod(0.75 * np.maximum(1.0 - v * v, 0.0)))


def kernel_at_zero(spec):
    """K_H(0) = h**(-s) * K(0); the numerator of the df weight ratio."""
    return spec.bandwidth ** (-spec.dim) * kernel_value(spec, np.zeros(spec.dim))


def weights(spec, x, xs):
    """Bandwidth-scaled weights K_H(x - X_i) for every row X_i of xs.

    xs is an (n, s) array (or (n,) when s == 1); returns a length-n vector.
    """
    pts = np.ascontiguousarray(xs, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    x0 = np.ascontiguousarray(x, dtype=np.float64)
    if x0.ndim == 0:
        x0 = x0.reshape(1)
    if x0.shape != (spec.dim,) or pts.shape[1] != spec.dim:
        raise ValueError(
            f"covariate dimension mismatch: x has shape {x0.shape}, "
            f"points have {pts.shape[1]} columns, kernel expects {spec.dim}"
        )
    h = spec.bandwidth
    d = (x0[None, :] - pts) / h
    if spec.family == "gaussian":
        scale = h ** (-spec.dim) * (2 * math.pi) ** (-spec.dim / 2)
        return scale * np.exp(-0.5 * np.einsum("ij,ij->i", d, d))
    return h ** (-spec.dim) * np.prod(0.75 * np.maximum(1.0 - d * d, 0.0), axis=1)
