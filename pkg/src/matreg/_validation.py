"""Input validation helpers shared across the package.

Everything numeric is coerced to C-contiguous float64; non-finite input is
rejected at the boundary so the numerical layers can assume clean arrays.
"""

import os

import numpy as np


def check_matrix(m, name="matrix"):
    """Coerce to a 2-D float64 array and verify it is finite and nonempty."""
    a = np.ascontiguousarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def check_vector(x, name="vector", length=None):
    """Coerce to a 1-D float64 array, optionally enforcing its length."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1)
    if a.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {a.shape}")
    if length is not None and a.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def check_tau(tau):
    t = float(tau)
    if not np.isfinite(t) or t < 0:
        raise ValueError(f"threshold must be a finite nonnegative real, got {tau}")
    return t


def frozen(a):
    """Return a read-only copy; backs the immutability contract of the data types."""
    out = np.array(a, dtype=np.float64, copy=True, order="C")
    out.flags.writeable = False
    return out


def thread_count():
    """Parallelism cap: MATREG_THREADS when set, else every available core."""
    env = os.environ.get("MATREG_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError(f"MATREG_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1
