"""Binary dataset files and the sliding-window covariance transform.

Stack file layout (little-endian throughout):

    bytes 0..3    magic b"MRS1"
    bytes 4..35   four uint64 counts: n, s, p, q
    then          n*s float64 covariates, row-major
    then          n*p*q float64 responses, row-major

The format is bit-exact: any finite float64 payload, subnormals included,
round-trips unchanged.
"""

import numpy as np

from .data import Dataset
from .errors import StackFormatError

MAGIC = b"MRS1"
_HEADER_BYTES = 4 + 4 * 8


def write_stack(data, path):
    """Serialize a Dataset; read_stack(write_stack(d)) == d bit for bit."""
    header = np.array([data.n, data.s, data.p, data.q], dtype="<u8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header.tobytes())
        fh.write(data.x.astype("<f8", copy=False).tobytes())
        fh.write(data.y.astype("<f8", copy=False).tobytes())


def _take(buf, offset, count, dtype, what):
    nbytes = count * dtype.itemsize
    if offset + nbytes > len(buf):
        raise StackFormatError(
            f"truncated {what}: need {nbytes} bytes, file ends after "
            f"{len(buf) - offset}",
            offset=len(buf),
        )
    return np.frombuffer(buf, dtype=dtype, count=count, offset=offset), offset + nbytes


def read_stack(path):
    """Parse a stack file back into a Dataset, validating as it goes."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < len(MAGIC) or buf[: len(MAGIC)] != MAGIC:
        raise StackFormatError(
            f"bad magic {buf[:4]!r}, expected {MAGIC!r}", offset=0
        )
    counts, offset = _take(buf, len(MAGIC), 4, np.dtype("<u8"), "header")
    n, s, p, q = (int(c) for c in counts)
    if min(n, s, p, q) < 1:
        raise StackFormatError(f"nonpositive header counts {(n, s, p, q)}", offset=4)
    x_flat, offset = _take(buf, offset, n * s, np.dtype("<f8"), "covariate block")
    x_off = _HEADER_BYTES
    y_flat, offset = _take(buf, offset, n * p * q, np.dtype("<f8"), "response block")
    if offset != len(buf):
        raise StackFormatError(
            f"{len(buf) - offset} trailing bytes after the response block",
            offset=offset,
        )
    for name, block, start in (("covariate", x_flat, x_off),
                               ("response", y_flat, x_off + n * s * 8)):
        bad = np.nonzero(~np.isfinite(block))[0]
        if bad.size:
            raise StackFormatError(
                f"non-finite value in {name} block", offset=start + int(bad[0]) * 8
            )
    return Dataset(x=x_flat.reshape(n, s), y=y_flat.reshape(n, p, q))


def sliding_covariance(series, window, stride=1):
    """Windowed sample covariances of a T x d series as a Dataset.

    Window w starting at row t yields the d x d sample covariance
    (divisor window - 1) of rows t..t+window-1, paired with the covariate
    (t + (window - 1)/2) / (T - 1), the window's center time scaled to
    [0, 1]. Starts advance by stride; the output holds
    floor((T - window)/stride) + 1 samples.
    """
    a = np.ascontiguousarray(series, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"series must be a T x d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("series contains non-finite values")
    t_len = a.shape[0]
    if window < 2:
        raise ValueError(f"window must be >= 2, got {window}")
    if window > t_len:
        raise ValueError(f"window {window} exceeds series length {t_len}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    starts = range(0, t_len - window + 1, stride)
    denom = max(t_len - 1, 1)
    xs = np.array([(t + (window - 1) / 2) / denom for t in starts])[:, None]
    covs = []
    for t in starts:
        block = a[t : t + window]
        centered = block - block.mean(axis=0)
        cov = centered.T @ centered / (window - 1)
        covs.append((cov + cov.T) / 2)  # exact symmetry by construction
    return Dataset(x=xs, y=np.stack(covs))


def write_matrix_csv(matrix, path):
    """Plain CSV matrix dump at 17 significant digits (lossless for float64)."""
    np.savetxt(path, matrix, delimiter=",", fmt="%.17g")
