"""Observation containers: covariate vectors paired with matrix responses."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import frozen


class Sample(NamedTuple):
    """One observation: covariate vector x (length s) and p x q response y."""

    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of samples sharing covariate and response shapes.

    x is stored as an (n, s) array and y as (n, p, q); both are copied and
    made read-only on construction, so a Dataset never mutates after it is
    built and is safe to share across threads.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.y, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError(f"covariates must be (n, s), got shape {x.shape}")
        if y.ndim != 3:
            raise ValueError(f"responses must be (n, p, q), got shape {y.shape}")
        if x.shape[0] != y.shape[0]:
            raise ValueError(
                f"covariate count {x.shape[0]} != response count {y.shape[0]}"
            )
        if x.shape[0] == 0:
            raise ValueError("dataset must contain at least one sample")
        if not np.all(np.isfinite(x)):
            raise ValueError("covariates contain non-finite values")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses contain non-finite values")
        object.__setattr__(self, "x", frozen(x))
        object.__setattr__(self, "y", frozen(y))

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def s(self):
        return self.x.shape[1]

    @property
    def p(self):
        return self.y.shape[1]

    @property
    def q(self):
        return self.y.shape[2]

    def __len__(self):
        return self.n

    def sample(self, i):
        return Sample(x=self.x[i], y=self.y[i])

    def samples(self):
        return [self.sample(i) for i in range(self.n)]

    def without(self, i):
        """Leave-one-out view: a new Dataset missing sample i."""
        if not 0 <= i < self.n:
            raise IndexError(f"sample index {i} out of range for n={self.n}")
        keep = np.arange(self.n) != i
        return Dataset(x=self.x[keep], y=self.y[keep])

    @classmethod
    def from_samples(cls, samples):
        xs = np.stack([np.atleast_1d(s.x) for s in samples])
        ys = np.stack([s.y for s in samples])
        return cls(x=xs, y=ys)

    # y flattened to (n, p*q); cached because every kernel average uses it
    @property
    def y_flat(self):
        flat = getattr(self, "_y_flat", None)
        if flat is None:
            flat = self.y.reshape(self.n, self.p * self.q)
            object.__setattr__(self, "_y_flat", flat)
        return flat
