"""Scikit-learn style front end for the matrix-response smoothers.

MatrixResponseRegressor memorizes the training pairs at fit time (kernel
smoothers carry their data) and evaluates the configured estimator at
predict time. Leaving ``bandwidth`` (and ``lam``, for penalized variants)
unset triggers BIC selection over a grid during fit.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .data import Dataset
from .estimators import PENALTIES, FitConfig, fit_path
from .kernels import FAMILIES, KernelSpec
from .tuning import TuneGrid, default_grid, tune


class MatrixResponseRegressor(BaseEstimator):
    """Kernel-smoothed matrix-response regression with optional shrinkage.

    Parameters
    ----------
    penalty : {"nuclear", "lasso", "none"}
        Shrinkage applied to the local average: singular-value
        soft-thresholding, elementwise soft-thresholding, or none.
    kernel : {"gaussian", "epanechnikov"}
        Smoothing kernel family.
    bandwidth : float or None
        Isotropic kernel bandwidth. None selects it by BIC during fit.
    lam : float or None
        Regularization level on the objective scale. None selects it by
        BIC during fit (treated as 0 when penalty="none").
    grid_bandwidths, grid_lambdas : sequence or None
        Candidate values for BIC selection; defaults are derived from the
        training data when omitted.

    Attributes
    ----------
    dataset_ : Dataset
        Stored training data.
    bandwidth_, lam_ : float
        Values actually used at predict time.
    bic_report_ : BicReport or None
        Grid-search record when BIC selection ran.
    """

    def __init__(
        self,
        penalty="nuclear",
        kernel="gaussian",
        bandwidth=None,
        lam=None,
        grid_bandwidths=None,
        grid_lambdas=None,
    ):
        self.penalty = penalty
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.lam = lam
        self.grid_bandwidths = grid_bandwidths
        self.grid_lambdas = grid_lambdas

    def _check_params(self):
        if self.penalty not in PENALTIES:
            raise ValueError(f"penalty must be one of {PENALTIES}, got {self.penalty!r}")
        if self.kernel not in FAMILIES:
            raise ValueError(f"kernel must be one of {FAMILIES}, got {self.kernel!r}")

    def fit(self, X, Y):
        """Store the training pairs and resolve the tuning parameters.

        X is (n, s) or (n,); Y is (n, p, q).
        """
        self._check_params()
        data = Dataset(x=np.asarray(X), y=np.asarray(Y))
        self.dataset_ = data
        self.n_features_in_ = data.s
        self.bic_report_ = None

        needs_lam = self.penalty != "none" and self.lam is None
        needs_h = self.bandwidth is None
        if needs_h or needs_lam:
            grid = self._build_grid(data, needs_lam)
            self.bic_report_ = tune(data, grid, penalty=self.penalty,
                                    kernel_family=self.kernel)
            best = self.bic_report_.best
            self.bandwidth_ = best.bandwidth
            self.lam_ = best.lam if self.penalty != "none" else 0.0
        else:
            self.bandwidth_ = float(self.bandwidth)
            self.lam_ = 0.0 if self.penalty == "none" else float(self.lam)
        return self

    def _build_grid(self, data, needs_lam):
        base = default_grid(data, kernel_family=self.kernel)
        hs = (
            tuple(float(h) for h in self.grid_bandwidths)
            if self.grid_bandwidths is not None
            else ((float(self.bandwidth),) if self.bandwidth is not None else base.bandwidths)
        )
        if not needs_lam:
            lams = (0.0,) if self.lam is None else (float(self.lam),)
        elif self.grid_lambdas is not None:
            lams = tuple(float(l) for l in self.grid_lambdas)
        else:
            lams = base.lambdas
        return TuneGrid(bandwidths=hs, lambdas=lams)

    def _config(self):
        if not hasattr(self, "dataset_"):
            raise NotFittedError(
                "this MatrixResponseRegressor is not fitted yet; call fit first"
            )
        spec = KernelSpec(
            bandwidth=self.bandwidth_, dim=self.dataset_.s, family=self.kernel
        )
        return FitConfig(kernel=spec, lam=self.lam_, penalty=self.penalty)

    def fit_results(self, X):
        """Full per-point fit records (estimate, spectrum, rank, objective)."""
        config = self._config()
        pts = np.asarray(X, dtype=np.float64)
        return fit_path(self.dataset_, config, pts)

    def predict(self, X):
        """Estimated matrices at the query covariates, shaped (m, p, q)."""
        return np.stack([f.estimate for f in self.fit_results(X)])

    def score(self, X, Y):
        """Negative mean squared Frobenius prediction error (higher is better)."""
        y = np.asarray(Y, dtype=np.float64)
        pred = self.predict(X)
        if pred.shape != y.shape:
            raise ValueError(f"Y has shape {y.shape}, predictions {pred.shape}")
        return -float(np.mean(np.sum((y - pred) ** 2, axis=(1, 2))))
