"""BIC-driven selection of the bandwidth and regularization level.

The criterion is ``npq * log(rss / npq) + log(npq) * df`` where rss sums the
in-sample squared residuals of the fits at the training covariates and df is
an unbiased divergence estimate of the fitted smoother:

* nuclear penalty -- a spectral formula over the singular values of the
  unpenalized local fit at each training point,
* lasso penalty -- the kernel weight ratio times the surviving-entry count,
* no penalty -- the kernel weight ratio times p*q.

Leave-one-out cross-validation is provided both with a fixed tuned pair
(default; tuned once on the full data) and with per-fold retuning.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import thread_count
from .errors import (
    DegenerateFitError,
    DegenerateSpectrumError,
    EvaluationError,
    ExhaustedGridError,
    MatregError,
)
from .estimators import FitConfig, _nw_core, fit_point
from .kernels import KernelSpec, kernel_at_zero
from .linalg import Svd, svd

TIE_MODES = ("limit", "strict")

# relative scale (vs sigma_1^2) below which a singular-value pair counts as tied
TIE_TOL = 1e-10


@dataclass(frozen=True)
class TuneGrid:
    """Candidate bandwidths and regularization levels for the grid search."""

    bandwidths: tuple
    lambdas: tuple

    def __post_init__(self):
        hs = tuple(float(h) for h in self.bandwidths)
        ls = tuple(float(l) for l in self.lambdas)
        if not hs or not ls:
            raise ValueError("grid must contain at least one bandwidth and one lambda")
        if not all(np.isfinite(h) and h > 0 for h in hs):
            raise ValueError("bandwidths must be finite and positive")
        if not all(np.isfinite(l) and l >= 0 for l in ls):
            raise ValueError("lambdas must be finite and nonnegative")
        if any(b <= a for a, b in zip(hs, hs[1:])):
            raise ValueError("bandwidths must be strictly increasing")
        if any(b <= a for a, b in zip(ls, ls[1:])):
            raise ValueError("lambdas must be strictly increasing")
        object.__setattr__(self, "bandwidths", hs)
        object.__setattr__(self, "lambdas", ls)


@dataclass(frozen=True)
class BicEntry:
    bandwidth: float
    lam: float
    rss_term: float
    df: float
    bic: float


@dataclass(frozen=True)
class BicReport:
    """Grid of BIC evaluations plus the index of the selected entry.

    Ties on the criterion break toward smaller df, then smaller lambda,
    then smaller bandwidth. ``failures`` lists grid cells that errored
    (empty in normal operation).
    """

    entries: tuple
    selected: int
    failures: tuple = ()

    @property
    def best(self):
        return self.entries[self.selected]


@dataclass(frozen=True)
class CvResult:
    """Leave-one-out squared Frobenius prediction errors and their summary."""

    per_sample_errors: tuple
    mean: float
    sd: float
    selected: tuple  # (bandwidth, lam) actually used per fold


class _PointState(NamedTuple):
    """Per-training-point precompute shared by every lambda of one bandwidth."""

    wsum: float
    dec: Svd
    est: np.ndarray
    resid_norm2: float      # ||Y_i - est||_F^2
    resid_proj: np.ndarray  # u_j^T (Y_i - est) v_j per singular direction


def _insample_state(data, kernel):
    """Unpenalized local fit at every training covariate plus residual stats."""
    state = []
    for i in range(data.n):
        _, wsum, est = _nw_core(data, kernel, data.x[i])
        dec = svd(est)
        resid = data.y[i] - est
        norm2 = float(np.sum(resid * resid))
        proj = np.einsum("jr,jk,kr->r", dec.u, resid, dec.v)
        state.append(_PointState(wsum, dec, est, norm2, proj))
    return state


def _nuclear_rss_i(ps, lam_tilde):
    """||Y_i - fit_i||_F^2 for the shrunk fit, via the orthonormal expansion
    fit = est - U diag(min(sigma, tau)) V^T."""
    c = np.minimum(ps.dec.sigma, lam_tilde)
    return ps.resid_norm2 + 2.0 * float(c @ ps.resid_proj) + float(c @ c)


def _df_i_nuclear(sigma, lam_tilde, p, q, tie_mode, sample_index):
    """Divergence of the singular-value shrinkage map at one training point."""
    s = np.asarray(sigma)
    surv = np.nonzero(s > lam_tilde)[0]
    if surv.size == 0:
        return 0.0
    s2 = s * s
    tie_floor = TIE_TOL * s2[0]
    num = s[surv] * (s[surv] - lam_tilde)
    den = s2[surv][:, None] - s2[None, :]
    own = np.zeros_like(den, dtype=bool)
    own[np.arange(surv.size), surv] = True
    tied = (np.abs(den) < tie_floor) & ~own
    if tie_mode == "strict" and tied.any():
        k_pos, j_pos = np.nonzero(tied)
        raise DegenerateSpectrumError(sample_index, (int(surv[k_pos[0]]), int(j_pos[0])))
    safe = np.where(own | tied, np.inf, den)
    terms = np.where(tied, 0.5 * num[:, None] / s2[surv][:, None], num[:, None] / safe)
    total = float(surv.size) + 2.0 * float(terms.sum())
    extra = abs(p - q)  # zero singular values appended on the longer side
    if extra:
        tiny = s2[surv] < tie_floor
        if tie_mode == "strict" and tiny.any():
            k = int(surv[np.nonzero(tiny)[0][0]])
            raise DegenerateSpectrumError(sample_index, (k, -1))
        base = np.where(tiny, 0.5 * num / s2[surv], num / s2[surv])
        total += extra * float(base.sum())
    return total


def _df_nuclear_from_state(data, kernel, state, lam, tie_mode):
    kh0 = kernel_at_zero(kernel)
    total = 0.0
    for i, ps in enumerate(state):
        lam_tilde = data.n * lam / ps.wsum
        dfi = _df_i_nuclear(ps.dec.sigma, lam_tilde, data.p, data.q, tie_mode, i)
        total += kh0 * dfi / ps.wsum
    return min(max(total, 0.0), float(data.n * data.p * data.q))


def _df_lasso_from_state(data, kernel, state, lam):
    kh0 = kernel_at_zero(kernel)
    total = 0.0
    for ps in state:
        lam_tilde = data.n * lam / ps.wsum
        nonzero = int(np.count_nonzero(np.abs(ps.est) > lam_tilde))
        total += kh0 * nonzero / ps.wsum
    return min(max(total, 0.0), float(data.n * data.p * data.q))


def _df_unpenalized_from_state(data, kernel, state):
    kh0 = kernel_at_zero(kernel)
    ratio = sum(kh0 / ps.wsum for ps in state)
    return min(ratio * data.p * data.q, float(data.n * data.p * data.q))


def df_nuclear(data, kernel, lam, tie_mode="limit"):
    """Unbiased df estimate of the nuclear-penalized smoother at level lam."""
    if tie_mode not in TIE_MODES:
        raise ValueError(f"tie_mode must be one of {TIE_MODES}")
    if not (np.isfinite(lam) and lam >= 0):
        raise ValueError(f"lam must be finite and nonnegative, got {lam}")
    state = _insample_state(data, kernel)
    return _df_nuclear_from_state(data, kernel, state, lam, tie_mode)


def df_lasso(data, kernel, lam):
    """df of the elementwise-shrunk smoother: weight ratio times survivor count."""
    if not (np.isfinite(lam) and lam >= 0):
        raise ValueError(f"lam must be finite and nonnegative, got {lam}")
    state = _insample_state(data, kernel)
    return _df_lasso_from_state(data, kernel, state, lam)


def _entry_from_state(data, kernel, state, lam, penalty, tie_mode):
    rss = 0.0
    for i, ps in enumerate(state):
        lam_tilde = data.n * lam / ps.wsum
        if penalty == "nuclear":
            rss += _nuclear_rss_i(ps, lam_tilde)
            continue
        if penalty == "lasso":
            fit = np.sign(ps.est) * np.maximum(np.abs(ps.est) - lam_tilde, 0.0)
            diff = data.y_flat[i] - fit.ravel()
            rss += float(diff @ diff)
        else:
            rss += ps.resid_norm2
    npq = data.n * data.p * data.q
    if rss <= 0.0:
        raise DegenerateFitError(
            f"in-sample rss is zero at (h={kernel.bandwidth}, lam={lam}); "
            "BIC's log term is undefined"
        )
    if penalty == "nuclear":
        df = _df_nuclear_from_state(data, kernel, state, lam, tie_mode)
    elif penalty == "lasso":
        df = _df_lasso_from_state(data, kernel, state, lam)
    else:
        df = _df_unpenalized_from_state(data, kernel, state)
    rss_term = npq * math.log(rss / npq)
    return BicEntry(
        bandwidth=kernel.bandwidth,
        lam=lam,
        rss_term=rss_term,
        df=df,
        bic=rss_term + math.log(npq) * df,
    )


def bic(data, kernel, lam, penalty="nuclear", tie_mode="limit"):
    """Evaluate the criterion for a single (bandwidth, lam) pair."""
    if data.n * data.p * data.q <= 1:
        raise ValueError("BIC needs n*p*q > 1")
    state = _insample_state(data, kernel)
    return _entry_from_state(data, kernel, state, lam, penalty, tie_mode)


def _select(entries):
    keys = [(e.bic, e.df, e.lam, e.bandwidth) for e in entries]
    return keys.index(min(keys))


def tune(
    data,
    grid,
    penalty="nuclear",
    kernel_family="gaussian",
    tie_mode="limit",
    _state_cache=None,
):
    """Grid-search the criterion over every (bandwidth, lam) pair.

    Cells that error are recorded and skipped; if every cell fails the
    search raises ExhaustedGridError. ``_state_cache`` (a dict keyed by
    bandwidth) lets callers running several penalties over the same grid
    reuse the per-bandwidth precompute; results are unaffected.
    """
    entries = []
    failures = []
    for h in grid.bandwidths:
        kernel = KernelSpec(bandwidth=h, dim=data.s, family=kernel_family)
        try:
            if _state_cache is not None and h in _state_cache:
                state = _state_cache[h]
            else:
                state = _insample_state(data, kernel)
                if _state_cache is not None:
                    _state_cache[h] = state
        except MatregError as exc:
            failures.extend((h, lam, str(exc)) for lam in grid.lambdas)
            continue
        for lam in grid.lambdas:
            try:
                entries.append(
                    _entry_from_state(data, kernel, state, lam, penalty, tie_mode)
                )
            except MatregError as exc:
                failures.append((h, lam, str(exc)))
    if not entries:
        raise ExhaustedGridError(failures)
    return BicReport(
        entries=tuple(entries), selected=_select(entries), failures=tuple(failures)
    )


def default_grid(data, n_bandwidths=6, n_lambdas=8, kernel_family="gaussian"):
    """Fallback grid when the caller supplies none.

    Bandwidths span [0.5, 4] times n**(-1/(4+s)); lambdas are log-spaced
    so that the largest value zeroes every in-sample fit.
    """
    rate = float(data.n) ** (-1.0 / (4 + data.s))
    hs = np.geomspace(0.5 * rate, 4.0 * rate, n_bandwidths)
    mid = KernelSpec(bandwidth=float(np.median(hs)), dim=data.s, family=kernel_family)
    lam_zero = 0.0
    for i in range(data.n):
        _, wsum, est = _nw_core(data, mid, data.x[i])
        top = float(np.linalg.svd(est, compute_uv=False)[0])
        lam_zero = max(lam_zero, top * wsum / data.n)
    if lam_zero <= 0.0:
        lambdas = (0.0,)
    else:
        lambdas = tuple(np.geomspace(1e-3 * lam_zero, 1.05 * lam_zero, n_lambdas))
    return TuneGrid(bandwidths=tuple(hs), lambdas=lambdas)


def loocv(
    data,
    grid=None,
    penalty="nuclear",
    mode="fixed",
    bandwidth=None,
    lam=None,
    kernel_family="gaussian",
    tie_mode="limit",
    max_workers=None,
):
    """Leave-one-out squared prediction error of the tuned estimator.

    mode="fixed" tunes once on the full data (or uses the supplied
    bandwidth/lam) and holds the pair for every fold; mode="retune" reruns
    the grid search on each held-out training set.
    """
    if data.n < 2:
        raise ValueError("leave-one-out needs at least two samples")
    if mode not in ("fixed", "retune"):
        raise ValueError(f"mode must be 'fixed' or 'retune', got {mode!r}")
    if (bandwidth is None) != (lam is None):
        raise ValueError("bandwidth and lam must be supplied together")

    if bandwidth is not None:
        fixed = (float(bandwidth), float(lam))
    elif mode == "fixed":
        report = tune(data, grid or default_grid(data, kernel_family=kernel_family),
                      penalty, kernel_family, tie_mode)
        fixed = (report.best.bandwidth, report.best.lam)
    else:
        fixed = None
        if grid is None:
            grid = default_grid(data, kernel_family=kernel_family)

    def fold(i):
        rest = data.without(i)
        try:
            if fixed is not None:
                h_i, lam_i = fixed
            else:
                rep = tune(rest, grid, penalty, kernel_family, tie_mode)
                h_i, lam_i = rep.best.bandwidth, rep.best.lam
            cfg = FitConfig(
                kernel=KernelSpec(bandwidth=h_i, dim=data.s, family=kernel_family),
                lam=lam_i,
                penalty=penalty,
            )
            fit = fit_point(rest, cfg, data.x[i])
        except MatregError as exc:
            raise EvaluationError([(i, exc)]) from exc
        diff = data.y[i] - fit.estimate
        return float(np.sum(diff * diff)), (h_i, lam_i)

    workers = max_workers if max_workers is not None else thread_count()
    if workers <= 1:
        results = [fold(i) for i in range(data.n)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fold, range(data.n)))
    errs = np.array([r[0] for r in results])
    return CvResult(
        per_sample_errors=tuple(float(e) for e in errs),
        mean=float(errs.mean()),
        sd=float(errs.std(ddof=1)),
        selected=tuple(r[1] for r in results),
    )
