"""Monte Carlo study harness: planted low-rank image signals, noise models,
data generation and the two evaluation metrics.

Four study settings are supported:

* I   -- scalar covariate, i.i.d. standard normal pixel noise,
* II  -- scalar covariate, separable AR-correlated noise across subjects,
         rows and columns,
* III -- bivariate covariate on a rectangular grid, i.i.d. noise,
* IV  -- bivariate covariate, separable AR noise.

The planted signal multiplies a binary shape image (cross, square or
T-shape, value 5 on the shape) by a smooth scalar function of the covariate
plus a linear ramp in the pixel indices; the resulting matrix function has
numeric rank 4 / 2 / 4 for cross / square / T-shape, which each ShapeSpec
verifies at construction.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from ._validation import frozen, thread_count
from .data import Dataset
from .errors import MatregError
from .estimators import FitConfig, fit_path
from .kernels import KernelSpec
from .linalg import rank_from_sigma
from .tuning import TuneGrid, tune

SETTINGS = ("I", "II", "III", "IV")
SHAPES = ("cross", "square", "tshape")

TRUE_RANKS = {"cross": 4, "square": 2, "tshape": 4}

# Shape geometry on the reference 64x64 canvas, as (row_lo, row_hi, col_lo,
# col_hi) half-open 0-based rectangles; scaled proportionally for other sizes.
_BASE_RECTS = {
    "square": ((20, 44, 20, 44),),
    "cross": ((28, 36, 8, 56), (8, 56, 28, 36)),
    "tshape": ((8, 16, 8, 56), (8, 56, 28, 36)),
}

# RNG stream ids within a replicate
_STREAM_TRAIN_NOISE = 0
_STREAM_TEST_X = 1
_STREAM_TEST_NOISE = 2

_MASK64 = (1 << 64) - 1


def _stream(seed, stream_id):
    """Counter-based generator for one named stream of a seeded run."""
    key = np.array([seed & _MASK64, stream_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _scaled_rects(kind, size):
    rects = []
    for r0, r1, c0, c1 in _BASE_RECTS[kind]:
        sr0, sr1 = (r0 * size) // 64, (r1 * size) // 64
        sc0, sc1 = (c0 * size) // 64, (c1 * size) // 64
        rects.append((sr0, max(sr1, sr0 + 1), sc0, max(sc1, sc0 + 1)))
    return tuple(rects)


@dataclass(frozen=True)
class ShapeSpec:
    """Binary image signal: fill_value on the shape's rectangles, 0 elsewhere.

    Construction fails fast if the planted matrix function's numeric rank at
    generic covariates differs from the shape's nominal rank.
    """

    kind: str
    size: int = 64
    fill_value: float = 5.0
    geometry: tuple = None

    def __post_init__(self):
        if self.kind not in SHAPES:
            raise ValueError(f"unknown shape {self.kind!r}; choose from {SHAPES}")
        if self.size < 2:
            raise ValueError(f"shape size must be >= 2, got {self.size}")
        if self.geometry is None:
            object.__setattr__(self, "geometry", _scaled_rects(self.kind, self.size))
        mask = np.zeros((self.size, self.size))
        for r0, r1, c0, c1 in self.geometry:
            if not (0 <= r0 < r1 <= self.size and 0 <= c0 < c1 <= self.size):
                raise ValueError(f"rectangle {(r0, r1, c0, c1)} outside {self.size}x{self.size}")
            mask[r0:r1, c0:c1] = self.fill_value
        object.__setattr__(self, "_mask", frozen(mask))
        if self.fill_value == 0.0:
            return  # explicitly empty signal; nothing to rank-check
        want = TRUE_RANKS[self.kind]
        for x in (0.137, 0.291, 0.613):
            got = _signal_rank(self, x)
            if got != want:
                raise ValueError(
                    f"{self.kind} geometry at size {self.size} yields rank {got} "
                    f"at a generic covariate, expected {want}"
                )

    @property
    def mask(self):
        return self._mask

    @property
    def true_rank(self):
        return TRUE_RANKS[self.kind]


def make_signal(shape, setting, x):
    """Planted matrix function at covariate x.

    Settings I/II: (sin(10 pi x) + cos(10 pi x) + 0.1 (j + k)) * B_jk with a
    scalar x; settings III/IV: (sin(2 pi ||x||) + cos(2 pi ||x||)
    + 0.5 (j + k)) * B_jk with a 2-vector x. Indices j, k are 1-based.
    """
    if setting not in SETTINGS:
        raise ValueError(f"unknown setting {setting!r}; choose from {SETTINGS}")
    m = shape.size
    j = np.arange(1, m + 1)[:, None]
    k = np.arange(1, m + 1)[None, :]
    if setting in ("I", "II"):
        t = float(np.asarray(x).reshape(()))
        scalar = math.sin(10 * math.pi * t) + math.cos(10 * math.pi * t)
        ramp = 0.1
    else:
        v = np.asarray(x, dtype=np.float64).reshape(-1)
        if v.shape[0] != 2:
            raise ValueError(f"settings III/IV need a 2-vector covariate, got {v.shape}")
        r = float(np.hypot(v[0], v[1]))
        scalar = math.sin(2 * math.pi * r) + math.cos(2 * math.pi * r)
        ramp = 0.5
    return (scalar + ramp * (j + k)) * shape.mask


def _signal_rank(shape, x):
    sv = np.linalg.svd(make_signal(shape, "I", x), compute_uv=False)
    return rank_from_sigma(sv, 1e-8)


@dataclass(frozen=True)
class SimSpec:
    """One simulation configuration: setting, shape, sizes, noise and seed."""

    setting: str
    shape: ShapeSpec
    n_train: int
    n_test: int = 500
    noise_seed: int = 0
    error_model: str = None
    ar_rho: float = 0.5
    replicate_count: int = 1
    noise_scale: float = 1.0

    def __post_init__(self):
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}; choose from {SETTINGS}")
        correlated = self.setting in ("II", "IV")
        if self.error_model is None:
            object.__setattr__(
                self, "error_model", "separable_ar" if correlated else "iid"
            )
        if self.error_model not in ("iid", "separable_ar"):
            raise ValueError(f"unknown error model {self.error_model!r}")
        if (self.error_model == "separable_ar") != correlated:
            raise ValueError(
                f"setting {self.setting} requires error_model="
                f"{'separable_ar' if correlated else 'iid'}, got {self.error_model}"
            )
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("n_train and n_test must be positive")
        if self.replicate_count < 1:
            raise ValueError("replicate_count must be >= 1")
        if not 0 <= self.noise_scale < np.inf:
            raise ValueError("noise_scale must be finite and nonnegative")
        if not -1 < self.ar_rho < 1:
            raise ValueError("ar_rho must lie in (-1, 1)")

    @property
    def s(self):
        return 2 if self.setting in ("III", "IV") else 1


def _ar_cholesky(size, rho):
    idx = np.arange(size)
    corr = rho ** np.abs(idx[:, None] - idx[None, :])
    return np.linalg.cholesky(corr)


def sample_errors(spec, n, rng):
    """Draw n error matrices (n, p, q) from the configured noise model.

    The separable model colors an i.i.d. normal tensor with the Cholesky
    factors of AR(rho) correlation matrices, applied along columns, then
    rows, then the subject axis; the factor order is fixed for
    reproducibility (the axes commute mathematically).
    """
    m = spec.shape.size
    z = rng.standard_normal((n, m, m))
    if spec.error_model == "iid":
        return z
    l_ax = _ar_cholesky(m, spec.ar_rho)
    l_sub = _ar_cholesky(n, spec.ar_rho)
    z = np.matmul(z, l_ax.T)         # columns
    z = np.matmul(l_ax, z)           # rows
    return np.tensordot(l_sub, z, axes=(1, 0))  # subjects


def _train_covariates(spec):
    n, s = spec.n_train, spec.s
    if s == 1:
        return np.linspace(0.0, 1.0, n)[:, None]
    dims = {500: (20, 25), 200: (14, 15)}.get(n)
    if dims is None:
        a = math.ceil(math.sqrt(0.8 * n))
        dims = (a, math.ceil(n / a))
    a, b = dims
    g1 = np.linspace(0.0, 1.0, a)
    g2 = np.linspace(0.0, 1.0, b)
    pts = np.stack(np.meshgrid(g1, g2, indexing="ij"), axis=-1).reshape(-1, 2)
    return pts[:n]


class GeneratedData(NamedTuple):
    train: Dataset
    test: Dataset


def generate(spec):
    """Training and test datasets for one replicate of the configuration.

    Training covariates sit on the setting's equispaced grid; test
    covariates are n_test uniform draws from a dedicated stream. Responses
    are signal plus noise_scale times the drawn errors. Identical specs
    produce bit-identical datasets.
    """
    xs = _train_covariates(spec)
    sig = np.stack([make_signal(spec.shape, spec.setting, x) for x in xs])
    rng_train = _stream(spec.noise_seed, _STREAM_TRAIN_NOISE)
    train_y = sig + spec.noise_scale * sample_errors(spec, spec.n_train, rng_train)

    rng_x = _stream(spec.noise_seed, _STREAM_TEST_X)
    test_x = rng_x.uniform(0.0, 1.0, size=(spec.n_test, spec.s))
    test_sig = np.stack([make_signal(spec.shape, spec.setting, x) for x in test_x])
    rng_test = _stream(spec.noise_seed, _STREAM_TEST_NOISE)
    test_y = test_sig + spec.noise_scale * sample_errors(spec, spec.n_test, rng_test)
    return GeneratedData(
        train=Dataset(x=xs, y=train_y), test=Dataset(x=test_x, y=test_y)
    )


def integrated_error(fits, dataset):
    """Average squared Frobenius distance between fits and responses."""
    if len(fits) != dataset.n:
        raise ValueError(f"{len(fits)} fits for {dataset.n} test samples")
    total = 0.0
    for i, f in enumerate(fits):
        diff = dataset.y[i] - f.estimate
        total += float(np.sum(diff * diff))
    return total / dataset.n


@dataclass(frozen=True)
class ReplicateResult:
    err_ours: float
    err_nw: float
    err_lasso: float
    avg_selected_rank: float
    bandwidth_ours: float
    lam_ours: float
    bandwidth_nw: float
    bandwidth_lasso: float
    lam_lasso: float


_METRICS = ("err_ours", "err_nw", "err_lasso", "avg_selected_rank")


@dataclass(frozen=True)
class SimResult:
    """Per-replicate metrics plus their means and standard errors."""

    per_replicate: tuple
    means: dict
    standard_errors: dict
    failures: tuple = ()

    def to_dict(self):
        return {
            "per_replicate": [vars(r) for r in self.per_replicate],
            "means": dict(self.means),
            "standard_errors": dict(self.standard_errors),
            "failures": [list(f) for f in self.failures],
        }


def default_study_grid(spec):
    """Tuning grid used by the study harness when the caller passes none.

    The bandwidth range tracks the oscillation scale of the planted signals
    (period 0.2 in x for settings I/II, 0.5 in ||x|| for III/IV); the
    regularization range brackets the shrinkage levels at which pixel noise
    of unit variance is removed while the planted spectrum survives.
    """
    if spec.s == 1:
        hs = np.geomspace(0.008, 0.05, 14)
    else:
        hs = np.geomspace(0.04, 0.25, 14)
    lams = np.geomspace(0.25, 32.0, 18)
    return TuneGrid(bandwidths=tuple(hs), lambdas=tuple(lams))


def _run_replicate(spec, grid, index):
    rep_spec = replace(spec, noise_seed=spec.noise_seed ^ index, replicate_count=1)
    train, test = generate(rep_spec)
    s = rep_spec.s

    cache = {}
    rep_nuc = tune(train, grid, penalty="nuclear", _state_cache=cache)
    rep_las = tune(train, grid, penalty="lasso", _state_cache=cache)
    rep_nw = tune(
        train, TuneGrid(grid.bandwidths, (0.0,)), penalty="none", _state_cache=cache
    )

    cfg_nuc = FitConfig(
        kernel=KernelSpec(bandwidth=rep_nuc.best.bandwidth, dim=s),
        lam=rep_nuc.best.lam,
        penalty="nuclear",
    )
    cfg_las = FitConfig(
        kernel=KernelSpec(bandwidth=rep_las.best.bandwidth, dim=s),
        lam=rep_las.best.lam,
        penalty="lasso",
    )
    cfg_nw = FitConfig(
        kernel=KernelSpec(bandwidth=rep_nw.best.bandwidth, dim=s), penalty="none"
    )

    err_ours = integrated_error(fit_path(train, cfg_nuc, test.x, max_workers=1), test)
    err_nw = integrated_error(fit_path(train, cfg_nw, test.x, max_workers=1), test)
    err_las = integrated_error(fit_path(train, cfg_las, test.x, max_workers=1), test)
    in_fits = fit_path(train, cfg_nuc, train.x, max_workers=1)
    avg_rank = float(np.mean([f.rank for f in in_fits]))
    return ReplicateResult(
        err_ours=err_ours,
        err_nw=err_nw,
        err_lasso=err_las,
        avg_selected_rank=avg_rank,
        bandwidth_ours=rep_nuc.best.bandwidth,
        lam_ours=rep_nuc.best.lam,
        bandwidth_nw=rep_nw.best.bandwidth,
        bandwidth_lasso=rep_las.best.bandwidth,
        lam_lasso=rep_las.best.lam,
    )


def run_study(spec, grid=None, max_workers=None):
    """Run replicate_count Monte Carlo replicates and aggregate the metrics.

    Replicate i draws its seed as noise_seed XOR i, so results are
    reproducible and independent of execution order. Failed replicates are
    recorded with their index; the study raises only if every replicate
    fails.
    """
    if grid is None:
        grid = default_study_grid(spec)
    reps = spec.replicate_count

    def one(i):
        return _run_replicate(spec, grid, i)

    workers = max_workers if max_workers is not None else thread_count()
    results, failures = [None] * reps, []
    if workers <= 1 or reps == 1:
        for i in range(reps):
            try:
                results[i] = one(i)
            except MatregError as exc:
                failures.append((i, str(exc)))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = {pool.submit(one, i): i for i in range(reps)}
            for fut, i in futs.items():
                try:
                    results[i] = fut.result()
                except MatregError as exc:
                    failures.append((i, str(exc)))
    kept = [r for r in results if r is not None]
    if not kept:
        raise MatregError(
            f"all {reps} replicates failed: "
            + "; ".join(f"[{i}] {m}" for i, m in sorted(failures))
        )
    means, ses = {}, {}
    for name in _METRICS:
        vals = np.array([getattr(r, name) for r in kept])
        means[name] = float(vals.mean())
        sd = float(vals.std(ddof=1)) if len(kept) > 1 else 0.0
        ses[name] = sd / math.sqrt(len(kept))
    return SimResult(
        per_replicate=tuple(kept),
        means=means,
        standard_errors=ses,
        failures=tuple(sorted(failures)),
    )
