"""Acceptance suite: one test per release criterion, each printing a
pass/fail line. Run with `pytest tests/test_acceptance.py -s` to watch the
lines appear; the desk-scale study reproductions (criteria 6-9) dominate
the runtime (tens of minutes on one core).
"""

import functools
import math
import time

import numpy as np

from matreg import (
    Dataset,
    FitConfig,
    KernelSpec,
    ShapeSpec,
    SimSpec,
    df_nuclear,
    fit_nuclear,
    make_signal,
    run_study,
    sample_errors,
    sliding_covariance,
    soft_threshold_nuclear,
    tune,
    TuneGrid,
)
from matreg.simulation import _stream

BASE_SEED = 20260809

REFERENCE_N200_SQUARE = {"err_ours": 4288.0, "err_nw": 6107.0, "err_lasso": 4875.0}


def _report(num, text):
    print(f"\n[PASS] criterion {num}: {text}")


def _fmt(vals):
    return ", ".join(f"{k}={v:.1f}" for k, v in vals.items())


# ---------------------------------------------------------------- studies

@functools.lru_cache(maxsize=None)
def study(setting, shape_kind, n_train, replicates, seed):
    spec = SimSpec(
        setting=setting,
        shape=ShapeSpec(shape_kind),
        n_train=n_train,
        noise_seed=seed,
        replicate_count=replicates,
    )
    return run_study(spec)


def cell_means(result, reps, field):
    vals = [getattr(r, field) for r in result.per_replicate[:reps]]
    return float(np.mean(vals))


# ------------------------------------------------------------- criterion 1

def test_criterion_1_prox_correctness():
    t0 = time.time()
    rng = np.random.default_rng(1)
    violations = 0
    for _ in range(50):
        p = int(rng.integers(2, 13))
        q = int(rng.integers(2, 10))
        m = rng.normal(size=(p, q)) * rng.uniform(0.5, 3.0)
        tau = float(rng.uniform(0.05, 2.0))
        star = soft_threshold_nuclear(m, tau)
        base = 0.5 * np.sum((m - star) ** 2) + tau * np.sum(
            np.linalg.svd(star, compute_uv=False)
        )
        for _ in range(500):
            pert = rng.normal(size=(p, q))
            pert /= np.linalg.norm(pert)
            eps = rng.choice([1e-3, 1e-2])
            cand = star + eps * pert
            obj = 0.5 * np.sum((m - cand) ** 2) + tau * np.sum(
                np.linalg.svd(cand, compute_uv=False)
            )
            if obj < base:
                violations += 1
        ident = soft_threshold_nuclear(m, 0.0)
        assert np.linalg.norm(ident - m) <= 1e-12
    assert violations == 0
    elapsed = time.time() - t0
    assert elapsed < 10.0
    _report(1, f"0 violations over 50x500 perturbation probes ({elapsed:.1f} s)")


# ------------------------------------------------------------- criterion 2

def _fd_total_divergence(data, cfg, delta=1e-5):
    total = 0.0
    base = np.array(data.y)
    for i in range(data.n):
        for j in range(data.p):
            for k in range(data.q):
                up = base.copy()
                up[i, j, k] += delta
                down = base.copy()
                down[i, j, k] -= delta
                hi = fit_nuclear(Dataset(x=data.x, y=up), cfg, data.x[i]).estimate
                lo = fit_nuclear(Dataset(x=data.x, y=down), cfg, data.x[i]).estimate
                total += (hi[j, k] - lo[j, k]) / (2 * delta)
    return total


def test_criterion_2_df_matches_divergence():
    t0 = time.time()
    shape = ShapeSpec("square", size=8)
    lam = 0.05
    kernel = KernelSpec(bandwidth=0.12)
    cfg = FitConfig(kernel=kernel, lam=lam)
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        xs = np.linspace(0, 1, 20)
        y = np.stack([make_signal(shape, "I", x) for x in xs])
        y += rng.normal(size=y.shape)
        data = Dataset(x=xs, y=y)
        want = _fd_total_divergence(data, cfg)
        got = df_nuclear(data, kernel, lam)
        rel = abs(got - want) / abs(want)
        worst = max(worst, rel)
        assert rel < 1e-3, f"seed {seed}: rel err {rel:.2e}"
    elapsed = time.time() - t0
    assert elapsed < 30.0
    _report(2, f"20 micro-instances, worst relative error {worst:.2e} ({elapsed:.1f} s)")


# ------------------------------------------------------------- criterion 3

def test_criterion_3_bic_decomposition_and_determinism():
    t0 = time.time()
    shape = ShapeSpec("square", size=8)
    rng = np.random.default_rng(3)
    xs = np.linspace(0, 1, 20)
    y = np.stack([make_signal(shape, "I", x) for x in xs]) + rng.normal(
        size=(20, 8, 8)
    )
    data = Dataset(x=xs, y=y)
    grid = TuneGrid(
        bandwidths=(0.06, 0.1, 0.18), lambdas=(0.0, 0.02, 0.1, 0.5, 2.0)
    )
    npq = data.n * data.p * data.q
    reports = [tune(data, grid, penalty=p) for p in ("nuclear", "lasso", "none")]
    for rep in reports:
        for e in rep.entries:
            recomputed = e.rss_term + math.log(npq) * e.df
            assert abs(e.bic - recomputed) <= 1e-12 * max(1.0, abs(e.bic))
    for rep, penalty in zip(reports, ("nuclear", "lasso", "none")):
        again = tune(data, grid, penalty=penalty)
        assert again == rep
    elapsed = time.time() - t0
    assert elapsed < 5.0
    _report(3, f"all entries recompose to 1e-12; repeated tunes identical ({elapsed:.1f} s)")


# ------------------------------------------------------------- criterion 4

def test_criterion_4_noise_model_calibration():
    t0 = time.time()
    spec = SimSpec(
        setting="II", shape=ShapeSpec("square", size=16), n_train=5, noise_seed=4
    )
    rng = _stream(4, 0)
    subj, p = 5, 16
    draws = np.stack([sample_errors(spec, subj, rng) for _ in range(2000)])

    def corr(a, b):
        a = a.ravel()
        b = b.ravel()
        return float(np.mean(a * b) / np.sqrt(np.mean(a * a) * np.mean(b * b)))

    worst = 0.0
    for lag in (1, 2, 3):
        want = 0.5**lag
        rows = corr(draws[:, :, :-lag, :], draws[:, :, lag:, :])
        cols = corr(draws[:, :, :, :-lag], draws[:, :, :, lag:])
        subjects = corr(draws[:, :-lag], draws[:, lag:])
        for name, got in (("rows", rows), ("cols", cols), ("subjects", subjects)):
            err = abs(got - want)
            worst = max(worst, err)
            assert err < 0.03, f"{name} lag {lag}: {got:.4f} vs {want:.4f}"
    elapsed = time.time() - t0
    assert elapsed < 60.0
    _report(4, f"AR correlations at lags 1-3 within +-0.03 (worst {worst:.4f}, {elapsed:.1f} s)")


# ------------------------------------------------------------- criterion 5

def test_criterion_5_planted_rank_recovery():
    t0 = time.time()
    want = {"square": 2.0, "cross": 4.0, "tshape": 4.0}
    got = {}
    for kind, target in want.items():
        spec = SimSpec(
            setting="I",
            shape=ShapeSpec(kind),
            n_train=60,
            n_test=30,
            noise_seed=5,
            noise_scale=0.0,
            replicate_count=1,
        )
        res = run_study(spec)
        got[kind] = res.per_replicate[0].avg_selected_rank
        assert got[kind] == target, f"{kind}: rank {got[kind]} != {target}"
    _report(5, f"zero-noise selected ranks {got} ({time.time() - t0:.1f} s)")


# ------------------------------------------------------------- criterion 6

def test_criterion_6_table1_square_n200():
    t0 = time.time()
    res = study("I", "square", 200, 20, BASE_SEED)
    assert not res.failures
    for field, target in REFERENCE_N200_SQUARE.items():
        got = res.means[field]
        assert abs(got - target) <= 0.05 * target, (
            f"{field}: {got:.0f} outside 5% of {target:.0f}"
        )
    rank = res.means["avg_selected_rank"]
    assert abs(rank - 2.0) <= 0.15, f"avg selected rank {rank:.3f}"
    elapsed = time.time() - t0
    assert elapsed < 1800.0
    _report(
        6,
        f"{_fmt(res.means)} vs reference 4288/6107/4875 rank 2.00 ({elapsed / 60:.1f} min)",
    )


# ------------------------------------------------------------- criterion 7

def test_criterion_7_ordering_all_settings():
    t0 = time.time()
    lines = []
    for setting in ("I", "II", "III", "IV"):
        for kind in ("cross", "square", "tshape"):
            if setting == "I" and kind == "square":
                res = study("I", "square", 200, 20, BASE_SEED)  # reuse
            else:
                res = study(setting, kind, 200, 10, BASE_SEED)
            ours = cell_means(res, 10, "err_ours")
            lasso = cell_means(res, 10, "err_lasso")
            nw = cell_means(res, 10, "err_nw")
            assert ours < lasso < nw, (
                f"{setting}/{kind}: ours={ours:.0f} lasso={lasso:.0f} nw={nw:.0f}"
            )
            lines.append(f"{setting}/{kind} {ours:.0f}<{lasso:.0f}<{nw:.0f}")
    elapsed = time.time() - t0
    assert elapsed < 7200.0
    _report(7, "; ".join(lines) + f" ({elapsed / 60:.1f} min)")


# ------------------------------------------------------------- criterion 8

def test_criterion_8_error_decays_with_n():
    t0 = time.time()
    small = study("I", "square", 200, 20, BASE_SEED)
    big = study("I", "square", 500, 10, BASE_SEED)
    err_200 = cell_means(small, 10, "err_ours")
    err_500 = cell_means(big, 10, "err_ours")
    assert err_500 < err_200, f"{err_500:.0f} !< {err_200:.0f}"
    _report(
        8,
        f"mean error n=500 {err_500:.0f} < n=200 {err_200:.0f} "
        f"({(time.time() - t0) / 60:.1f} min)",
    )


# ------------------------------------------------------------- criterion 9

def test_criterion_9_rank_direction_under_correlated_errors():
    t0 = time.time()
    res = study("II", "square", 200, 10, BASE_SEED)
    ranks = [r.avg_selected_rank for r in res.per_replicate]
    mean_rank = float(np.mean(ranks))
    assert mean_rank >= 2.0, f"mean selected rank {mean_rank:.2f} below true rank"
    assert 2.0 <= mean_rank <= 6.0, f"mean selected rank {mean_rank:.2f} outside [2, 6]"
    assert all(r >= 2.0 for r in ranks), f"some replicate under-selected: {ranks}"
    _report(
        9,
        f"Setting II square ranks in [{min(ranks):.2f}, {max(ranks):.2f}], "
        f"mean {mean_rank:.2f} ({(time.time() - t0) / 60:.1f} min)",
    )


# ------------------------------------------------------------ criterion 10

def test_criterion_10_sliding_window_shape():
    t0 = time.time()
    rng = np.random.default_rng(10)
    series = rng.normal(size=(256, 64))
    data = sliding_covariance(series, window=100, stride=1)
    assert data.n == 157
    assert (data.p, data.q) == (64, 64)
    for cov in data.y:
        assert np.array_equal(cov, cov.T)
        assert np.linalg.eigvalsh(cov).min() >= -1e-10
    elapsed = time.time() - t0
    assert elapsed < 1.0
    _report(10, f"157 SPD 64x64 covariance windows ({elapsed:.2f} s)")
