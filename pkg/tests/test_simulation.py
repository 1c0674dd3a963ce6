import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from matreg import (
    FitConfig,
    KernelSpec,
    ShapeSpec,
    SimSpec,
    TuneGrid,
    fit_path,
    generate,
    integrated_error,
    make_signal,
    numeric_rank,
    run_study,
    sample_errors,
)
from matreg.simulation import _stream


def spec_for(setting="I", shape_kind="square", size=16, n=40, **kw):
    shape = ShapeSpec(shape_kind, size=size)
    return SimSpec(setting=setting, shape=shape, n_train=n, **kw)


class TestShapeSpec:
    def test_mask_entries_binary(self):
        for kind in ("cross", "square", "tshape"):
            sh = ShapeSpec(kind)
            vals = np.unique(sh.mask)
            assert set(vals).issubset({0.0, 5.0})

    def test_true_ranks_at_64(self):
        assert ShapeSpec("cross").true_rank == 4
        assert ShapeSpec("square").true_rank == 2
        assert ShapeSpec("tshape").true_rank == 4

    def test_bad_geometry_fails_fast(self):
        with pytest.raises(ValueError):
            ShapeSpec("cross", geometry=((0, 64, 0, 64),))  # full square: rank 2
        with pytest.raises(ValueError):
            ShapeSpec("square", geometry=((0, 70, 0, 70),))  # out of canvas

    def test_rank_invariant_across_random_covariates(self):
        rng = np.random.default_rng(0)
        for kind in ("cross", "square", "tshape"):
            sh = ShapeSpec(kind)
            ranks = {
                numeric_rank(make_signal(sh, "I", x), 1e-8)
                for x in rng.uniform(size=100)
            }
            assert ranks == {sh.true_rank}


class TestMakeSignal:
    def test_zero_mask_gives_zero(self):
        sh = ShapeSpec("square", fill_value=0.0)
        for x in (0.0, 0.3, 0.9):
            assert_array_equal(make_signal(sh, "I", x), np.zeros((64, 64)))

    def test_square_rank_2(self):
        sh = ShapeSpec("square")
        assert numeric_rank(make_signal(sh, "I", 0.77), 1e-8) == 2

    def test_cross_rank_4_at_given_point(self):
        sh = ShapeSpec("cross")
        assert numeric_rank(make_signal(sh, "I", 0.13), 1e-8) == 4

    def test_univariate_formula(self):
        sh = ShapeSpec("square", size=8)
        x = 0.21
        g = make_signal(sh, "I", x)
        j, k = 3, 4  # inside the scaled block, 0-based
        want = (
            np.sin(10 * np.pi * x) + np.cos(10 * np.pi * x) + 0.1 * ((j + 1) + (k + 1))
        ) * sh.mask[j, k]
        assert_allclose(g[j, k], want, rtol=1e-14)

    def test_bivariate_formula(self):
        sh = ShapeSpec("square", size=8)
        x = np.array([0.3, 0.4])
        g = make_signal(sh, "III", x)
        r = np.hypot(*x)
        j, k = 3, 4
        want = (
            np.sin(2 * np.pi * r) + np.cos(2 * np.pi * r) + 0.5 * ((j + 1) + (k + 1))
        ) * sh.mask[j, k]
        assert_allclose(g[j, k], want, rtol=1e-14)
        with pytest.raises(ValueError):
            make_signal(sh, "III", [0.3])


class TestSampleErrors:
    def test_iid_moments(self):
        spec = spec_for(size=6, n=4)
        rng = _stream(0, 0)
        draws = sample_errors(spec, 10_000, rng)
        flat = draws.ravel()
        assert abs(flat.mean()) < 4 / np.sqrt(flat.size)
        assert abs(flat.var() - 1.0) < 0.05

    def test_separable_row_col_correlations(self):
        spec = spec_for(setting="II", size=12, n=600)
        draws = sample_errors(spec, 600, _stream(1, 0))
        for lag in (1, 2, 3):
            rows = np.mean(draws[:, :-lag, :] * draws[:, lag:, :])
            cols = np.mean(draws[:, :, :-lag] * draws[:, :, lag:])
            assert abs(rows - 0.5**lag) < 0.03, f"row lag {lag}: {rows}"
            assert abs(cols - 0.5**lag) < 0.03, f"col lag {lag}: {cols}"

    def test_separable_subject_correlations(self):
        spec = spec_for(setting="II", size=12, n=600)
        draws = sample_errors(spec, 600, _stream(2, 0))
        for lag in (1, 2, 3):
            subj = np.mean(draws[:-lag] * draws[lag:])
            assert abs(subj - 0.5**lag) < 0.03, f"subject lag {lag}: {subj}"

    def test_seed_determinism(self):
        spec = spec_for(setting="II", size=6, n=20)
        a = sample_errors(spec, 20, _stream(9, 0))
        b = sample_errors(spec, 20, _stream(9, 0))
        assert_array_equal(a, b)


class TestSimSpecValidation:
    def test_error_model_forced_by_setting(self):
        assert spec_for("I").error_model == "iid"
        assert spec_for("II").error_model == "separable_ar"
        with pytest.raises(ValueError):
            spec_for("I", error_model="separable_ar")
        with pytest.raises(ValueError):
            spec_for("IV", error_model="iid")

    def test_covariate_dim_follows_setting(self):
        assert spec_for("I").s == 1
        assert spec_for("III").s == 2


class TestGenerate:
    def test_zero_noise_reproduces_signal(self):
        spec = spec_for(noise_scale=0.0, n=12, n_test=5)
        train, test = generate(spec)
        for i in range(train.n):
            assert_array_equal(
                train.y[i], make_signal(spec.shape, "I", train.x[i][0])
            )

    def test_univariate_grid_is_equispaced(self):
        spec = spec_for(n=200, n_test=2)
        train, _ = generate(spec)
        assert_allclose(train.x[:, 0], np.arange(200) / 199.0, rtol=1e-15)

    def test_bivariate_grid_shapes(self):
        spec = spec_for("III", n=500, n_test=2)
        train, _ = generate(spec)
        assert train.n == 500
        assert len(np.unique(train.x[:, 0])) == 20
        assert len(np.unique(train.x[:, 1])) == 25
        spec200 = spec_for("III", n=200, n_test=2)
        t200, _ = generate(spec200)
        assert t200.n == 200  # 14 x 15 grid truncated row-major

    def test_same_seed_bit_identical(self):
        spec = spec_for("II", n=15, n_test=7, noise_seed=123)
        a = generate(spec)
        b = generate(spec)
        assert_array_equal(a.train.y, b.train.y)
        assert_array_equal(a.test.x, b.test.x)
        assert_array_equal(a.test.y, b.test.y)

    def test_different_seed_differs(self):
        a = generate(spec_for(n=10, n_test=3, noise_seed=1))
        b = generate(spec_for(n=10, n_test=3, noise_seed=2))
        assert not np.array_equal(a.train.y, b.train.y)


class TestIntegratedError:
    def test_exact_fits_give_zero(self):
        spec = spec_for(noise_scale=0.0, n=10, n_test=20)
        train, test = generate(spec)
        cfg = FitConfig(kernel=KernelSpec(bandwidth=0.1), lam=0.0, penalty="none")
        # evaluate against the fits' own estimates
        fits = fit_path(train, cfg, test.x)
        fake = type(test)(x=test.x, y=np.stack([f.estimate for f in fits]))
        assert integrated_error(fits, fake) == 0.0

    def test_chi_square_moment_oracle(self):
        # zero fits against pure unit noise: mean ~ p*q within 3 sd
        rng = np.random.default_rng(5)
        n, p = 500, 64
        noise = rng.standard_normal((n, p, p))
        from matreg import Dataset

        ds = Dataset(x=np.linspace(0, 1, n), y=noise)

        class ZeroFit:
            estimate = np.zeros((p, p))

        err = integrated_error([ZeroFit()] * n, ds)
        sd_mean = np.sqrt(2.0 * p * p / n)
        assert abs(err - p * p) < 3 * sd_mean

    def test_length_mismatch(self):
        spec = spec_for(n=5, n_test=4)
        _, test = generate(spec)
        with pytest.raises(ValueError):
            integrated_error([], test)


class TestRunStudy:
    def test_zero_noise_lam_zero_estimators_coincide(self):
        # single-cell grid: all three estimators reduce to the same local
        # average, so the three test errors agree
        spec = spec_for(n=24, n_test=30, noise_scale=0.0, replicate_count=1)
        grid = TuneGrid(bandwidths=(0.05,), lambdas=(0.0,))
        res = run_study(spec, grid)
        r = res.per_replicate[0]
        assert_allclose(r.err_ours, r.err_nw, rtol=1e-9, atol=1e-12)
        assert_allclose(r.err_lasso, r.err_nw, rtol=1e-9, atol=1e-12)

    def test_zero_noise_square_rank_two(self):
        spec = spec_for(n=24, n_test=10, noise_scale=0.0, replicate_count=1)
        grid = TuneGrid(bandwidths=(0.05, 0.1), lambdas=(0.01, 0.05))
        res = run_study(spec, grid)
        assert res.per_replicate[0].avg_selected_rank == 2.0

    def test_bit_reproducible(self):
        spec = spec_for(n=20, n_test=15, replicate_count=2, noise_seed=77)
        grid = TuneGrid(bandwidths=(0.08,), lambdas=(0.05, 0.5))
        a = run_study(spec, grid)
        b = run_study(spec, grid)
        assert a == b

    def test_replicates_derive_seeds_by_xor(self):
        spec = spec_for(n=16, n_test=10, replicate_count=2, noise_seed=40)
        grid = TuneGrid(bandwidths=(0.08,), lambdas=(0.05,))
        study = run_study(spec, grid)
        # replicate 1 must equal a one-replicate study seeded 40 ^ 1
        solo = run_study(
            spec_for(n=16, n_test=10, replicate_count=1, noise_seed=41), grid
        )
        assert study.per_replicate[1] == solo.per_replicate[0]

    def test_means_and_standard_errors(self):
        spec = spec_for(n=16, n_test=10, replicate_count=3, noise_seed=5)
        grid = TuneGrid(bandwidths=(0.08,), lambdas=(0.05,))
        res = run_study(spec, grid)
        vals = [r.err_ours for r in res.per_replicate]
        assert_allclose(res.means["err_ours"], np.mean(vals), rtol=1e-14)
        assert_allclose(
            res.standard_errors["err_ours"],
            np.std(vals, ddof=1) / np.sqrt(3),
            rtol=1e-14,
        )
