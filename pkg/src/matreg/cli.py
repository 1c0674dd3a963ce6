"""Command-line surface: fit, tune, simulate, cv and slidecov subcommands.

Every successful run writes a RunReport JSON document that echoes the
command, all configuration (grids, seeds, format version) and the results,
so rerunning the echoed command reproduces the report byte for byte.

Exit codes:
    0  success
    2  unknown flag or malformed command line (argparse)
    3  file problems: missing path, bad magic, truncation, non-finite data
    4  degenerate data: empty kernel neighborhood, zero-residual fit,
       tied spectra in strict mode, exhausted tuning grid
    5  numerical failure (SVD non-convergence)
    6  invalid argument values outside the parser's reach
"""

import argparse
import json
import os
import sys

import numpy as np

from .data import Dataset
from .dataio import read_stack, sliding_covariance, write_matrix_csv, write_stack
from .errors import (
    ConvergenceError,
    DegenerateFitError,
    DegenerateNeighborhoodError,
    DegenerateSpectrumError,
    EvaluationError,
    ExhaustedGridError,
    MatregError,
    StackFormatError,
)
from .estimators import FitConfig, fit_path
from .kernels import KernelSpec
from .simulation import ShapeSpec, SimSpec, default_study_grid, run_study
from .tuning import TuneGrid, loocv, tune

FORMAT_VERSION = 1

EXIT_FILE = 3
EXIT_DEGENERATE = 4
EXIT_NUMERIC = 5
EXIT_BADARG = 6


def _float_list(text):
    try:
        return tuple(float(v) for v in text.split(",") if v != "")
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad numeric list {text!r}: {exc}")


def _report(args, config, results):
    return {
        "format_version": FORMAT_VERSION,
        "command": ["matreg"] + list(args),
        "config": config,
        "results": results,
    }


def _emit(report, path):
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_eval_points(value, dim):
    """Evaluation points from a file path or an inline grid.

    Inline syntax: points separated by ';', coordinates by ','. A file is
    parsed with one whitespace/comma separated covariate vector per line.
    """
    if os.path.exists(value):
        with open(value) as fh:
            head = fh.read(2048)
        pts = np.loadtxt(value, delimiter="," if "," in head else None)
    else:
        rows = [r for r in value.split(";") if r.strip()]
        pts = np.array([[float(c) for c in row.split(",")] for row in rows])
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    if pts.shape[0] == 1 and pts.shape[1] != dim and dim == 1:
        pts = pts.reshape(-1, 1)
    if pts.shape[1] != dim:
        raise ValueError(
            f"evaluation points have {pts.shape[1]} coordinates, data has {dim}"
        )
    return pts


def _grid_from_args(ns, data=None, spec=None):
    if ns.grid_h and ns.grid_lambda:
        return TuneGrid(bandwidths=ns.grid_h, lambdas=ns.grid_lambda)
    if spec is not None:
        base = default_study_grid(spec)
    else:
        from .tuning import default_grid

        base = default_grid(data)
    return TuneGrid(
        bandwidths=ns.grid_h or base.bandwidths,
        lambdas=ns.grid_lambda or base.lambdas,
    )


def _fit_summaries(fits):
    return [
        {
            "rank": f.rank,
            "effective_tau": f.effective_tau,
            "weight_sum": f.weight_sum,
            "objective": f.objective,
            "singular_values": [float(v) for v in f.singular_values],
        }
        for f in fits
    ]


def _cmd_fit(ns, argv):
    data = read_stack(ns.input)
    if ns.lam is not None and ns.tau is not None:
        raise ValueError("--lambda and --tau are mutually exclusive")
    kernel = KernelSpec(bandwidth=ns.bandwidth, dim=data.s, family=ns.kernel)
    cfg = FitConfig(
        kernel=kernel,
        lam=ns.lam if ns.lam is not None else 0.0,
        penalty=ns.penalty,
        tau=ns.tau,
    )
    pts = _load_eval_points(ns.eval_points, data.s)
    fits = fit_path(data, cfg, pts)
    csv_paths = []
    if ns.output:
        stem = os.path.splitext(ns.output)[0]
        for i, f in enumerate(fits):
            path = f"{stem}_point_{i:04d}.csv"
            write_matrix_csv(f.estimate, path)
            csv_paths.append(path)
    config = {
        "input": ns.input,
        "kernel": ns.kernel,
        "bandwidth": ns.bandwidth,
        "lambda": ns.lam,
        "tau": ns.tau,
        "penalty": ns.penalty,
        "eval_points": [[float(c) for c in p] for p in pts],
    }
    results = {"fits": _fit_summaries(fits), "matrix_csv": csv_paths}
    _emit(_report(argv, config, results), ns.output)
    return 0


def _cmd_tune(ns, argv):
    data = read_stack(ns.input)
    grid = _grid_from_args(ns, data=data)
    report = tune(data, grid, penalty=ns.penalty, kernel_family=ns.kernel)
    config = {
        "input": ns.input,
        "kernel": ns.kernel,
        "penalty": ns.penalty,
        "grid_h": list(grid.bandwidths),
        "grid_lambda": list(grid.lambdas),
    }
    results = {
        "entries": [vars(e) for e in report.entries],
        "selected": report.selected,
        "best": vars(report.best),
        "failures": [list(f) for f in report.failures],
    }
    _emit(_report(argv, config, results), ns.output)
    return 0


def _cmd_simulate(ns, argv):
    shape = ShapeSpec(kind=ns.shape, size=ns.size)
    spec = SimSpec(
        setting=ns.setting,
        shape=shape,
        n_train=ns.n,
        n_test=ns.n_test,
        noise_seed=ns.seed,
        replicate_count=ns.replicates,
        noise_scale=ns.noise_scale,
    )
    grid = _grid_from_args(ns, spec=spec)
    result = run_study(spec, grid)
    if ns.csv:
        with open(ns.csv, "w", encoding="utf-8") as fh:
            fh.write("replicate,err_ours,err_nw,err_lasso,avg_rank\n")
            for i, r in enumerate(result.per_replicate):
                fh.write(
                    f"{i},{r.err_ours:.17g},{r.err_nw:.17g},"
                    f"{r.err_lasso:.17g},{r.avg_selected_rank:.17g}\n"
                )
    config = {
        "setting": ns.setting,
        "shape": ns.shape,
        "size": ns.size,
        "n": ns.n,
        "n_test": ns.n_test,
        "replicates": ns.replicates,
        "seed": ns.seed,
        "noise_scale": ns.noise_scale,
        "grid_h": list(grid.bandwidths),
        "grid_lambda": list(grid.lambdas),
    }
    _emit(_report(argv, config, result.to_dict()), ns.output)
    return 0


def _cmd_cv(ns, argv):
    data = read_stack(ns.input)
    fixed = ns.bandwidth is not None and ns.lam is not None
    grid = None if fixed else _grid_from_args(ns, data=data)
    result = loocv(
        data,
        grid=grid,
        penalty=ns.penalty,
        mode=ns.mode,
        bandwidth=ns.bandwidth,
        lam=ns.lam,
        kernel_family=ns.kernel,
    )
    config = {
        "input": ns.input,
        "kernel": ns.kernel,
        "penalty": ns.penalty,
        "mode": ns.mode,
        "bandwidth": ns.bandwidth,
        "lambda": ns.lam,
        "grid_h": list(grid.bandwidths) if grid else None,
        "grid_lambda": list(grid.lambdas) if grid else None,
    }
    results = {
        "per_sample_errors": list(result.per_sample_errors),
        "mean": result.mean,
        "sd": result.sd,
        "selected": [list(s) for s in result.selected],
    }
    _emit(_report(argv, config, results), ns.output)
    return 0


def _cmd_slidecov(ns, argv):
    if not os.path.exists(ns.input):
        raise FileNotFoundError(ns.input)
    if ns.input.endswith(".npy"):
        series = np.load(ns.input)
    else:
        with open(ns.input) as fh:
            head = fh.read(2048)
        series = np.loadtxt(ns.input, delimiter="," if "," in head else None)
    data = sliding_covariance(series, window=ns.window, stride=ns.stride)
    write_stack(data, ns.stack_out)
    config = {
        "input": ns.input,
        "window": ns.window,
        "stride": ns.stride,
        "stack_out": ns.stack_out,
    }
    results = {"n_windows": data.n, "matrix_dim": data.p}
    _emit(_report(argv, config, results), ns.output)
    return 0


def _add_common(sub):
    sub.add_argument("--output", help="write the RunReport JSON here (default: stdout)")
    sub.add_argument("--kernel", choices=["gaussian", "epanechnikov"], default="gaussian")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="matreg",
        description="Kernel-smoothed matrix-response regression toolkit.",
        epilog=(
            "exit codes: 0 ok; 2 bad usage; 3 file/parse error; "
            "4 degenerate data (empty neighborhood, zero rss, tied spectra, "
            "exhausted grid); 5 numerical non-convergence; 6 invalid argument"
        ),
    )
    subs = parser.add_subparsers(dest="command", required=True)

    fit = subs.add_parser("fit", help="evaluate one estimator at given points")
    fit.add_argument("--input", required=True, help="stack file with the training data")
    fit.add_argument("--bandwidth", type=float, required=True)
    fit.add_argument("--lambda", dest="lam", type=float, default=None,
                     help="regularization level on the objective scale")
    fit.add_argument("--tau", type=float, default=None,
                     help="fixed shrinkage threshold (alternative to --lambda)")
    fit.add_argument("--penalty", choices=["none", "nuclear", "lasso"], default="nuclear")
    fit.add_argument("--eval-points", required=True,
                     help="file of covariates, or inline 'x1,x2;x3,x4' grid")
    _add_common(fit)
    fit.set_defaults(func=_cmd_fit)

    tn = subs.add_parser("tune", help="BIC grid search over (h, lambda)")
    tn.add_argument("--input", required=True)
    tn.add_argument("--penalty", choices=["none", "nuclear", "lasso"], default="nuclear")
    tn.add_argument("--grid-h", type=_float_list, default=None)
    tn.add_argument("--grid-lambda", type=_float_list, default=None)
    _add_common(tn)
    tn.set_defaults(func=_cmd_tune)

    sim = subs.add_parser("simulate", help="run a Monte Carlo study")
    sim.add_argument("--setting", choices=["I", "II", "III", "IV"], required=True)
    sim.add_argument("--shape", choices=["cross", "square", "tshape"], required=True)
    sim.add_argument("--size", type=int, default=64, help="image side length")
    sim.add_argument("--n", type=int, required=True, help="training sample size")
    sim.add_argument("--n-test", type=int, default=500)
    sim.add_argument("--replicates", type=int, default=1)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--noise-scale", type=float, default=1.0)
    sim.add_argument("--grid-h", type=_float_list, default=None)
    sim.add_argument("--grid-lambda", type=_float_list, default=None)
    sim.add_argument("--csv", help="also write per-replicate metrics as CSV")
    _add_common(sim)
    sim.set_defaults(func=_cmd_simulate)

    cv = subs.add_parser("cv", help="leave-one-out cross-validation")
    cv.add_argument("--input", required=True)
    cv.add_argument("--penalty", choices=["none", "nuclear", "lasso"], default="nuclear")
    cv.add_argument("--mode", choices=["fixed", "retune"], default="fixed")
    cv.add_argument("--bandwidth", type=float, default=None)
    cv.add_argument("--lambda", dest="lam", type=float, default=None)
    cv.add_argument("--grid-h", type=_float_list, default=None)
    cv.add_argument("--grid-lambda", type=_float_list, default=None)
    _add_common(cv)
    cv.set_defaults(func=_cmd_cv)

    sl = subs.add_parser("slidecov", help="sliding-window covariance transform")
    sl.add_argument("--input", required=True, help="T x d series (.npy, CSV or text)")
    sl.add_argument("--window", type=int, required=True)
    sl.add_argument("--stride", type=int, default=1)
    sl.add_argument("--stack-out", required=True, help="stack file to write")
    _add_common(sl)
    sl.set_defaults(func=_cmd_slidecov)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns, argv)
    except (FileNotFoundError, OSError, StackFormatError) as exc:
        _fail(exc)
        return EXIT_FILE
    except (
        DegenerateNeighborhoodError,
        DegenerateFitError,
        DegenerateSpectrumError,
        ExhaustedGridError,
        EvaluationError,
    ) as exc:
        _fail(exc)
        return EXIT_DEGENERATE
    except ConvergenceError as exc:
        _fail(exc)
        return EXIT_NUMERIC
    except (ValueError, MatregError) as exc:
        _fail(exc)
        return EXIT_BADARG


def _fail(exc):
    doc = {"error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")


if __name__ == "__main__":
    sys.exit(main())
