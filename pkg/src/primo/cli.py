"""Command line entry point: ``primo simulate | sweep-subsample | fit``.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .data import DesignMatrix, OutcomeMatrix
from .harness import (
    DEFAULT_LAMBDA,
    ConfigError,
    DataError,
    Grid,
    emit_csv,
    load_genotype_matrix,
    run_sweep,
)
from .privacy import PrivacyBudget
from .solvers import Mechanism, SolverConfig, naive_ssp_baseline, ols_ridge_solve, reuse_cov, subsample_reuse_cov

EXIT_CONFIG = 2
EXIT_DATA = 3

log = logging.getLogger("primo")


def _int_list(text):
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _mech_list(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _delta(text):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("delta must be a number or 'auto'") from None


def _add_common(p):
    p.add_argument("--n", type=_int_list, default=(2000,), help="number of individuals (comma list)")
    p.add_argument("--d", type=_int_list, default=(200,), help="number of SNPs (comma list)")
    p.add_argument("--eps", type=_float_list, default=(5.0,), help="total epsilon (comma list)")
    p.add_argument("--delta", type=_delta, default="auto", help="total delta, or 'auto' for 1/n^2")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA, help="ridge parameter")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0, help="base seed; the whole CSV is a function of it")
    p.add_argument("--noise-std", type=float, default=1.0, help="phenotype noise standard deviation")
    p.add_argument("--geno", help="optional genotype CSV/TSV to draw designs from instead of synthetic data")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock runtime_ms (makes the CSV non-reproducible)")
    p.add_argument("--out", required=True, help="output CSV path")


def build_parser():
    parser = argparse.ArgumentParser(prog="primo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="error-vs-l sweep on synthetic phenotypes")
    _add_common(sim)
    sim.add_argument("--l", type=_int_list, default=(16, 256, 1024), help="number of outcomes (comma list)")
    sim.add_argument("--mech", type=_mech_list, default=("gauss", "proj", "naive"),
                     help="comma list of gauss, proj, naive, none")
    sim.add_argument("--s", type=_int_list, default=None, help="covariance subsample sizes (comma list)")

    sub_s = sub.add_parser("sweep-subsample", help="error vs covariance subsample size")
    _add_common(sub_s)
    sub_s.add_argument("--s", type=_int_list, required=True, help="subsample sizes (comma list)")
    sub_s.add_argument("--l", type=_int_list, default=(16,))
    sub_s.add_argument("--mech", type=_mech_list, default=("gauss",))

    fit = sub.add_parser("fit", help="fit private coefficients on user data")
    fit.add_argument("--x", required=True, help="design matrix CSV/TSV (rows = individuals)")
    fit.add_argument("--y", required=True, help="outcome matrix CSV/TSV (rows = individuals)")
    fit.add_argument("--eps", type=float, required=True)
    fit.add_argument("--delta", type=float, required=True)
    fit.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    fit.add_argument("--mech", default="proj", choices=["gauss", "proj", "naive", "none"])
    fit.add_argument("--x-bound", type=float, required=True, help="row l2 bound on X (rows are clipped)")
    fit.add_argument("--y-bound", type=float, required=True, help="entry bound on Y (entries are clipped)")
    fit.add_argument("--s", type=int, default=None, help="optional covariance subsample size")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out", required=True, help="output CSV for the d x l coefficient matrix")
    return parser


def _grid_from_args(args, ss):
    return Grid(
        ns=args.n, ds=args.d, ls=args.l, epsilons=args.eps, mechanisms=args.mech, ss=ss,
        delta=args.delta, lam=args.lam, noise_std=args.noise_std,
    )


def _sweep(args, ss):
    if args.trials < 0 or args.workers < 1:
        raise ConfigError("--trials must be >= 0 and --workers >= 1")
    grid = _grid_from_args(args, ss)
    geno = load_genotype_matrix(args.geno) if args.geno else None
    rows = run_sweep(grid, args.trials, args.seed, workers=args.workers, timing=args.timing, genotypes=geno)
    emit_csv(rows, args.out)
    failed = sum(r.status != "ok" for r in rows)
    log.info("wrote %d rows to %s (%d failed)", len(rows), args.out, failed)


def _fit(args):
    x_raw = load_genotype_matrix(args.x)
    y_raw = load_genotype_matrix(args.y)
    if x_raw.shape[0] != y_raw.shape[0]:
        raise DataError(f"X has {x_raw.shape[0]} rows but Y has {y_raw.shape[0]}")
    try:
        x = DesignMatrix(x_raw, args.x_bound)
        y = OutcomeMatrix(y_raw, args.y_bound)
        budget = PrivacyBudget(args.eps, args.delta)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    if args.s is not None and not 1 <= args.s <= x.n:
        raise ConfigError(f"--s must lie in [1, {x.n}]")

    if args.mech == "none":
        w = ols_ridge_solve(x, y, args.lam)
    elif args.mech == "naive":
        w = naive_ssp_baseline(x, y, args.lam, budget, seed=args.seed).w_hat
    else:
        cfg = SolverConfig(args.lam, budget, Mechanism.parse(args.mech), args.s, args.seed)
        sol = subsample_reuse_cov(x, y, cfg) if args.s is not None else reuse_cov(x, y, cfg)
        log.info("sigma_cov=%.6g assoc_scale=%.6g", sol.sigma_cov, sol.sigma_assoc_or_r)
        w = sol.w_hat
    np.savetxt(args.out, w, delimiter=",", fmt="%.17g")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "simulate":
            _sweep(args, args.s if args.s else (None,))
        elif args.command == "sweep-subsample":
            _sweep(args, args.s)
        else:
            _fit(args)
    except DataError as err:
        print(f"primo: data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ValueError) as err:
        print(f"primo: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"primo: {err}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
