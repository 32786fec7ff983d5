"""Experiment harness: genotype ingestion, synthetic phenotypes, sweeps and CSV output.

The harness sets ``x_bound`` and ``y_bound`` from the data it generates. That
is fine for synthetic or public data, but data-dependent bounds are not
differentially private in general; real deployments must supply bounds fixed
in advance through the library API.

Randomness is keyed so that experiments share as much as possible (common
random numbers): the design depends on ``(base_seed, n, d, trial)``, the
phenotypes additionally on column index only (the first l columns are the
same for every l), and the solver seed on ``(base_seed, n, d, trial)``. Two
mechanisms in the same trial therefore see the same data and the same
covariance noise.
"""

from __future__ import annotations

import csv
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from functools import lru_cache

import numpy as np

from .data import DesignMatrix, OutcomeMatrix
from .privacy import PrivacyBudget, stream
from .solvers import (
    Mechanism,
    SolverConfig,
    excess_loss,
    loss_ratio,
    naive_ssp_baseline,
    ols_reference,
    ols_ridge_solve,
    reuse_cov,
    subsample_reuse_cov,
)

DEFAULT_LAMBDA = 0.23
MECHANISM_NAMES = ("gauss", "proj", "naive", "none")

_TAG_DESIGN, _TAG_ROWS, _TAG_THETA, _TAG_NOISE, _TAG_SOLVER = 11, 12, 13, 14, 15


class DataError(ValueError):
    """Malformed input data (unparseable cell, ragged rows, impossible shapes)."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _is_number(tok):
    try:
        float(tok)
    except ValueError:
        return False
    return True


def load_genotype_matrix(path, delimiter=None) -> np.ndarray:
    """Read a rectangular numeric CSV/TSV (rows = individuals, columns = SNPs).

    The delimiter defaults to tab for ``.tsv``/``.txt`` files and comma
    otherwise. A first row containing any non-numeric cell is treated as a
    header and skipped.
    """
    path = str(path)
    if delimiter is None:
        delimiter = "\t" if path.endswith((".tsv", ".txt")) else ","
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: no data rows")
    first = 0
    if not all(_is_number(c) for c in rows[0]):
        first = 1
        if len(rows) == 1:
            raise DataError(f"{path}: header but no data rows")
    width = len(rows[first])
    out = np.empty((len(rows) - first, width))
    for i, row in enumerate(rows[first:]):
        line = i + first + 1
        if len(row) != width:
            raise DataError(f"{path}: line {line} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric value {cell!r} at line {line}, column {j + 1}") from None
    if not np.all(np.isfinite(out)):
        raise DataError(f"{path}: non-finite values")
    return out


def synthetic_haplotypes(n: int, m: int, rng: np.random.Generator, spectrum="neutral", maf=None) -> np.ndarray:
    """0/1 haplotype matrix (n haplotypes x m SNPs), every SNP polymorphic.

    ``spectrum="neutral"`` draws allele frequencies with density ~ 1/p on
    ``maf = (1/(2n), 0.5)``, the folded neutral site-frequency spectrum, so most
    SNPs are rare as in whole-genome panels. ``spectrum="uniform"`` draws them
    uniformly on ``maf = (0.05, 0.5)``. Monomorphic columns are redrawn.
    """
    if spectrum == "neutral":
        lo, hi = maf if maf is not None else (1.0 / (2 * n), 0.5)

        def freqs(k):
            return lo * (hi / lo) ** rng.uniform(size=k)
    elif spectrum == "uniform":
        lo, hi = maf if maf is not None else (0.05, 0.5)

        def freqs(k):
            return rng.uniform(lo, hi, size=k)
    else:
        raise ConfigError(f"unknown allele-frequency spectrum {spectrum!r}")
    if not 0 < lo <= hi <= 0.5:
        raise ConfigError(f"allele frequency range must lie in (0, 0.5], got {(lo, hi)}")

    h = np.empty((n, m))
    todo = np.arange(m)
    for _ in range(1000):
        h[:, todo] = rng.random((n, todo.size)) < freqs(todo.size)
        s = h[:, todo].sum(axis=0)
        todo = todo[(s == 0) | (s == n)]
        if todo.size == 0 or n == 1:
            return h
    raise DataError("could not draw polymorphic SNPs; allele frequencies too small for n")


def center_and_subsample_snps(x, d: int, rng: np.random.Generator) -> DesignMatrix:
    """Pick d SNP columns without replacement and center each at mean zero.

    ``x_bound`` becomes the largest row norm after centering.
    """
    x = np.asarray(x, dtype=float)
    if not 1 <= d <= x.shape[1]:
        raise DataError(f"cannot select d={d} SNPs out of {x.shape[1]}")
    cols = rng.choice(x.shape[1], size=d, replace=False)
    xs = x[:, cols]
    xs = xs - xs.mean(axis=0)
    return DesignMatrix(xs, float(np.linalg.norm(xs, axis=1).max()))


@dataclass(frozen=True)
class SyntheticSpec:
    n: int
    d: int
    l: int
    noise_std: float = 1.0
    theta_scale: float | None = None
    seed: int = 0

    def __post_init__(self):
        if min(self.n, self.d, self.l) < 1:
            raise ConfigError("n, d and l must be at least 1")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be nonnegative")
        if self.theta_scale is None:
            object.__setattr__(self, "theta_scale", self.d ** -0.25)


def generate_phenotypes(x: DesignMatrix, spec: SyntheticSpec, rng=None) -> OutcomeMatrix:
    """Column i of Y is ``X theta_i + noise`` with ``theta_i ~ N(0, theta_scale^2 I_d)``.

    With no ``rng`` the coefficients and the noise come from two streams
    derived from ``spec.seed`` and are drawn column by column, so the first
    l' columns do not depend on l. ``y_bound`` is the empirical max |y|.
    """
    if spec.d != x.d:
        raise ConfigError(f"spec.d={spec.d} but X has {x.d} columns")
    if spec.n != x.n:
        raise ConfigError(f"spec.n={spec.n} but X has {x.n} rows")
    theta_rng = rng if rng is not None else stream(spec.seed, _TAG_THETA)
    noise_rng = rng if rng is not None else stream(spec.seed, _TAG_NOISE)
    theta = spec.theta_scale * theta_rng.standard_normal((spec.l, spec.d)).T
    noise = spec.noise_std * noise_rng.standard_normal((spec.l, spec.n)).T
    y = x.x @ theta + noise
    return OutcomeMatrix(y, float(np.abs(y).max()))


@dataclass
class ExperimentRow:
    l: int
    d: int
    n: int
    s: int
    epsilon: float
    delta: float
    lam: float
    mechanism: str
    trial: int
    excess_loss: float
    loss_ratio: float
    runtime_ms: float
    seed: int
    status: str = "ok"


CSV_HEADER = [f.name if f.name != "lam" else "lambda" for f in fields(ExperimentRow)]
_INT_FIELDS = {"l", "d", "n", "s", "trial", "seed"}
_FLOAT_FIELDS = {"epsilon", "delta", "lam", "excess_loss", "loss_ratio", "runtime_ms"}


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def emit_csv(rows, path) -> None:
    """UTF-8, LF line endings, floats at 17 significant digits (exact round trip)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in rows:
            w.writerow([_fmt(v) for v in astuple(row)])


def read_csv(path) -> list[ExperimentRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise DataError(f"{path}: unexpected header {header}")
        out = []
        for rec in reader:
            vals = {}
            for f, cell in zip(fields(ExperimentRow), rec):
                if f.name in _INT_FIELDS:
                    vals[f.name] = int(cell)
                elif f.name in _FLOAT_FIELDS:
                    vals[f.name] = float(cell)
                else:
                    vals[f.name] = cell
            out.append(ExperimentRow(**vals))
    return out


@dataclass(frozen=True)
class Grid:
    """Cartesian experiment grid.

    ``ss`` holds covariance subsample sizes; ``None`` means the full data.
    ``delta`` is a float or ``"auto"`` for 1/n^2.
    """

    ns: tuple = (2000,)
    ds: tuple = (200,)
    ls: tuple = (16,)
    epsilons: tuple = (5.0,)
    mechanisms: tuple = ("gauss",)
    ss: tuple = (None,)
    delta: float | str = "auto"
    lam: float = DEFAULT_LAMBDA
    noise_std: float = 1.0

    def __post_init__(self):
        for m in self.mechanisms:
            if m not in MECHANISM_NAMES:
                raise ConfigError(f"unknown mechanism {m!r}; choose from {MECHANISM_NAMES}")
        if self.lam < 0:
            raise ConfigError("lambda must be nonnegative")
        if any(e <= 0 for e in self.epsilons):
            raise ConfigError("epsilon must be positive")
        if self.delta != "auto" and not 0 < float(self.delta) < 1:
            raise ConfigError("delta must be 'auto' or lie in (0, 1)")
        for n, s in itertools.product(self.ns, self.ss):
            if s is not None and not 1 <= s <= n:
                raise ConfigError(f"subsample size {s} outside [1, n={n}]")
        if any(v < 1 for v in (*self.ns, *self.ds, *self.ls)):
            raise ConfigError("n, d and l must be positive")

    def cells(self):
        """All grid cells in a fixed order; the index is the cell id."""
        return list(itertools.product(self.ns, self.ds, self.ls, self.ss, self.epsilons, self.mechanisms))

    def delta_for(self, n):
        return 1.0 / n**2 if self.delta == "auto" else float(self.delta)


def _seed_int(*keys) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


@lru_cache(maxsize=4)
def _synthetic_design(base_seed, n, d, trial):
    rng = stream(base_seed, _TAG_DESIGN, n, d, trial)
    return center_and_subsample_snps(synthetic_haplotypes(n, d, rng), d, rng)


def _design(base_seed, n, d, trial, genotypes=None):
    if genotypes is None:
        return _synthetic_design(base_seed, n, d, trial)
    if n > genotypes.shape[0]:
        raise DataError(f"n={n} exceeds the {genotypes.shape[0]} individuals in the genotype file")
    rows = np.sort(stream(base_seed, _TAG_ROWS, n, trial).choice(genotypes.shape[0], size=n, replace=False))
    return center_and_subsample_snps(genotypes[rows], d, stream(base_seed, _TAG_DESIGN, n, d, trial))


def _run_group(args):
    """All cells sharing (n, d, l) for one trial: data built once, each cell solved."""
    grid, base_seed, n, d, l, trial, members, timing, genotypes = args
    x = _design(base_seed, n, d, trial, genotypes)
    spec = SyntheticSpec(n=n, d=d, l=l, noise_std=grid.noise_std, seed=_seed_int(base_seed, n, d, trial))
    y = generate_phenotypes(x, spec)
    w_ols = ols_reference(x, y)
    solver_seed = _seed_int(base_seed, _TAG_SOLVER, n, d, trial)
    delta = grid.delta_for(n)

    rows = []
    for cell_idx, (s, eps, mech) in members:
        s_eff = n if s is None else s
        status = "ok"
        t0 = time.perf_counter()
        try:
            budget = PrivacyBudget(eps, delta)
            if mech == "none":
                w = ols_ridge_solve(x, y, grid.lam)
            elif mech == "naive":
                w = naive_ssp_baseline(x, y, grid.lam, budget, seed=solver_seed).w_hat
            else:
                cfg = SolverConfig(grid.lam, budget, Mechanism.parse(mech), s_eff, solver_seed)
                solver = reuse_cov if s_eff == n else subsample_reuse_cov
                w = solver(x, y, cfg).w_hat
            elapsed = (time.perf_counter() - t0) * 1e3
            ex, ratio = excess_loss(x, y, w, w_ols), loss_ratio(x, y, w, w_ols)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as err:
            elapsed = (time.perf_counter() - t0) * 1e3
            ex = ratio = math.nan
            status = f"error:{type(err).__name__}"
        rows.append(
            (
                cell_idx,
                ExperimentRow(
                    l=l, d=d, n=n, s=s_eff, epsilon=float(eps), delta=float(delta), lam=float(grid.lam),
                    mechanism=mech, trial=trial, excess_loss=float(ex), loss_ratio=float(ratio),
                    runtime_ms=float(elapsed) if timing else math.nan, seed=solver_seed, status=status,
                ),
            )
        )
    return rows


def run_sweep(grid: Grid, trials: int, base_seed: int, workers: int = 1, timing: bool = False,
              genotypes=None) -> list[ExperimentRow]:
    """One row per (cell, trial), sorted by (cell index, trial).

    ``runtime_ms`` is NaN unless ``timing`` is set, which keeps the output a
    pure function of the configuration. ``genotypes`` is an optional raw
    haplotype matrix (individuals x SNPs) to sample designs from instead of
    synthetic haplotypes.
    """
    if trials < 0:
        raise ConfigError("trials must be nonnegative")
    cells = grid.cells()
    if genotypes is not None:
        genotypes = np.asarray(genotypes, dtype=float)

    groups = {}
    for idx, (n, d, l, s, eps, mech) in enumerate(cells):
        groups.setdefault((n, d, l), []).append((idx, (s, eps, mech)))
    jobs = [
        (grid, base_seed, n, d, l, trial, members, timing, genotypes)
        for (n, d, l), members in groups.items()
        for trial in range(trials)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_group, jobs))
    else:
        results = [_run_group(job) for job in jobs]

    tagged = [item for batch in results for item in batch]
    tagged.sort(key=lambda item: (item[0], item[1].trial))
    return [row for _, row in tagged]
