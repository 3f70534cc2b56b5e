"""Monte Carlo harness for Lasso (BIC) and MIDAS on the simulated
AR-plus-covariates designs: parameter errors, one-step forecast errors and
the emitted result tables."""
from __future__ import annotations

import csv
import io
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .core import InvalidInputError, RegressionProblem
from .dgp import Innovation, ModelId, T_DF, block_sizes, simulate_dataset
from .lasso import fit_path_bic
from .midas import MidasOptions, fit_midas, simulation_init

ESTIMATORS = ("lasso_bic", "midas")
ESTIMATION_METRICS = ("AE", "RMSE")
FORECAST_METRICS = ("AFE", "RMSFE")


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid and settings of one Monte Carlo study.

    ``standardize`` scales design columns to unit root-mean-square before
    the Lasso path and maps coefficients back afterwards.  ``unit_variance_t``
    rescales the t innovations to variance one.
    """

    model_ids: tuple = ("M1",)
    ns: tuple = (50, 100, 200)
    ps: tuple = (100,)
    ss: tuple = (5,)
    mc_reps: int = 200
    holdout: int = 10
    seed: int = 2024
    estimators: tuple = ESTIMATORS
    standardize: bool = True
    unit_variance_t: bool = True
    grid_size: int = 100
    min_ratio: float = 1e-4
    max_df: Optional[int] = None
    midas_covered: int = 100
    midas_max_iter: int = 200
    burn_in: int = 500

    def __post_init__(self):
        for name in ("model_ids", "ns", "ps", "ss", "estimators"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "model_ids", tuple(ModelId(m).value for m in self.model_ids))
        if self.mc_reps < 1:
            raise InvalidInputError("mc_reps must be >= 1")
        if self.holdout < 1:
            raise InvalidInputError("holdout must be >= 1")
        if not (self.ns and self.ps and self.ss and self.estimators):
            raise InvalidInputError("grid and estimator lists must be non-empty")
        if min(self.ns + self.ps + self.ss) < 1:
            raise InvalidInputError("grid values must be positive")
        for p in self.ps:
            block_sizes(p)
        for s in self.ss:
            if s not in (5, 10, 20):
                raise InvalidInputError(f"s must be one of 5, 10, 20, got {s}")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad:
            raise InvalidInputError(f"unknown estimators {sorted(bad)}; choose from {ESTIMATORS}")
        if "midas" in self.estimators and min(self.ps) < self.midas_covered:
            raise InvalidInputError(f"MIDAS covers the first {self.midas_covered} covariates; every p must be >= that")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise InvalidInputError(f"unknown experiment settings {sorted(extra)}")
        return cls(**d)

    def cells(self) -> list:
        return [(m, n, p, s) for m in self.model_ids for p in self.ps for s in self.ss for n in self.ns]


@dataclass(frozen=True)
class MetricsRow:
    model_id: str
    estimator: str
    n: int
    p: int
    s: int
    AE: float
    RMSE: float
    AFE: float
    RMSFE: float
    stderr: dict
    n_ok: int
    n_failed: int


@dataclass(frozen=True)
class ReplicateRecord:
    model_id: str
    estimator: str
    n: int
    p: int
    s: int
    replicate: int
    status: str
    abs_err: float = float("nan")
    sq_err: float = float("nan")
    fc_abs: float = float("nan")
    fc_sq: float = float("nan")
    converged: bool = False
    detail: str = ""


def _err_matrix(estimates, truth) -> np.ndarray:
    truth = np.asarray(truth, dtype=np.float64).ravel()
    E = np.atleast_2d(np.asarray(estimates, dtype=np.float64))
    if E.ndim != 2 or E.shape[1] != truth.size:
        raise InvalidInputError(f"estimates must have {truth.size} entries (phi plus p slopes), got {E.shape}")
    return E - truth


def estimation_metrics(estimates, truth) -> tuple[float, float]:
    """``AE = mean_r |theta_r - theta|_1 / (p+1)`` and
    ``RMSE = sqrt(mean_r |theta_r - theta|_2^2 / (p+1))`` over replicates,
    where ``theta = (phi, beta)``."""
    D = _err_matrix(estimates, truth)
    k = D.shape[1]
    return float(np.abs(D).sum(1).mean() / k), float(np.sqrt((D ** 2).sum(1).mean() / k))


def forecast_metrics(forecasts, actuals, h: int = 10) -> tuple[float, float]:
    """Mean absolute and root mean squared one-step forecast errors; each
    replicate contributes a row of ``h`` forecasts."""
    F = np.atleast_2d(np.asarray(forecasts, dtype=np.float64))
    A = np.atleast_2d(np.asarray(actuals, dtype=np.float64))
    if F.shape != A.shape or F.shape[1] != h:
        raise InvalidInputError(f"need matching (reps, {h}) forecasts and actuals, got {F.shape} and {A.shape}")
    if not (np.all(np.isfinite(F)) and np.all(np.isfinite(A))):
        raise InvalidInputError("forecasts contain missing values")
    e = F - A
    return float(np.abs(e).mean()), float(np.sqrt((e ** 2).mean()))


def _lasso_estimate(problem: RegressionProblem, cfg: ExperimentConfig):
    X = problem.X
    scale = np.sqrt((X ** 2).mean(0)) if cfg.standardize else np.ones(X.shape[1])
    scale[scale == 0] = 1.0
    path = fit_path_bic(RegressionProblem(problem.y, X / scale), cfg.grid_size, min_ratio=cfg.min_ratio,
                        max_df=cfg.max_df)
    fit = path.selected
    return fit.coef / scale, fit.converged


def _midas_estimate(ds, cfg: ExperimentConfig):
    problem = ds.train()
    init = simulation_init(ds.phi, ds.beta.beta, ds.s, cfg.midas_covered)
    fit = fit_midas(problem, init, MidasOptions(max_iter=cfg.midas_max_iter))
    return fit.model.coefficients(problem.p), fit.converged


def run_replicate(cfg: ExperimentConfig, cell, replicate: int) -> list:
    """All estimators on one simulated dataset."""
    model_id, n, p, s = cell
    innovation = Innovation("t", T_DF, standardize=cfg.unit_variance_t)
    out = []
    try:
        ds = simulate_dataset(model_id, n, p, s, cfg.seed, replicate=replicate, holdout=cfg.holdout,
                              burn_in=cfg.burn_in, innovation=innovation)
    except Exception as exc:  # recorded, never dropped
        return [ReplicateRecord(model_id, e, n, p, s, replicate, "failed", detail=f"simulate: {exc}")
                for e in cfg.estimators]
    Zt, yt = ds.test()
    for est in cfg.estimators:
        try:
            if est == "lasso_bic":
                theta, conv = _lasso_estimate(ds.train(), cfg)
            else:
                theta, conv = _midas_estimate(ds, cfg)
            d = theta - ds.truth
            fe = Zt @ theta - yt
            if not (np.all(np.isfinite(d)) and np.all(np.isfinite(fe))):
                raise FloatingPointError("non-finite estimate")
            out.append(ReplicateRecord(model_id, est, n, p, s, replicate, "ok", float(np.abs(d).sum()),
                                       float(d @ d), float(np.abs(fe).sum()), float(fe @ fe), bool(conv)))
        except Exception as exc:
            out.append(ReplicateRecord(model_id, est, n, p, s, replicate, "failed", detail=f"{type(exc).__name__}: {exc}"))
    return out


def _replicate_task(args):
    return run_replicate(*args)


def _summarize(cfg, cell, est, recs) -> MetricsRow:
    model_id, n, p, s = cell
    ok = [r for r in recs if r.status == "ok"]
    k, h = p + 1, cfg.holdout
    nan = float("nan")
    if not ok:
        return MetricsRow(model_id, est, n, p, s, nan, nan, nan, nan, {m: nan for m in ESTIMATION_METRICS + FORECAST_METRICS},
                          0, len(recs))
    a = np.array([r.abs_err for r in ok]) / k
    q = np.array([r.sq_err for r in ok]) / k
    fa = np.array([r.fc_abs for r in ok]) / h
    fq = np.array([r.fc_sq for r in ok]) / h
    m = len(ok)

    def se(v):
        return float(v.std(ddof=1) / np.sqrt(m)) if m > 1 else nan

    rmse, rmsfe = float(np.sqrt(q.mean())), float(np.sqrt(fq.mean()))
    # Delta method for the square-root metrics.
    stderr = {"AE": se(a), "RMSE": se(q) / (2 * rmse) if rmse > 0 else nan,
              "AFE": se(fa), "RMSFE": se(fq) / (2 * rmsfe) if rmsfe > 0 else nan}
    return MetricsRow(model_id, est, n, p, s, float(a.mean()), rmse, float(fa.mean()), rmsfe, stderr, m, len(recs) - m)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    records: list = field(repr=False)

    def row(self, model_id, estimator, n, p, s) -> MetricsRow:
        for r in self.rows:
            if (r.model_id, r.estimator, r.n, r.p, r.s) == (ModelId(model_id).value, estimator, n, p, s):
                return r
        raise KeyError((model_id, estimator, n, p, s))

    def table_csv(self, metrics: Sequence[str]) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "estimator", "n", "p", "s", "metric", "value", "stderr"])
        for r in self.rows:
            for m in metrics:
                w.writerow([r.model_id, r.estimator, r.n, r.p, r.s, m, repr(getattr(r, m)), repr(r.stderr[m])])
        return buf.getvalue()

    def log_csv(self) -> str:
        buf = io.StringIO()
        names = list(ReplicateRecord.__dataclass_fields__)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for r in self.records:
            w.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, k) for k in names)])
        return buf.getvalue()

    def text_table(self) -> str:
        """Aligned table, metrics in units of 1e-2, one line per cell and
        estimator."""
        head = f"{'model':<6}{'n':>5}{'p':>5}{'s':>4}  {'estimator':<10}" + "".join(f"{m:>10}" for m in
                                                                                     ESTIMATION_METRICS + FORECAST_METRICS) + f"{'ok':>6}{'failed':>7}"
        lines = ["values x 1e-2", head, "-" * len(head)]
        for r in self.rows:
            vals = "".join(f"{100 * getattr(r, m):>10.3f}" for m in ESTIMATION_METRICS + FORECAST_METRICS)
            lines.append(f"{r.model_id:<6}{r.n:>5}{r.p:>5}{r.s:>4}  {r.estimator:<10}{vals}{r.n_ok:>6}{r.n_failed:>7}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> list:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {"estimation.csv": self.table_csv(ESTIMATION_METRICS), "forecast.csv": self.table_csv(FORECAST_METRICS),
                 "tables.txt": self.text_table(), "replicates.csv": self.log_csv()}
        for name, text in files.items():
            (out / name).write_text(text)
        return [out / k for k in files]


def run_experiment(cfg: ExperimentConfig, threads: int = 1,
                   progress: Optional[Callable[[str], None]] = None) -> ExperimentResult:
    """Run every cell of the grid.

    Replicate ``r`` of a cell always uses the same random streams, and the
    results are merged in replicate order, so the output does not depend on
    ``threads``.
    """
    if threads < 1:
        raise InvalidInputError("threads must be >= 1")
    rows, records = [], []
    for cell in cfg.cells():
        tasks = [(cfg, cell, r) for r in range(cfg.mc_reps)]
        if threads == 1:
            batches = [_replicate_task(t) for t in tasks]
        else:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                batches = list(pool.map(_replicate_task, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
        cell_recs = [rec for b in batches for rec in b]
        records.extend(cell_recs)
        for est in cfg.estimators:
            row = _summarize(cfg, cell, est, [r for r in cell_recs if r.estimator == est])
            rows.append(row)
            if progress:
                progress(f"{cell[0]} n={cell[1]} p={cell[2]} s={cell[3]} {est}: AE={row.AE:.4g} "
                         f"RMSFE={row.RMSFE:.4g} ok={row.n_ok} failed={row.n_failed}")
    return ExperimentResult(cfg, rows, records)


def stderr_progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def sign_recovery_rate(n: int, reps: int, p: int = 50, s: int = 3, ar: float = 0.5, garch=(0.1, 0.1, 0.8),
                       c: float = 1.5, beta_min: float = 1.0, seed: int = 0) -> float:
    """Share of replicates in which the Lasso recovers the sign pattern.

    Covariates are independent unit-variance AR(1) series (population
    ``Sigma = I``, irrepresentable value 0), errors are GARCH(1,1), the
    relevant slopes alternate ``+-beta_min`` and ``lam = c sqrt(2 n log p)``.
    """
    from .conditions import sign_consistency
    from .core import seed_stream
    from .dgp import ProcessSpec, simulate_garch11, simulate_var
    from .lasso import fit_lasso

    if not 1 <= s < p:
        raise InvalidInputError("need 1 <= s < p")
    beta = np.zeros(p)
    beta[:s] = beta_min * (-1.0) ** np.arange(s)
    spec = ProcessSpec("VAR", coefs=(ar * np.eye(p),))
    lam = c * np.sqrt(2 * n * np.log(p))
    hits = 0
    for r in range(reps):
        X = simulate_var(spec, n, rng=seed_stream(seed, 31, n, r, 1)) * np.sqrt(1 - ar ** 2)
        e = simulate_garch11(garch, n, rng=seed_stream(seed, 31, n, r, 2))
        fit = fit_lasso(RegressionProblem(X @ beta + e, X), lam)
        hits += sign_consistency(fit, beta)
    return hits / reps
