"""Lasso by cyclic coordinate descent, BIC-tuned regularization paths and
KKT certificates.

The objective is the un-normalized

    (1/2) |y - X beta|_2^2 + lam * |beta|_1

so the natural scale of ``lam`` grows with ``n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np

from .core import Coefficients, InvalidInputError, RegressionProblem


@dataclass(frozen=True)
class SolverOptions:
    """Coordinate-descent controls.

    ``tolerance`` bounds both the KKT residual of a converged fit and the
    per-sweep change of every coordinate's gradient (``|x_j|^2 |d beta_j|``),
    relative to ``max(1, |beta|_inf)``.
    """

    tolerance: float = 1e-8
    max_sweeps: int = 100_000
    fit_intercept: bool = False

    def __post_init__(self):
        if not self.tolerance > 0:
            raise InvalidInputError("tolerance must be positive")
        if self.max_sweeps < 1:
            raise InvalidInputError("max_sweeps must be >= 1")


@dataclass(frozen=True)
class LassoFit:
    beta: Coefficients
    lam: float
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    intercept: float = 0.0
    centered: bool = False

    @property
    def coef(self) -> np.ndarray:
        return self.beta.beta

    @property
    def support(self) -> tuple[int, ...]:
        return self.beta.support

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.coef + self.intercept


@dataclass(frozen=True)
class LassoPath:
    lambdas: np.ndarray
    fits: list
    selected_index: int
    bic: np.ndarray = field(repr=False)

    @property
    def selected(self) -> LassoFit:
        return self.fits[self.selected_index]


def soft_threshold(z: float, t: float) -> float:
    """``sign(z) * max(|z| - t, 0)``."""
    if t < 0:
        raise InvalidInputError("threshold must be nonnegative")
    return math.copysign(max(abs(z) - t, 0.0), z) if abs(z) > t else 0.0


@numba.njit(cache=True)
def _sweep(X, r, beta, col_sq, lam, coords):
    # One pass of exact coordinate minimization; r = y - X beta is kept current.
    n = X.shape[0]
    worst = 0.0
    for c in coords:
        d = col_sq[c]
        if d == 0.0:
            continue
        old = beta[c]
        g = 0.0
        for i in range(n):
            g += X[i, c] * r[i]
        z = g + d * old
        if z > lam:
            new = (z - lam) / d
        elif z < -lam:
            new = (z + lam) / d
        else:
            new = 0.0
        delta = new - old
        if delta != 0.0:
            for i in range(n):
                r[i] -= X[i, c] * delta
            beta[c] = new
            ch = d * abs(delta)
            if ch > worst:
                worst = ch
    return worst


@numba.njit(cache=True)
def _kkt(X, r, beta, lam):
    n, p = X.shape
    worst = 0.0
    for j in range(p):
        g = 0.0
        for i in range(n):
            g += X[i, j] * r[i]
        b = beta[j]
        if b > 0.0:
            v = abs(g - lam)
        elif b < 0.0:
            v = abs(g + lam)
        else:
            v = abs(g) - lam
            if v < 0.0:
                v = 0.0
        if v > worst:
            worst = v
    return worst


@numba.njit(cache=True)
def _cd(X, y, lam, beta, order, tol, max_sweeps):
    n, p = X.shape
    col_sq = np.zeros(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += X[i, j] * X[i, j]
        col_sq[j] = s
    r = y.copy()
    for j in range(p):
        if beta[j] != 0.0:
            for i in range(n):
                r[i] -= X[i, j] * beta[j]
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        _sweep(X, r, beta, col_sq, lam, order)
        sweeps += 1
        scale = 1.0
        for j in range(p):
            if abs(beta[j]) > scale:
                scale = abs(beta[j])
        if _kkt(X, r, beta, lam) <= tol * scale:
            converged = True
            break
        # Iterate on the current active set before the next full pass.
        m = 0
        for c in order:
            if beta[c] != 0.0:
                m += 1
        active = np.empty(m, dtype=np.int64)
        k = 0
        for c in order:
            if beta[c] != 0.0:
                active[k] = c
                k += 1
        while sweeps < max_sweeps and m > 0:
            worst = _sweep(X, r, beta, col_sq, lam, active)
            sweeps += 1
            if worst <= 0.1 * tol * scale:
                break
    return beta, sweeps, converged


def lasso_objective(problem: RegressionProblem, beta, lam: float, intercept: float = 0.0) -> float:
    r = problem.y - problem.X @ np.asarray(beta, dtype=np.float64) - intercept
    return 0.5 * float(r @ r) + lam * float(np.abs(beta).sum())


def certify_kkt(problem: RegressionProblem, fit: LassoFit) -> float:
    """Largest violation of the Lasso subgradient optimality conditions.

    For active ``j`` this is ``|x_j^T r - lam sign(beta_j)|``; off the support
    it is ``max(|x_j^T r| - lam, 0)``, with ``r = y - X beta``.
    """
    beta = fit.coef
    if beta.shape[0] != problem.p:
        raise InvalidInputError("coefficient length does not match the design")
    X, y = problem.X, problem.y
    if fit.centered:
        X = X - X.mean(axis=0)
        y = y - y.mean()
    r = y - X @ beta
    g = X.T @ r
    s = np.sign(beta)
    on = s != 0
    viol = np.where(on, np.abs(g - fit.lam * s), np.maximum(np.abs(g) - fit.lam, 0.0))
    return float(viol.max()) if viol.size else 0.0


def _prepare(problem: RegressionProblem, fit_intercept: bool):
    X = np.ascontiguousarray(problem.X)
    y = np.ascontiguousarray(problem.y)
    if fit_intercept:
        xm = X.mean(axis=0)
        ym = float(y.mean())
        return np.ascontiguousarray(X - xm), y - ym, xm, ym
    return X, y.copy(), None, 0.0


def _solve(X, y, lam, beta0, order, opts):
    beta = np.array(beta0, dtype=np.float64)
    beta, sweeps, converged = _cd(X, y, float(lam), beta, order, float(opts.tolerance), int(opts.max_sweeps))
    return beta, int(sweeps), bool(converged)


def _make_fit(X, y, lam, beta, sweeps, converged, xm, ym):
    r = y - X @ beta
    g = X.T @ r
    s = np.sign(beta)
    viol = np.where(s != 0, np.abs(g - lam * s), np.maximum(np.abs(g) - lam, 0.0))
    intercept = 0.0 if xm is None else float(ym - xm @ beta)
    return LassoFit(
        beta=Coefficients(beta),
        lam=float(lam),
        objective=0.5 * float(r @ r) + lam * float(np.abs(beta).sum()),
        kkt_residual=float(viol.max()),
        iterations=sweeps,
        converged=converged,
        intercept=intercept,
        centered=xm is not None,
    )


def fit_lasso(
    problem: RegressionProblem,
    lam: float,
    opts: SolverOptions = SolverOptions(),
    warm_start: Optional[Sequence[float]] = None,
    order: Optional[Sequence[int]] = None,
) -> LassoFit:
    """Minimize ``(1/2)|y - X beta|^2 + lam |beta|_1`` by coordinate descent.

    A fit that does not reach the KKT tolerance within ``opts.max_sweeps``
    is returned with ``converged=False`` rather than raising.  ``order``
    permutes the cyclic coordinate order.  With ``opts.fit_intercept`` the
    columns and response are centered and the intercept is left unpenalized.
    """
    if not lam >= 0:
        raise InvalidInputError(f"lambda must be nonnegative, got {lam}")
    X, y, xm, ym = _prepare(problem, opts.fit_intercept)
    p = problem.p
    beta0 = np.zeros(p) if warm_start is None else np.asarray(warm_start, dtype=np.float64)
    order = np.arange(p, dtype=np.int64) if order is None else np.asarray(order, dtype=np.int64)
    if sorted(order.tolist()) != list(range(p)):
        raise InvalidInputError("order must be a permutation of range(p)")
    beta, sweeps, converged = _solve(X, y, lam, beta0, order, opts)
    return _make_fit(X, y, lam, beta, sweeps, converged, xm, ym)


def bic(n: int, rss: float, df: int) -> float:
    """``n log(RSS/n) + df log n``."""
    rss = max(rss, np.finfo(float).tiny)
    return n * math.log(rss / n) + df * math.log(n)


def lambda_grid(lam_max: float, grid_size: int, ratio: float = 1e-4) -> np.ndarray:
    if grid_size < 2:
        raise InvalidInputError("grid_size must be >= 2")
    if lam_max <= 0:
        return np.geomspace(1.0, ratio, grid_size)
    return np.geomspace(lam_max, lam_max * ratio, grid_size)


def fit_path_bic(
    problem: RegressionProblem,
    grid_size: int = 100,
    opts: SolverOptions = SolverOptions(),
    min_ratio: float = 1e-4,
    max_df: Optional[int] = None,
    stop_at_max_df: bool = True,
) -> LassoPath:
    """Warm-started Lasso path from ``|X^T y|_inf`` down to ``min_ratio`` times
    that, with the fit of smallest BIC selected.

    BIC degrees of freedom are the active-set size and RSS comes from the
    Lasso coefficients themselves.  Ties go to the larger ``lam``.  Fits whose
    support exceeds ``max_df`` are excluded from selection (default
    ``n // 2``): as the support approaches ``n`` the RSS collapses and
    ``n log(RSS/n)`` drives BIC to the saturated fit.  With
    ``stop_at_max_df`` the path ends at the first such fit, so ``lambdas``
    may be shorter than ``grid_size``.
    """
    X, y, xm, ym = _prepare(problem, opts.fit_intercept)
    n, p = X.shape
    lam_max = float(np.max(np.abs(X.T @ y)))
    lambdas = lambda_grid(lam_max, grid_size, min_ratio)
    if max_df is None:
        max_df = max(n // 2 - int(opts.fit_intercept), 1)
    order = np.arange(p, dtype=np.int64)
    beta = np.zeros(p)
    fits = []
    scores = np.full(grid_size, np.inf)
    n_conv = 0
    for k, lam in enumerate(lambdas):
        if k == 0:
            # At lam_max the null model is exact; solving could leave a
            # rounding-level coefficient that would count toward df.
            beta, sweeps, converged = np.zeros(p), 0, True
        else:
            beta, sweeps, converged = _solve(X, y, lam, beta, order, opts)
        fit = _make_fit(X, y, lam, beta, sweeps, converged, xm, ym)
        fits.append(fit)
        n_conv += converged
        r = y - X @ beta
        df = fit.beta.s + int(opts.fit_intercept)
        if fit.beta.s > max_df:
            if stop_at_max_df and k >= 1:
                break
        elif converged:
            scores[k] = bic(n, float(r @ r), df)
    if n_conv == 0:
        raise RuntimeError(
            f"no fit on the {grid_size}-point path converged "
            f"(lambda from {lambdas[0]:.4g} to {lambdas[-1]:.4g})"
        )
    m = len(fits)
    lambdas, scores = lambdas[:m], scores[:m]
    if not np.isfinite(scores).any():
        scores[0] = bic(n, float(y @ y), int(opts.fit_intercept))
    best = int(np.argmin(scores))
    return LassoPath(lambdas=lambdas, fits=fits, selected_index=best, bic=scores)
