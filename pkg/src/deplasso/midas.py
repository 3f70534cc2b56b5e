"""MIDAS regression with exponential Almon lag weights, fitted by damped
Gauss-Newton (Levenberg-Marquardt) on a finite-difference Jacobian.

A model is stated against the columns of a design matrix ``Z``:

    yhat = c + sum_k phi_k Z[:, ar_k] + sum_g theta_g Z[:, g] @ w(delta_g)

where each group ``g`` is a contiguous column range and ``w`` are the Almon
weights of :func:`deplasso.dgp.almon_weights`.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import InvalidInputError, RegressionProblem
from .dgp import ALMON_DELTA, almon_groups, almon_weights


@dataclass(frozen=True)
class MidasModel:
    ar_columns: tuple
    ar_coeffs: tuple
    groups: tuple  # ((start, stop), ...) half-open column ranges
    thetas: tuple
    deltas: tuple  # ((d1, d2), ...)
    intercept: Optional[float] = None
    almon_variant: str = "printed"

    def __post_init__(self):
        object.__setattr__(self, "ar_columns", tuple(int(c) for c in self.ar_columns))
        object.__setattr__(self, "ar_coeffs", tuple(float(c) for c in self.ar_coeffs))
        object.__setattr__(self, "groups", tuple((int(a), int(b)) for a, b in self.groups))
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        object.__setattr__(self, "deltas", tuple((float(a), float(b)) for a, b in self.deltas))
        if len(self.ar_columns) != len(self.ar_coeffs):
            raise InvalidInputError("one AR coefficient per AR column")
        if not len(self.groups) == len(self.thetas) == len(self.deltas):
            raise InvalidInputError("groups, thetas and deltas must align")
        cols = set(self.ar_columns)
        for a, b in self.groups:
            if not 0 <= a < b:
                raise InvalidInputError(f"bad group range ({a}, {b})")
            rng = set(range(a, b))
            if rng & cols:
                raise InvalidInputError("group ranges must be disjoint from each other and the AR columns")
            cols |= rng
        for w in self.weights():
            if not np.all(np.isfinite(w)):
                raise InvalidInputError("Almon weights are not finite")

    @property
    def n_columns(self) -> int:
        ends = [b for _, b in self.groups] + [c + 1 for c in self.ar_columns]
        return max(ends) if ends else 0

    def weights(self) -> list:
        return [almon_weights(b - a, d, self.almon_variant) for (a, b), d in zip(self.groups, self.deltas)]

    def coefficients(self, p: int) -> np.ndarray:
        """Implied linear coefficient on each of ``p`` design columns."""
        if p < self.n_columns:
            raise InvalidInputError(f"design has {p} columns, model needs {self.n_columns}")
        beta = np.zeros(p)
        for c, f in zip(self.ar_columns, self.ar_coeffs):
            beta[c] = f
        for (a, b), t, w in zip(self.groups, self.thetas, self.weights()):
            beta[a:b] = t * w
        return beta

    def predict(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        out = Z @ self.coefficients(Z.shape[1])
        if self.intercept is not None:
            out = out + self.intercept
        return out

    # Flat parameter vector: [intercept], phi..., (theta, d1, d2) per group.

    def to_vector(self) -> np.ndarray:
        v = [] if self.intercept is None else [self.intercept]
        v += list(self.ar_coeffs)
        for t, (d1, d2) in zip(self.thetas, self.deltas):
            v += [t, d1, d2]
        return np.asarray(v, dtype=np.float64)

    def with_vector(self, v) -> "MidasModel":
        v = list(np.asarray(v, dtype=np.float64))
        k = 0
        icpt = None
        if self.intercept is not None:
            icpt, k = v[0], 1
        a = len(self.ar_columns)
        phi = v[k:k + a]
        k += a
        g = np.asarray(v[k:], dtype=np.float64).reshape(-1, 3)
        return replace(self, intercept=icpt, ar_coeffs=tuple(phi), thetas=tuple(g[:, 0]),
                       deltas=tuple(map(tuple, g[:, 1:])))

    def to_text(self) -> str:
        lines = [f"almon_variant = {self.almon_variant}",
                 f"intercept = {'none' if self.intercept is None else repr(self.intercept)}"]
        for k, (c, f) in enumerate(zip(self.ar_columns, self.ar_coeffs), 1):
            lines += [f"ar_{k}_column = {c}", f"ar_{k}_coeff = {f!r}"]
        for k, ((a, b), t, (d1, d2)) in enumerate(zip(self.groups, self.thetas, self.deltas), 1):
            lines += [f"group_{k}_start = {a}", f"group_{k}_stop = {b}", f"group_{k}_theta = {t!r}",
                      f"group_{k}_delta1 = {d1!r}", f"group_{k}_delta2 = {d2!r}"]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MidasModel":
        kv = {}
        for line in text.splitlines():
            if line.strip():
                k, v = (s.strip() for s in line.split("=", 1))
                kv[k] = v
        ar, gr = [], []
        k = 1
        while f"ar_{k}_column" in kv:
            ar.append((int(kv[f"ar_{k}_column"]), float(kv[f"ar_{k}_coeff"])))
            k += 1
        k = 1
        while f"group_{k}_start" in kv:
            gr.append(((int(kv[f"group_{k}_start"]), int(kv[f"group_{k}_stop"])), float(kv[f"group_{k}_theta"]),
                       (float(kv[f"group_{k}_delta1"]), float(kv[f"group_{k}_delta2"]))))
            k += 1
        icpt = None if kv.get("intercept", "none") == "none" else float(kv["intercept"])
        return cls(ar_columns=[a for a, _ in ar], ar_coeffs=[f for _, f in ar], groups=[g for g, _, _ in gr],
                   thetas=[t for _, t, _ in gr], deltas=[d for _, _, d in gr], intercept=icpt,
                   almon_variant=kv.get("almon_variant", "printed"))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


@dataclass(frozen=True)
class MidasOptions:
    max_iter: int = 200
    rss_tol: float = 1e-10
    step_tol: float = 1e-10
    fd_step: float = 1e-6
    damping: float = 1e-3
    max_damping: float = 1e12


@dataclass(frozen=True)
class MidasFit:
    model: MidasModel
    rss: float
    iterations: int
    converged: bool
    initial_values_used: MidasModel
    rss_trace: tuple = ()


class _Evaluator:
    """Fitted values and Jacobian for a fixed layout, on raw parameter vectors."""

    def __init__(self, model: MidasModel, Z: np.ndarray):
        self.icpt = model.intercept is not None
        self.a = len(model.ar_columns)
        self.k0 = int(self.icpt) + self.a
        self.variant = model.almon_variant
        self.Zar = Z[:, list(model.ar_columns)]
        self.blocks = [Z[:, a:b] for a, b in model.groups]
        self.n = Z.shape[0]

    def group_term(self, g: int, theta: float, d1: float, d2: float) -> np.ndarray:
        B = self.blocks[g]
        return theta * (B @ almon_weights(B.shape[1], (d1, d2), self.variant))

    def fitted(self, v: np.ndarray) -> np.ndarray:
        out = self.Zar @ v[int(self.icpt):self.k0]
        if self.icpt:
            out = out + v[0]
        for g in range(len(self.blocks)):
            t, d1, d2 = v[self.k0 + 3 * g:self.k0 + 3 * g + 3]
            out = out + self.group_term(g, t, d1, d2)
        return out

    def jacobian(self, v: np.ndarray, h_rel: float) -> np.ndarray:
        # Linear parameters have exact columns; each group's three
        # parameters are differenced centrally on that group's term only.
        J = np.empty((self.n, v.size))
        k = 0
        if self.icpt:
            J[:, 0] = 1.0
            k = 1
        J[:, k:self.k0] = self.Zar
        for g in range(len(self.blocks)):
            base = self.k0 + 3 * g
            par = v[base:base + 3].copy()
            for m in range(3):
                h = h_rel * max(1.0, abs(par[m]))
                up, dn = par.copy(), par.copy()
                up[m] += h
                dn[m] -= h
                J[:, base + m] = (self.group_term(g, *up) - self.group_term(g, *dn)) / (2 * h)
        return J


def fit_midas(problem: RegressionProblem, init: MidasModel, opts: MidasOptions = MidasOptions()) -> MidasFit:
    """Least-squares MIDAS fit started from ``init``.

    Steps that would raise the residual sum of squares are rejected and the
    damping increased, so the accepted RSS sequence is non-increasing.  A fit
    that exhausts ``max_iter`` or the damping range is returned with
    ``converged=False``.
    """
    Z, y = problem.X, problem.y
    if problem.p < init.n_columns:
        raise InvalidInputError(f"design has {problem.p} columns, model needs {init.n_columns}")
    v = init.to_vector()
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("initial values must be finite")
    ev = _Evaluator(init, Z)
    r = y - ev.fitted(v)
    rss = float(r @ r)
    trace = [rss]
    mu = None
    converged = False
    it = 0
    while it < opts.max_iter:
        it += 1
        if rss <= 1e-300:
            converged = True
            break
        J = ev.jacobian(v, opts.fd_step)
        A = J.T @ J
        g = J.T @ r
        d = np.diag(A).copy()
        d = np.maximum(d, 1e-12 * max(d.max(initial=0.0), 1e-300))
        if mu is None:
            mu = opts.damping * d.max()
        accepted = False
        while mu <= opts.max_damping * max(d.max(), 1.0):
            try:
                step = np.linalg.solve(A + mu * np.diag(d), g)
            except np.linalg.LinAlgError:
                mu *= 10
                continue
            vn = v + step
            with np.errstate(over="ignore", invalid="ignore"):
                rn = y - ev.fitted(vn)
                rss_n = float(rn @ rn)
            if np.isfinite(rss_n) and rss_n <= rss:
                accepted = True
                break
            mu *= 10
        if not accepted:
            break
        small_step = np.linalg.norm(step) < opts.step_tol * max(1.0, np.linalg.norm(v))
        small_rss = (rss - rss_n) <= opts.rss_tol * max(rss, 1e-300)
        v, r, rss = vn, rn, rss_n
        trace.append(rss)
        mu = max(mu / 3.0, 1e-15)
        if small_step or small_rss:
            converged = True
            break
    return MidasFit(model=init.with_vector(v), rss=rss, iterations=it, converged=converged,
                    initial_values_used=init, rss_trace=tuple(trace))


def predict_midas(model: MidasModel, y_prev, x_prev) -> float:
    """Conditional mean for one period from lagged target value(s) ``y_prev``
    and covariates ``x_prev``; the design row is ``(y_prev..., x_prev...)``."""
    z = np.r_[np.atleast_1d(np.asarray(y_prev, dtype=np.float64)), np.asarray(x_prev, dtype=np.float64)]
    pad = model.n_columns - z.size
    if pad > 0:
        raise InvalidInputError("x_prev does not cover the model's column layout")
    return float(model.predict(z[None, :])[0])


def simulation_layout(s: int, covered: int = 100, pad_size: int = 10) -> list:
    """Group ranges over design columns ``1..covered`` (column 0 is the lagged
    response): the relevant-variable groups of sizes 5/5/10 followed by
    inactive groups of ``pad_size``."""
    groups = []
    start = 1
    for size in almon_groups(s):
        groups.append((start, start + size))
        start += size
    while start <= covered:
        stop = min(start + pad_size, covered + 1)
        groups.append((start, stop))
        start = stop
    return groups


def simulation_init(phi: float, beta: np.ndarray, s: int, covered: int = 100,
                    delta=ALMON_DELTA, variant: str = "printed") -> MidasModel:
    """Truth-based starting values.

    The Almon parameters start at ``delta`` in every group; each slope is the
    least-squares fit of the true coefficients in its group by the weight
    profile (exactly 1 when the truth is itself Almon-weighted, 0 on
    irrelevant groups).
    """
    beta = np.asarray(getattr(beta, "beta", beta), dtype=np.float64)
    groups = simulation_layout(s, covered)
    thetas = []
    for a, b in groups:
        w = almon_weights(b - a, delta, variant)
        thetas.append(float(w @ beta[a - 1:b - 1] / (w @ w)))
    return MidasModel(ar_columns=(0,), ar_coeffs=(phi,), groups=groups, thetas=thetas,
                      deltas=[tuple(delta)] * len(groups), almon_variant=variant)


def ols_init(problem: RegressionProblem, ar_columns: Sequence[int], groups: Sequence, intercept: bool = True,
             delta=(0.0, 0.0), variant: str = "printed") -> MidasModel:
    """Starting values by OLS on the Almon-aggregated regressors at ``delta``."""
    Z, y = problem.X, problem.y
    cols = [np.ones(Z.shape[0])] if intercept else []
    cols += [Z[:, c] for c in ar_columns]
    ws = [almon_weights(b - a, delta, variant) for a, b in groups]
    cols += [Z[:, a:b] @ w for (a, b), w in zip(groups, ws)]
    D = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(D, y, rcond=None)
    k = int(intercept)
    return MidasModel(ar_columns=ar_columns, ar_coeffs=coef[k:k + len(ar_columns)], groups=groups,
                      thetas=coef[k + len(ar_columns):], deltas=[tuple(delta)] * len(groups),
                      intercept=float(coef[0]) if intercept else None, almon_variant=variant)
