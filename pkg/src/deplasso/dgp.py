"""Simulators for the stationary processes used throughout the package.

Every process is described by a :class:`ProcessSpec`.  Besides one-shot
simulation, a spec exposes a batched state/step interface (``init_state``,
``step``) driven by externally supplied innovations; the dependence module
uses it to run coupled trajectories that share every innovation but one.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numba
import numpy as np
import scipy.linalg

from .core import Coefficients, InvalidInputError, RegressionProblem, seed_stream

DEFAULT_BURN_IN = 500
PHI = 0.6
ALMON_DELTA = (0.5, -1.0)
T_DF = 5.0

# Stream ids for seed_stream; fixed so datasets never depend on call order.
_STREAM_X, _STREAM_E, _STREAM_PRIME = 1, 2, 3


class ProcessKind(str, Enum):
    VAR = "VAR"
    LINEAR = "LinearProcess"
    GARCH11 = "GARCH11"
    IID = "IIDStudentT"


@dataclass(frozen=True)
class Innovation:
    """Innovation law: ``"t"`` with ``df`` degrees of freedom or ``"normal"``.

    With ``standardize`` the Student-t draws are rescaled to unit variance.
    """

    law: str = "normal"
    df: float = T_DF
    standardize: bool = False

    def __post_init__(self):
        if self.law not in ("t", "normal"):
            raise InvalidInputError(f"unknown innovation law {self.law!r}")
        if self.law == "t" and not self.df > 2:
            raise InvalidInputError("Student-t innovations need df > 2 for a finite variance")

    @property
    def variance(self) -> float:
        if self.law == "normal" or self.standardize:
            return 1.0
        return self.df / (self.df - 2.0)

    @property
    def max_moment(self) -> float:
        """Supremum of the orders q with E|eps|^q finite."""
        return np.inf if self.law == "normal" else self.df

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.law == "normal":
            return rng.standard_normal(size)
        z = rng.standard_t(self.df, size)
        if self.standardize:
            z *= np.sqrt((self.df - 2.0) / self.df)
        return z


NORMAL = Innovation("normal")


def companion_radius(coefs: Sequence[np.ndarray]) -> float:
    """Spectral radius of the VAR companion matrix."""
    p = coefs[0].shape[0]
    m = len(coefs)
    C = np.zeros((p * m, p * m))
    C[:p, :] = np.hstack(coefs)
    if m > 1:
        C[p:, :-p] = np.eye(p * (m - 1))
    return float(np.max(np.abs(np.linalg.eigvals(C))))


@dataclass(frozen=True)
class ProcessSpec:
    """Declarative description of a stationary data-generating process.

    ``coefs`` holds ``A_1..A_m`` for a VAR (``x_i = sum_j A_j x_{i-j} + eps_i``)
    or ``A_0..A_L`` for a linear process (``x_i = sum_l A_l eps_{i-l}``, each
    ``A_l`` of shape ``(p, d)``).  ``garch`` holds ``(pi0, pi1, pi2)``.
    """

    kind: ProcessKind
    dimension: int = 1
    coefs: tuple = ()
    garch: tuple = (0.1, 0.1, 0.8)
    innovation: Innovation = NORMAL
    burn_in: int = DEFAULT_BURN_IN

    def __post_init__(self):
        kind = ProcessKind(self.kind)
        object.__setattr__(self, "kind", kind)
        coefs = tuple(np.array(a, dtype=np.float64, ndmin=2) for a in self.coefs)
        for a in coefs:
            a.setflags(write=False)
        object.__setattr__(self, "coefs", coefs)
        if self.burn_in < 0:
            raise InvalidInputError("burn_in must be >= 0")
        if kind is ProcessKind.VAR:
            if not coefs:
                raise InvalidInputError("VAR needs at least one coefficient matrix")
            p = coefs[0].shape[0]
            if any(a.shape != (p, p) for a in coefs):
                raise InvalidInputError("VAR coefficient matrices must all be p x p")
            object.__setattr__(self, "dimension", p)
            rad = companion_radius(coefs)
            if not rad < 1:
                raise InvalidInputError(f"unstable VAR: companion spectral radius {rad:.6g} >= 1")
        elif kind is ProcessKind.LINEAR:
            if not coefs:
                raise InvalidInputError("linear process needs A_0")
            p, d = coefs[0].shape
            if any(a.shape != (p, d) for a in coefs):
                raise InvalidInputError("linear-process matrices must share one shape")
            object.__setattr__(self, "dimension", p)
        elif kind is ProcessKind.GARCH11:
            check_garch(self.garch)
            object.__setattr__(self, "dimension", 1)
        if self.dimension < 1:
            raise InvalidInputError("dimension must be >= 1")

    @property
    def innovation_dim(self) -> int:
        if self.kind is ProcessKind.LINEAR:
            return self.coefs[0].shape[1]
        return self.dimension

    # Batched recursion interface.  ``state`` is a dict of arrays with a
    # leading batch axis; ``step`` consumes innovations of shape
    # (batch, innovation_dim) and returns the new observation (batch, p).

    def init_state(self, batch: int) -> dict:
        p = self.dimension
        if self.kind is ProcessKind.VAR:
            return {"lags": np.zeros((len(self.coefs), batch, p))}
        if self.kind is ProcessKind.LINEAR:
            return {"eps": np.zeros((len(self.coefs), batch, self.innovation_dim))}
        if self.kind is ProcessKind.GARCH11:
            pi0, pi1, pi2 = self.garch
            h = np.full(batch, pi0 / (1.0 - pi1 - pi2))
            return {"h": h, "e": np.zeros(batch)}
        return {}

    def step(self, state: dict, eps: np.ndarray) -> np.ndarray:
        if self.kind is ProcessKind.VAR:
            lags = state["lags"]
            x = eps.copy()
            for j, A in enumerate(self.coefs):
                if A.any():
                    x += lags[j] @ A.T
            lags[1:] = lags[:-1].copy()
            lags[0] = x
            return x
        if self.kind is ProcessKind.LINEAR:
            buf = state["eps"]
            buf[1:] = buf[:-1].copy()
            buf[0] = eps
            x = np.zeros((eps.shape[0], self.dimension))
            for l, A in enumerate(self.coefs):
                x += buf[l] @ A.T
            return x
        if self.kind is ProcessKind.GARCH11:
            pi0, pi1, pi2 = self.garch
            h = pi0 + pi1 * state["e"] ** 2 + pi2 * state["h"]
            e = np.sqrt(h) * eps[:, 0]
            state["h"], state["e"] = h, e
            return e[:, None]
        return eps.copy()

    def draw_innovations(self, rng: np.random.Generator, batch: int, length: int) -> np.ndarray:
        return self.innovation.draw(rng, (length, batch, self.innovation_dim))

    def run(self, eps: np.ndarray, state: Optional[dict] = None) -> np.ndarray:
        """Feed innovations of shape (T, batch, d) and return (T, batch, p)."""
        if state is None:
            state = self.init_state(eps.shape[1])
        out = np.empty((eps.shape[0], eps.shape[1], self.dimension))
        for t in range(eps.shape[0]):
            out[t] = self.step(state, eps[t])
        return out


def check_garch(params) -> None:
    pi0, pi1, pi2 = (float(v) for v in params)
    if not pi0 > 0:
        raise InvalidInputError(f"GARCH pi0 must be > 0, got {pi0}")
    if pi1 < 0 or pi2 < 0:
        raise InvalidInputError("GARCH pi1 and pi2 must be >= 0")
    if not pi1 + pi2 < 1:
        raise InvalidInputError(f"GARCH needs pi1 + pi2 < 1, got {pi1 + pi2}")


def linear_process_coefs(coef_fn, tol: float = 1e-8, max_lag: int = 10_000) -> list:
    """Collect ``A_l = coef_fn(l)`` until every row norm drops below
    ``tol`` times the largest row norm of ``A_0``."""
    A0 = np.array(coef_fn(0), dtype=np.float64, ndmin=2)
    ref = float(np.max(np.linalg.norm(A0, axis=1)))
    out = [A0]
    for l in range(1, max_lag + 1):
        A = np.array(coef_fn(l), dtype=np.float64, ndmin=2)
        if float(np.max(np.linalg.norm(A, axis=1))) < tol * ref:
            return out
        out.append(A)
    raise InvalidInputError(f"linear-process coefficients not negligible by lag {max_lag}")


@numba.njit(cache=True)
def _var_path(coefs, eps, burn):
    T, p = eps.shape
    m = coefs.shape[0]
    x = np.zeros((T, p))
    for t in range(T):
        for k in range(p):
            x[t, k] = eps[t, k]
        for j in range(m):
            if t - j - 1 < 0:
                break
            A = coefs[j]
            prev = x[t - j - 1]
            for k in range(p):
                acc = 0.0
                for l in range(p):
                    a = A[k, l]
                    if a != 0.0:
                        acc += a * prev[l]
                x[t, k] += acc
    return x[burn:]


def simulate_var(spec: ProcessSpec, n: int, seed=0, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Post-burn-in sample (n x p) of a VAR(m) started at zero."""
    if spec.kind is not ProcessKind.VAR:
        raise InvalidInputError("simulate_var needs a VAR spec")
    rng = seed_stream(seed, _STREAM_X) if rng is None else rng
    eps = spec.innovation.draw(rng, (spec.burn_in + n, spec.dimension))
    coefs = np.ascontiguousarray(np.stack(spec.coefs))
    return _var_path(coefs, eps, spec.burn_in)


@numba.njit(cache=True)
def _garch_path(pi0, pi1, pi2, eta):
    T = eta.shape[0]
    e = np.empty(T)
    h = np.empty(T)
    hp = pi0 / (1.0 - pi1 - pi2)
    ep = 0.0
    for t in range(T):
        ht = pi0 + pi1 * ep * ep + pi2 * hp
        et = np.sqrt(ht) * eta[t]
        e[t] = et
        h[t] = ht
        hp, ep = ht, et
    return e, h


def simulate_garch11(
    params,
    n: int,
    seed=0,
    innovation: Innovation = NORMAL,
    burn_in: int = DEFAULT_BURN_IN,
    rng: Optional[np.random.Generator] = None,
    return_variance: bool = False,
):
    """GARCH(1,1) errors ``e_i = sqrt(h_i) eta_i`` with
    ``h_i = pi0 + pi1 e_{i-1}^2 + pi2 h_{i-1}``.

    The recursion starts from the unconditional variance
    ``pi0 / (1 - pi1 - pi2)`` and the first ``burn_in`` draws are discarded.
    """
    check_garch(params)
    pi0, pi1, pi2 = (float(v) for v in params)
    rng = seed_stream(seed, _STREAM_E) if rng is None else rng
    eta = innovation.draw(rng, burn_in + n)
    e, h = _garch_path(pi0, pi1, pi2, eta)
    if return_variance:
        return e[burn_in:], h[burn_in:]
    return e[burn_in:]


def simulate_process(spec: ProcessSpec, n: int, seed=0, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Post-burn-in sample (n x p) of any :class:`ProcessSpec`."""
    rng = seed_stream(seed, _STREAM_X) if rng is None else rng
    if spec.kind is ProcessKind.VAR:
        return simulate_var(spec, n, rng=rng)
    if spec.kind is ProcessKind.GARCH11:
        return simulate_garch11(spec.garch, n, innovation=spec.innovation, burn_in=spec.burn_in, rng=rng)[:, None]
    eps = spec.draw_innovations(rng, 1, spec.burn_in + n)
    return spec.run(eps)[spec.burn_in:, 0, :]


def simulate_arx(
    phi: Sequence[float],
    psi: Sequence[np.ndarray],
    z_spec: ProcessSpec,
    garch,
    n: int,
    seed=0,
    eta: Innovation = NORMAL,
    burn_in: int = DEFAULT_BURN_IN,
):
    """ARX(a, b): ``y_i = sum_l phi_l y_{i-l} + sum_l psi_l' z_{i-l} + e_i`` with
    GARCH(1,1) errors and ``z`` drawn from ``z_spec``.

    Returns ``(y, z, e)`` after burn-in.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.size and np.any(np.abs(np.roots(np.r_[1.0, -phi][::-1])) <= 1):
        raise InvalidInputError("AR polynomial has a root on or inside the unit circle")
    psi = [np.asarray(v, dtype=np.float64).ravel() for v in psi]
    T = burn_in + n
    z = simulate_process(z_spec, T, rng=seed_stream(seed, _STREAM_X))
    e = simulate_garch11(garch, T, innovation=eta, burn_in=0, rng=seed_stream(seed, _STREAM_E))
    y = np.zeros(T)
    a, b = phi.size, len(psi)
    for i in range(T):
        v = e[i]
        for l in range(a):
            if i - l - 1 >= 0:
                v += phi[l] * y[i - l - 1]
        for l in range(b):
            if i - l >= 0:
                v += psi[l] @ z[i - l]
        y[i] = v
    return y[burn_in:], z[burn_in:], e[burn_in:]


# ---------------------------------------------------------------------------
# Simulation-study designs


class ModelId(str, Enum):
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    M4 = "M4"


def block_sizes(p: int) -> list[int]:
    """Two 5x5 blocks at each end with 10x10 blocks in between."""
    if p < 20 or (p - 20) % 10:
        raise InvalidInputError(f"p = {p} not supported: need p >= 20 with (p - 20) divisible by 10")
    return [5, 5] + [10] * ((p - 20) // 10) + [5, 5]


def _block_diag(p: int, fill) -> np.ndarray:
    A = np.zeros((p, p))
    start = 0
    for size in block_sizes(p):
        A[start:start + size, start:start + size] = fill(size)
        start += size
    return A


def build_model_matrices(model_id, p: int, rho: float = 0.4) -> list:
    """VAR coefficients of the covariate process.

    Model 1 is a VAR(4) with block-constant ``A_1`` (0.15 on 5x5 blocks,
    0.075 on 10x10 blocks), ``A_4`` (-0.1 / -0.05) and ``A_2 = A_3 = 0``.
    Model 2 is a VAR(1) whose blocks have entries
    ``(-1)^|j-k| rho^(|j-k|+1)``.  Models 3 and 4 reuse 1 and 2.
    """
    mid = ModelId(model_id)
    if mid in (ModelId.M1, ModelId.M3):
        A1 = _block_diag(p, lambda k: np.full((k, k), 0.15 if k == 5 else 0.075))
        A4 = _block_diag(p, lambda k: np.full((k, k), -0.1 if k == 5 else -0.05))
        Z = np.zeros((p, p))
        return [A1, Z, Z.copy(), A4]

    def toeplitz_block(k):
        d = np.abs(np.subtract.outer(np.arange(k), np.arange(k)))
        return (-1.0) ** d * rho ** (d + 1)

    return [_block_diag(p, toeplitz_block)]


def var_covariance(coefs: Sequence[np.ndarray], innovation_variance: float = 1.0) -> np.ndarray:
    """Stationary covariance of ``x_i = sum_j A_j x_{i-j} + eps_i`` with
    ``cov(eps) = innovation_variance * I``, from the companion Lyapunov equation."""
    coefs = [np.atleast_2d(np.asarray(a, dtype=np.float64)) for a in coefs]
    p, m = coefs[0].shape[0], len(coefs)
    if not companion_radius(coefs) < 1:
        raise InvalidInputError("VAR is not stable")
    C = np.zeros((p * m, p * m))
    C[:p] = np.hstack(coefs)
    C[p:, :-p] = np.eye(p * (m - 1))
    Q = np.zeros_like(C)
    Q[:p, :p] = innovation_variance * np.eye(p)
    S = scipy.linalg.solve_discrete_lyapunov(C, Q)[:p, :p]
    return 0.5 * (S + S.T)


def model_covariance(model_id, p: int, innovation_variance: float = 1.0) -> np.ndarray:
    """Population covariance of a model's covariates, block by block."""
    coefs = build_model_matrices(model_id, p)
    S = np.zeros((p, p))
    start = 0
    for size in block_sizes(p):
        sl = slice(start, start + size)
        S[sl, sl] = var_covariance([A[sl, sl] for A in coefs], innovation_variance)
        start += size
    return S


def almon_weights(count: int, delta=ALMON_DELTA, variant: str = "printed") -> np.ndarray:
    """Exponential Almon lag weights for lags ``j = 1..count``.

    ``variant="printed"`` uses ``exp(d1 j + d2 j^2) / sum_k exp(2 d1 k + 2 d2 k^2)``;
    ``variant="textbook"`` normalizes by ``sum_k exp(d1 k + d2 k^2)`` instead.
    """
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    d1, d2 = (float(v) for v in delta)
    j = np.arange(1, count + 1, dtype=np.float64)
    expo = d1 * j + d2 * j * j
    if variant == "printed":
        den_expo = 2.0 * expo
    elif variant == "textbook":
        den_expo = expo
    else:
        raise InvalidInputError(f"unknown Almon variant {variant!r}")
    # exp(a)/sum exp(b) is unchanged by a common shift of a and b.
    shift = den_expo.max()
    return np.exp(expo - shift) / np.exp(den_expo - shift).sum()


def almon_groups(s: int) -> list[int]:
    """Group sizes of the Almon-weighted coefficient blocks for ``s`` relevant variables."""
    groups = {5: [5], 10: [5, 5], 20: [5, 5, 10]}
    if s not in groups:
        raise InvalidInputError(f"Almon designs need s in (5, 10, 20), got {s}")
    return groups[s]


def true_beta(model_id, p: int, s: int, delta=ALMON_DELTA, variant: str = "printed") -> np.ndarray:
    mid = ModelId(model_id)
    if not 1 <= s <= p:
        raise InvalidInputError(f"need 1 <= s <= p, got s={s}, p={p}")
    beta = np.zeros(p)
    if mid in (ModelId.M1, ModelId.M2):
        j = np.arange(1, s + 1)
        beta[:s] = (-1.0) ** j / np.sqrt(s)
    else:
        start = 0
        for size in almon_groups(s):
            beta[start:start + size] = almon_weights(size, delta, variant)
            start += size
    return beta


@dataclass(frozen=True)
class SimulatedDataset:
    """Draw from the AR-plus-lagged-covariates design.

    ``y[k]`` and ``X[k]`` are ``y_{k+1}`` and ``x_{k+1}`` for ``k < n + h``;
    ``y0``/``x0`` are the pre-sample values, so the regressor row for ``y_i``
    is ``(y_{i-1}, x_{i-1})``.
    """

    y: np.ndarray
    X: np.ndarray
    y0: float
    x0: np.ndarray
    phi: float
    beta: Coefficients
    seed: int
    model_id: ModelId
    n: int
    s: int
    holdout: int
    replicate: int = 0
    config: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def truth(self) -> np.ndarray:
        """``(phi, beta)`` stacked, length ``p + 1``."""
        return np.r_[self.phi, self.beta.beta]

    def design(self) -> np.ndarray:
        """Regressor rows ``(y_{i-1}, x_{i-1})`` for ``i = 1..n+h``."""
        y_prev = np.r_[self.y0, self.y[:-1]]
        x_prev = np.vstack([self.x0[None, :], self.X[:-1]])
        return np.column_stack([y_prev, x_prev])

    def train(self) -> RegressionProblem:
        Z = self.design()
        labels = ["y_lag1"] + [f"x{j + 1}_lag1" for j in range(self.p)]
        return RegressionProblem(self.y[: self.n], Z[: self.n], labels)

    def test(self) -> tuple[np.ndarray, np.ndarray]:
        Z = self.design()
        return Z[self.n:], self.y[self.n:]

    def to_csv(self, path) -> None:
        """Rows ``i = 0..n+h`` (row 0 is pre-sample); header ``y,x_1..x_p``."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["y"] + [f"x_{j + 1}" for j in range(self.p)])
            w.writerow([repr(float(self.y0))] + [repr(float(v)) for v in self.x0])
            for k in range(self.y.shape[0]):
                w.writerow([repr(float(self.y[k]))] + [repr(float(v)) for v in self.X[k]])

    def truth_dict(self) -> dict:
        return {
            "model_id": self.model_id.value,
            "n": self.n,
            "p": self.p,
            "s": self.s,
            "holdout": self.holdout,
            "seed": self.seed,
            "replicate": self.replicate,
            "phi": self.phi,
            "beta": [float(v) for v in self.beta.beta],
            "support": list(self.beta.support),
            **self.config,
        }

    def write_truth(self, path) -> None:
        Path(path).write_text(json.dumps(self.truth_dict(), indent=2) + "\n")


def _model_index(mid: ModelId) -> int:
    return list(ModelId).index(mid) + 1


def simulate_dataset(
    model_id,
    n: int,
    p: int,
    s: int,
    seed: int,
    *,
    replicate: int = 0,
    holdout: int = 10,
    burn_in: int = DEFAULT_BURN_IN,
    phi: float = PHI,
    innovation: Innovation = Innovation("t", T_DF, standardize=True),
    almon_variant: str = "printed",
) -> SimulatedDataset:
    """Simulate ``y_i = phi y_{i-1} + x_{i-1,1}' beta_s + e_i`` with VAR covariates.

    Covariate and error innovations are independent Student-t(5) draws by
    default, rescaled to unit variance (pass ``Innovation("t", 5)`` for raw
    draws).  The result is a pure function of
    ``(model_id, n, p, s, seed, replicate)`` and the keyword settings.
    """
    mid = ModelId(model_id)
    if n < 1 or holdout < 0:
        raise InvalidInputError("need n >= 1 and holdout >= 0")
    beta = true_beta(mid, p, s, variant=almon_variant)
    spec = ProcessSpec(ProcessKind.VAR, p, tuple(build_model_matrices(mid, p)), innovation=innovation, burn_in=burn_in)
    key = (_model_index(mid), n, p, s, replicate)
    T = n + holdout + 1
    # The VAR has its own burn-in; a further burn_in steps warm up y.
    x_all = simulate_var(spec, burn_in + T, rng=seed_stream(seed, *key, _STREAM_X))
    e = innovation.draw(seed_stream(seed, *key, _STREAM_E), x_all.shape[0])
    drive = x_all @ beta
    y = np.empty(x_all.shape[0])
    prev_y, prev_drive = 0.0, 0.0
    for t in range(x_all.shape[0]):
        y[t] = phi * prev_y + prev_drive + e[t]
        prev_y, prev_drive = y[t], drive[t]
    y, x = y[burn_in:], x_all[burn_in:]
    return SimulatedDataset(
        y=y[1:],
        X=x[1:],
        y0=float(y[0]),
        x0=x[0].copy(),
        phi=phi,
        beta=Coefficients(beta),
        seed=int(seed),
        model_id=mid,
        n=n,
        s=s,
        holdout=holdout,
        replicate=replicate,
        config={"innovation": innovation.law, "df": innovation.df, "standardize": innovation.standardize},
    )
