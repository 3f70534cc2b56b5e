"""Shared domain types and small deterministic linear-algebra helpers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class InvalidInputError(ValueError):
    """Raised when an input violates a documented precondition."""


def _as_finite(a, name: str, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise InvalidInputError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RegressionProblem:
    """Response ``y`` (length n) and design ``X`` (n x p) of ``y = X beta + e``."""

    y: np.ndarray
    X: np.ndarray
    column_labels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        y = _as_finite(self.y, "y", 1)
        X = _as_finite(self.X, "X", 2)
        n, p = X.shape
        if n < 1 or p < 1:
            raise InvalidInputError(f"need n >= 1 and p >= 1, got {X.shape}")
        if y.shape[0] != n:
            raise InvalidInputError(f"y has length {y.shape[0]} but X has {n} rows")
        labels = self.column_labels
        if labels is not None:
            labels = tuple(str(c) for c in labels)
            if len(labels) != p:
                raise InvalidInputError(f"column_labels has length {len(labels)}, expected {p}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "column_labels", labels)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class Coefficients:
    """Coefficient vector together with its support (indices of nonzeros)."""

    beta: np.ndarray
    support: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        beta = _as_finite(self.beta, "beta", 1)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "support", tuple(int(j) for j in np.flatnonzero(beta)))

    @property
    def s(self) -> int:
        return len(self.support)

    def __len__(self) -> int:
        return self.beta.shape[0]


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric p x p matrix with a nonnegative diagonal."""

    sigma: np.ndarray

    def __post_init__(self):
        sigma = _as_finite(self.sigma, "sigma", 2)
        if sigma.shape[0] != sigma.shape[1]:
            raise InvalidInputError(f"sigma must be square, got {sigma.shape}")
        scale = max(1.0, float(np.max(np.abs(sigma))))
        if np.max(np.abs(sigma - sigma.T)) > 1e-12 * scale:
            raise InvalidInputError("sigma is not symmetric")
        if np.any(np.diag(sigma) < 0):
            raise InvalidInputError("sigma has a negative diagonal entry")
        object.__setattr__(self, "sigma", sigma)

    @property
    def p(self) -> int:
        return self.sigma.shape[0]


def sample_covariance(problem: RegressionProblem) -> CovarianceMatrix:
    """Return ``X^T X / n``.

    The columns are *not* centered; demean upstream if centered second
    moments are wanted.
    """
    X = problem.X
    S = (X.T @ X) / X.shape[0]
    # The BLAS product is symmetric only up to rounding.
    S = 0.5 * (S + S.T)
    return CovarianceMatrix(S)


def vector_norm(v: Sequence[float], q: float = 2.0) -> float:
    """Vector q-norm for ``1 <= q <= inf``."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size == 0:
        raise InvalidInputError("norm of an empty vector is undefined")
    if not (q >= 1):
        raise InvalidInputError(f"q must be >= 1 or inf, got {q}")
    a = np.abs(v)
    if np.isinf(q):
        return float(a.max())
    if q == 1:
        return float(a.sum())
    if q == 2:
        return float(np.sqrt(np.dot(a, a)))
    m = a.max()
    if m == 0:
        return 0.0
    return float(m * np.sum((a / m) ** q) ** (1.0 / q))


vector_norms = vector_norm


def seed_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator keyed by ``(seed, *key)``.

    Streams for distinct keys are statistically independent, so replicate
    ``r`` of an experiment draws the same numbers whatever order replicates
    are executed in.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
