"""Diagnostics for the identifiability and selection conditions of the Lasso:
restricted eigenvalues, the strong irrepresentable condition and sign
consistency."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Coefficients, CovarianceMatrix, InvalidInputError, seed_stream

EXACT_MAX_P = 12
SPARSE_ENUM_LIMIT = 20_000
SIGN_ENUM_MAX_S = 20


def _matrix(sigma) -> np.ndarray:
    if isinstance(sigma, CovarianceMatrix):
        return sigma.sigma
    return CovarianceMatrix(np.asarray(sigma, dtype=np.float64)).sigma


def _check_psd(S: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(S)
    if w[0] < -1e-10 * max(1.0, abs(w[-1])):
        raise InvalidInputError(f"sigma is not positive semi-definite (smallest eigenvalue {w[0]:.3g})")
    return w


def project_cone(V: np.ndarray, J: Sequence[int], c: float = 3.0) -> np.ndarray:
    """Euclidean projection of each row of ``V`` onto
    ``{u : |u_{J^c}|_1 <= c |u_J|_1}``.

    The set is a union of polyhedral cones, one per orthant; the nearest point
    keeps the signs of ``v``, which reduces the problem to a convex one in the
    magnitudes with a single multiplier ``mu``:
    ``|u_J| = |v_J| + c mu`` and ``|u_{J^c}| = max(|v_{J^c}| - mu, 0)``.
    """
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    p = V.shape[1]
    J = np.asarray(J, dtype=np.int64)
    Jc = np.setdiff1d(np.arange(p), J)
    sgn = np.where(V < 0, -1.0, 1.0)
    x = np.abs(V[:, J])
    z = np.abs(V[:, Jc])
    sx = x.sum(axis=1)
    out = np.abs(V).copy()
    bad = z.sum(axis=1) > c * sx
    if bad.any() and Jc.size:
        zb = z[bad]
        zs = -np.sort(-zb, axis=1)
        csum = np.cumsum(zs, axis=1)
        k = np.arange(1, Jc.size + 1)
        mu = (csum - c * sx[bad, None]) / (k + c * c * J.size)
        # Pick the k for which z_(k) > mu >= z_(k+1).
        nxt = np.concatenate([zs[:, 1:], np.zeros((zs.shape[0], 1))], axis=1)
        ok = (zs > mu) & (mu >= nxt)
        kk = np.argmax(ok, axis=1)
        m = mu[np.arange(mu.shape[0]), kk]
        m = np.maximum(m, 0.0)
        rows = np.flatnonzero(bad)
        out[np.ix_(rows, J)] = x[bad] + c * m[:, None]
        out[np.ix_(rows, Jc)] = np.maximum(zb - m[:, None], 0.0)
    return sgn * out


def in_cone(u, J, c: float = 3.0, slack: float = 1e-12) -> bool:
    u = np.asarray(u, dtype=np.float64)
    mask = np.zeros(u.shape[0], dtype=bool)
    mask[list(J)] = True
    return np.abs(u[~mask]).sum() <= c * np.abs(u[mask]).sum() + slack


def _cone_min(S: np.ndarray, J: Sequence[int], rng, restarts: int, iters: int = 400) -> float:
    p = S.shape[0]
    J = list(J)
    U = rng.standard_normal((restarts, p))
    # Seed one restart at the minimal eigenvector of Sigma_JJ, which lies in the cone.
    w, v = np.linalg.eigh(S[np.ix_(J, J)])
    start = np.zeros(p)
    start[J] = v[:, 0]
    U = np.vstack([start, U]) if restarts else start[None, :]
    U = project_cone(U, J)
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    step = 0.5 / max(np.linalg.eigvalsh(S)[-1], 1e-300)
    best = np.einsum("ij,jk,ik->i", U, S, U)
    for _ in range(iters):
        G = U @ S
        Un = project_cone(U - step * G, J)
        nrm = np.linalg.norm(Un, axis=1, keepdims=True)
        Un /= np.where(nrm > 0, nrm, 1.0)
        val = np.einsum("ij,jk,ik->i", Un, S, Un)
        improved = val < best
        U = np.where(improved[:, None], Un, U)
        moved = np.abs(best - np.minimum(val, best)).max()
        best = np.minimum(best, val)
        if moved < 1e-14:
            break
    return float(max(best.min(), 0.0) if best.min() > -1e-12 else best.min())


def sparse_min_eigenvalue(sigma, k: int, limit: int = SPARSE_ENUM_LIMIT) -> tuple[float, bool]:
    """Smallest eigenvalue over all k x k principal submatrices.

    Enumerates supports when there are at most ``limit`` of them; otherwise
    returns the global minimum eigenvalue, a lower bound.  The second value
    reports whether the enumeration was exact.
    """
    S = _matrix(sigma)
    p = S.shape[0]
    k = min(k, p)
    if math.comb(p, k) > limit:
        return float(np.linalg.eigvalsh(S)[0]), False
    best = np.inf
    for J in itertools.combinations(range(p), k):
        best = min(best, np.linalg.eigvalsh(S[np.ix_(J, J)])[0])
    return float(best), True


def restricted_eigenvalue(sigma, s: int, restarts: int = 50, seed: int = 0, exact_max_p: int = EXACT_MAX_P):
    """Restricted-eigenvalue constant of order ``s`` over the cone
    ``|u_{J^c}|_1 <= 3 |u_J|_1``.

    Returns ``(value, method)``.  For ``p <= exact_max_p`` the cone minimum is
    searched for every support of size ``s`` (larger supports only enlarge the
    cone, smaller ones shrink it, so size ``s`` attains the minimum) by
    projected gradient with random restarts; ``method`` is ``"exact_small"``
    and the value is the smallest Rayleigh quotient found, so it can only
    overestimate the true constant.  For larger ``p`` the ``2s``-sparse
    minimal eigenvalue is returned with method ``"sparse_eig_bound"``.
    """
    S = _matrix(sigma)
    p = S.shape[0]
    if not 1 <= s <= p:
        raise InvalidInputError(f"need 1 <= s <= p, got s={s}, p={p}")
    w = _check_psd(S)
    if s == p:
        return float(max(w[0], 0.0)), "exact_small"
    if p <= exact_max_p:
        rng = seed_stream(seed, 11)
        best = np.inf
        for J in itertools.combinations(range(p), s):
            best = min(best, _cone_min(S, J, rng, restarts))
        # The cone minimum is never below the smallest eigenvalue.
        return float(max(best, w[0], 0.0)), "exact_small"
    val, _ = sparse_min_eigenvalue(S, 2 * s)
    return float(max(val, 0.0)), "sparse_eig_bound"


@dataclass(frozen=True)
class PartitionedSigma:
    """``Sigma`` split into relevant (1) and irrelevant (2) index blocks."""

    sigma11: np.ndarray
    sigma12: np.ndarray
    sigma21: np.ndarray
    sigma22: np.ndarray
    relevant_indices: tuple

    @classmethod
    def from_sigma(cls, sigma, relevant: Sequence[int]) -> "PartitionedSigma":
        S = _matrix(sigma)
        p = S.shape[0]
        rel = np.asarray(sorted(set(int(j) for j in relevant)), dtype=np.int64)
        if rel.size == 0 or rel.size >= p or rel[0] < 0 or rel[-1] >= p:
            raise InvalidInputError("relevant indices must be a nonempty proper subset of range(p)")
        irr = np.setdiff1d(np.arange(p), rel)
        return cls(
            sigma11=S[np.ix_(rel, rel)],
            sigma12=S[np.ix_(rel, irr)],
            sigma21=S[np.ix_(irr, rel)],
            sigma22=S[np.ix_(irr, irr)],
            relevant_indices=tuple(int(j) for j in rel),
        )

    @property
    def s(self) -> int:
        return self.sigma11.shape[0]

    @property
    def n1(self) -> float:
        """Smallest eigenvalue of ``Sigma11`` (``1 / |Sigma11^{-1}|_2``)."""
        return float(np.linalg.eigvalsh(self.sigma11)[0])

    @property
    def sigma_max(self) -> float:
        """Largest diagonal entry of the irrelevant block."""
        return float(np.max(np.diag(self.sigma22)))

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.sigma11))

    def assemble(self) -> np.ndarray:
        p = self.s + self.sigma22.shape[0]
        rel = np.asarray(self.relevant_indices)
        irr = np.setdiff1d(np.arange(p), rel)
        S = np.empty((p, p))
        S[np.ix_(rel, rel)] = self.sigma11
        S[np.ix_(rel, irr)] = self.sigma12
        S[np.ix_(irr, rel)] = self.sigma21
        S[np.ix_(irr, irr)] = self.sigma22
        return S

    def irrepresentable_matrix(self) -> np.ndarray:
        """``Sigma21 Sigma11^{-1}``."""
        if self.n1 <= 1e-12 * max(1.0, float(np.abs(self.sigma11).max())):
            raise InvalidInputError("Sigma11 is singular (N_1 = 0); the irrepresentable condition is undefined")
        return np.linalg.solve(self.sigma11, self.sigma12).T


def irrepresentable_check(part: PartitionedSigma, sign_vector) -> float:
    """``|Sigma21 Sigma11^{-1} sign|_inf``; compare against ``1 - eta``."""
    sv = np.asarray(sign_vector, dtype=np.float64)
    if sv.shape != (part.s,):
        raise InvalidInputError(f"sign vector must have length {part.s}")
    M = part.irrepresentable_matrix()
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(M @ sv)))


def irrepresentable_all_signs(part: PartitionedSigma, max_enum_s: int = SIGN_ENUM_MAX_S) -> tuple[float, bool]:
    """Worst case of :func:`irrepresentable_check` over all ``2^s`` sign vectors.

    Returns ``(value, exact)``.  Enumeration is used for ``s <= max_enum_s``;
    beyond that the row-wise l1 norm of ``Sigma21 Sigma11^{-1}`` is returned.
    (Each row attains its l1 norm at the sign vector aligned with it, so the
    two agree whenever both are computed.)
    """
    M = part.irrepresentable_matrix()
    if M.size == 0:
        return 0.0, True
    s = part.s
    if s > max_enum_s:
        return float(np.abs(M).sum(axis=1).max()), False
    best = 0.0
    # Sign vectors come in +/- pairs with equal |.|_inf; fix the first entry.
    chunk = 1 << min(s - 1, 14)
    total = 1 << (s - 1)
    bits = np.arange(s - 1)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total))
        signs = np.ones((codes.size, s))
        if s > 1:
            signs[:, 1:] = np.where((codes[:, None] >> bits) & 1, -1.0, 1.0)
        best = max(best, float(np.abs(signs @ M.T).max()))
    return best, True


def eta_margin(irrep_value: float) -> float:
    """Largest ``eta`` with ``irrep_value <= 1 - eta``, clamped at 0."""
    return max(0.0, 1.0 - float(irrep_value))


def bounded_correlation_sigma(p: int, s: int, c: float, seed: int = 0, worst_case: bool = False) -> np.ndarray:
    """Unit-diagonal ``Sigma`` with ``|sigma_jk| <= c / (2s - 1)``.

    ``worst_case`` gives the equicorrelated matrix at the bound; otherwise the
    off-diagonal entries are uniform on the allowed interval.
    """
    if not 0 < c < 1 or s < 1:
        raise InvalidInputError("need 0 < c < 1 and s >= 1")
    b = c / (2 * s - 1)
    if worst_case:
        S = np.full((p, p), b)
    else:
        R = seed_stream(seed, 12).uniform(-b, b, (p, p))
        S = np.triu(R, 1)
        S = S + S.T
    np.fill_diagonal(S, 1.0)
    return S


def sign_consistency(fit, truth) -> bool:
    """True iff ``sign(beta_hat) == sign(beta)`` coordinatewise, zeros included."""
    bh = _coef(fit)
    b = _coef(truth)
    if bh.shape != b.shape:
        raise InvalidInputError("coefficient vectors differ in length")
    return bool(np.array_equal(np.sign(bh), np.sign(b)))


def _coef(obj) -> np.ndarray:
    if hasattr(obj, "coef"):
        return np.asarray(obj.coef)
    if isinstance(obj, Coefficients):
        return obj.beta
    return np.asarray(obj, dtype=np.float64)


@dataclass(frozen=True)
class ConditionReport:
    kappa_lower: float
    kappa_method: str
    irrep_value: float
    irrep_exact: bool
    irrep_holds_eta: float
    n1: float
    sigma_max: float
    example2_bound_holds: bool

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def condition_report(sigma, relevant: Sequence[int], s: Optional[int] = None, c: float = 0.999999, seed: int = 0) -> ConditionReport:
    """Restricted eigenvalue, irrepresentable value and the bounded-correlation
    check for one covariance matrix and relevant set."""
    S = _matrix(sigma)
    s = len(relevant) if s is None else s
    kappa, method = restricted_eigenvalue(S, s, seed=seed)
    part = PartitionedSigma.from_sigma(S, relevant)
    irrep, exact = irrepresentable_all_signs(part)
    off = S - np.diag(np.diag(S))
    unit_diag = np.allclose(np.diag(S), 1.0)
    ex2 = bool(unit_diag and np.abs(off).max(initial=0.0) <= c / (2 * s - 1))
    return ConditionReport(
        kappa_lower=kappa,
        kappa_method=method,
        irrep_value=irrep,
        irrep_exact=exact,
        irrep_holds_eta=eta_margin(irrep),
        n1=part.n1,
        sigma_max=part.sigma_max,
        example2_bound_holds=ex2,
    )
