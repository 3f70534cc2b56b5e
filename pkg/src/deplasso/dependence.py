"""Functional dependence measures, dependence-adjusted norms and the
rate/scaling calculators built on them.

The dependence measure of coordinate ``j`` at lag ``i`` is the L^q distance
between ``x_ij`` and its coupled version in which only the innovation at
time 0 is redrawn.  It is estimated here by simulating coupled pairs from a
:class:`~deplasso.dgp.ProcessSpec`.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import integrate, stats

from .core import InvalidInputError, seed_stream
from .dgp import Innovation, ProcessKind, ProcessSpec

TAIL_POINTS = 5
_STREAM_SHARED, _STREAM_PRIME = 1, 3


class MomentConditionError(InvalidInputError):
    """The requested order q exceeds the moments the process possesses."""


class NonSummableError(ValueError):
    """Estimated dependence measures do not decay (short-range dependence fails)."""


class UnsupportedRegimeError(InvalidInputError):
    pass


def _innovation_expectation(fn, innovation: Innovation) -> float:
    if innovation.law == "normal":
        pdf = stats.norm.pdf
    else:
        scale = math.sqrt((innovation.df - 2) / innovation.df) if innovation.standardize else 1.0
        pdf = stats.t(innovation.df, scale=scale).pdf
    val, _ = integrate.quad(lambda z: fn(z) * pdf(z), -np.inf, np.inf, limit=200)
    return float(val)


def garch_moment_factor(params, innovation: Innovation, q: float) -> float:
    """``E (pi1 eta^2 + pi2)^{q/2}``; below 1 iff GARCH errors have a finite q-th moment."""
    _, pi1, pi2 = params
    return _innovation_expectation(lambda z: (pi1 * z * z + pi2) ** (q / 2.0), innovation)


def check_moments(spec: ProcessSpec, q: float) -> None:
    if q >= spec.innovation.max_moment:
        raise MomentConditionError(
            f"q = {q} needs E|eps|^q < inf, but Student-t({spec.innovation.df:g}) innovations "
            f"only have moments of order < {spec.innovation.max_moment:g}"
        )
    if spec.kind is ProcessKind.GARCH11:
        f = garch_moment_factor(spec.garch, spec.innovation, q)
        if not f < 1:
            raise MomentConditionError(
                f"GARCH{tuple(spec.garch)} has no finite moment of order {q}: "
                f"E(pi1 eta^2 + pi2)^(q/2) = {f:.4g} >= 1"
            )


@dataclass(frozen=True)
class DependenceReport:
    """Monte Carlo dependence measures of a process.

    ``delta[i, j]`` estimates the lag-``i`` dependence measure of coordinate
    ``j``; ``omega[i]`` the measure of ``max_j |x_ij - x*_ij|``.  ``*_se`` are
    batch standard errors.
    """

    q: float
    delta: np.ndarray
    delta_se: np.ndarray
    omega: np.ndarray
    omega_se: np.ndarray
    mc_samples: int
    n_batches: int

    @property
    def i_max(self) -> int:
        return self.delta.shape[0] - 1

    @property
    def p(self) -> int:
        return self.delta.shape[1]

    def cumulative(self, tail: bool = True) -> np.ndarray:
        """``Delta[m, j] = sum_{i >= m} delta[i, j]``, with geometric tail beyond ``i_max``."""
        return cumulative_measure(self.delta, tail)

    def tail_correction(self) -> np.ndarray:
        return np.array([geometric_tail(self.delta[:, j])[0] for j in range(self.p)])

    def dan_values(self, alpha: float, tail: bool = True) -> np.ndarray:
        return dan(self.delta, alpha, tail)

    def psi(self, alpha: float, tail: bool = True) -> float:
        """Uniform norm: max over coordinates of the dependence-adjusted norm."""
        return float(self.dan_values(alpha, tail).max())

    def upsilon(self, alpha: float, tail: bool = True) -> float:
        """Overall norm: q-norm over coordinates of the dependence-adjusted norms."""
        v = self.dan_values(alpha, tail)
        return float(np.sum(v ** self.q) ** (1.0 / self.q))

    def linf_dan(self, alpha: float, tail: bool = True) -> float:
        """Dependence-adjusted norm of ``|x_.|_inf`` from the max-coordinate measures.

        With the tail correction, each cumulative term is kept inside the
        bracket ``[max_j Delta_mj, |Delta_m.|_q]`` that the population
        quantities satisfy; without it the bracket holds exactly for the
        sample estimates.
        """
        om = cumulative_measure(self.omega[:, None], tail)[:, 0]
        if tail:
            D = self.cumulative(True)
            lo = D.max(axis=1)
            hi = np.sum(D ** self.q, axis=1) ** (1.0 / self.q)
            om = np.clip(om, lo, hi)
        m = np.arange(om.shape[0])
        return float(np.max((m + 1.0) ** alpha * om))

    def chain(self, alpha: float, tail: bool = False) -> tuple[float, float, float]:
        """``(Psi, |x_.|_inf norm, Upsilon)``, which is non-decreasing."""
        return self.psi(alpha, tail), self.linf_dan(alpha, tail), self.upsilon(alpha, tail)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "delta", "stderr"])
            for i in range(self.delta.shape[0]):
                for j in range(self.p):
                    w.writerow([i, j + 1, repr(float(self.delta[i, j])), repr(float(self.delta_se[i, j]))])

    def summary(self, alpha: float = 0.0) -> dict:
        psi, linf, ups = self.chain(alpha, tail=False)
        return {
            "q": self.q,
            "alpha": alpha,
            "i_max": self.i_max,
            "p": self.p,
            "mc_samples": self.mc_samples,
            "psi": psi,
            "linf_dan": linf,
            "upsilon": ups,
            "psi_tail_corrected": self.psi(alpha, True),
            "upsilon_tail_corrected": self.upsilon(alpha, True),
            "max_tail_correction": float(self.tail_correction().max()),
        }

    def write_summary(self, path, alpha: float = 0.0) -> None:
        lines = [f"{k} = {v!r}" for k, v in self.summary(alpha).items()]
        Path(path).write_text("\n".join(lines) + "\n")


def estimate_fdm(
    spec: ProcessSpec,
    q: float,
    i_max: int,
    mc: int,
    seed: int = 0,
    n_batches: int = 10,
) -> DependenceReport:
    """Estimate dependence measures for lags ``0..i_max`` from ``mc`` coupled pairs.

    Each pair shares the burn-in and every innovation except the one at time
    zero, which the coupled copy redraws from a separate stream.
    """
    if not q > 1:
        raise InvalidInputError("q must exceed 1")
    if i_max < 0 or mc < n_batches or n_batches < 2:
        raise InvalidInputError("need i_max >= 0, n_batches >= 2 and mc >= n_batches")
    check_moments(spec, q)
    p = spec.dimension
    sizes = np.full(n_batches, mc // n_batches)
    sizes[: mc % n_batches] += 1
    sums = np.zeros((n_batches, i_max + 1, p))
    osums = np.zeros((n_batches, i_max + 1))
    for b, size in enumerate(sizes):
        rng = seed_stream(seed, 21, b, _STREAM_SHARED)
        rng_prime = seed_stream(seed, 21, b, _STREAM_PRIME)
        state = spec.init_state(int(size))
        spec.run(spec.draw_innovations(rng, int(size), spec.burn_in), state)
        twin = {k: v.copy() for k, v in state.items()}
        eps = spec.draw_innovations(rng, int(size), i_max + 1)
        eps_prime = spec.draw_innovations(rng_prime, int(size), 1)[0]
        for i in range(i_max + 1):
            x = spec.step(state, eps[i])
            xs = spec.step(twin, eps_prime if i == 0 else eps[i])
            d = np.abs(x - xs) ** q
            sums[b, i] = d.sum(axis=0)
            osums[b, i] = d.max(axis=1).sum()
    delta = (sums.sum(axis=0) / mc) ** (1.0 / q)
    omega = (osums.sum(axis=0) / mc) ** (1.0 / q)
    per_batch = (sums / sizes[:, None, None]) ** (1.0 / q)
    oper = (osums / sizes[:, None]) ** (1.0 / q)
    se = per_batch.std(axis=0, ddof=1) / math.sqrt(n_batches)
    ose = oper.std(axis=0, ddof=1) / math.sqrt(n_batches)
    return DependenceReport(q=float(q), delta=delta, delta_se=se, omega=omega, omega_se=ose,
                            mc_samples=int(mc), n_batches=n_batches)


def geometric_tail(delta_col, points: int = TAIL_POINTS) -> tuple[float, float]:
    """Implied ``sum_{i > i_max} delta_i`` from a log-linear fit to the last
    ``points`` values.  Returns ``(tail, ratio)``."""
    d = np.asarray(delta_col, dtype=np.float64)
    last = d[-points:]
    idx = np.arange(d.size - last.size, d.size)
    pos = last > 0
    if not pos.any() or last[-1] == 0:
        return 0.0, 0.0
    if pos.sum() < 2:
        raise NonSummableError("too few positive dependence measures to extrapolate the tail")
    slope, icpt = np.polyfit(idx[pos], np.log(last[pos]), 1)
    r = math.exp(slope)
    if r >= 1:
        raise NonSummableError(
            f"dependence measures do not decay (fitted ratio {r:.4g}); "
            "the short-range dependence assumption (summable measures) is violated"
        )
    at_end = math.exp(icpt + slope * (d.size - 1))
    return at_end * r / (1 - r), r


def cumulative_measure(delta, tail: bool = True) -> np.ndarray:
    """Reverse cumulative sums ``Delta[m] = sum_{i >= m} delta[i]`` per column."""
    d = np.atleast_2d(np.asarray(delta, dtype=np.float64))
    if d.shape[0] == 1 and np.ndim(delta) == 1:
        d = d.T
    if not np.all(np.isfinite(d)) or np.any(d < 0):
        raise InvalidInputError("dependence table must be finite and nonnegative")
    D = np.cumsum(d[::-1], axis=0)[::-1]
    if tail:
        D = D + np.array([geometric_tail(d[:, j])[0] for j in range(d.shape[1])])
    return D


def dan(delta, alpha: float, tail: bool = True, horizon: int = 500) -> np.ndarray:
    """Dependence-adjusted norm ``sup_m (m+1)^alpha Delta_m`` per column.

    With ``tail`` the supremum also scans ``horizon`` lags past the table
    using the fitted geometric tail.
    """
    if alpha < 0:
        raise InvalidInputError("alpha must be >= 0")
    d = np.asarray(delta, dtype=np.float64)
    one_d = d.ndim == 1
    d = d[:, None] if one_d else d
    D = cumulative_measure(d, tail)
    m = np.arange(D.shape[0])
    out = np.max((m[:, None] + 1.0) ** alpha * D, axis=0)
    if tail and alpha > 0:
        for j in range(d.shape[1]):
            t, r = geometric_tail(d[:, j])
            if t > 0:
                k = np.arange(1, horizon + 1)
                ext = (m[-1] + k + 1.0) ** alpha * t * r ** (k - 1)
                out[j] = max(out[j], ext.max())
    return out[0] if one_d else out


# ---------------------------------------------------------------------------
# Rate exponents and regularization scaling


@dataclass(frozen=True)
class RateProfile:
    gamma: float
    q: float
    alpha_X: float
    alpha_e: float
    tau: float
    alpha: float
    nu: float
    rho: float
    lambda_regime: str
    lambda_formula: str
    sample_size_regime: str
    sample_size_formula: str
    B: float = 1.0


def rate_profile(gamma: float, q: float, alpha_X: float, alpha_e: float, B: float = 1.0) -> RateProfile:
    """Exponents of the convergence-rate theorem for moment orders ``gamma``
    (covariates) and ``q`` (errors) and dependence decay ``alpha_X``, ``alpha_e``.

    ``tau = q gamma / (q + gamma)``; ``nu`` is 1 when ``alpha_X >= 1/2 - 2/gamma``
    and ``gamma/4 - alpha_X gamma/2`` otherwise; ``rho`` is 1 when
    ``min(alpha_X, alpha_e) >= 1/2 - 1/tau`` and ``tau/2 - alpha tau`` otherwise.
    """
    if not (gamma > 2 and q > 2):
        raise InvalidInputError("need gamma > 2 and q > 2")
    if not (alpha_X >= 0 and alpha_e >= 0):
        raise InvalidInputError("dependence exponents must be nonnegative")
    tau = q * gamma / (q + gamma)
    alpha = min(alpha_X, alpha_e)
    nu = 1.0 if alpha_X >= 0.5 - 2.0 / gamma else gamma / 4.0 - alpha_X * gamma / 2.0
    rho = 1.0 if alpha >= 0.5 - 1.0 / tau else tau / 2.0 - alpha * tau
    if tau > 2:
        regime = "tau>2"
        lam = "sqrt(log p / n) M_e M_X + n^(rho/tau - 1) (log p)^(3/2) M_e |x|_inf-DAN"
    else:
        regime = "1<tau<=2"
        lam = "B p^(1/tau) n^(1/tau - 1) M_X M_e"
    if gamma > 4:
        ss_regime = "gamma>4"
        ss = ("M_X^4 s^2 log p / kappa^2 + s^(1/(1-2nu/gamma)) (log p)^(3/(2-4nu/gamma)) "
              "|x|_inf-DAN^(2/(1-2nu/gamma)) kappa^(1/(2nu/gamma-1))")
    else:
        ss_regime = "2<gamma<=4"
        ss = "M_X^(2/(1-2/gamma)) s^(1/(1-2/gamma)) p^(4/(gamma-2)) kappa^(-1/(1-2/gamma))"
    return RateProfile(gamma, q, alpha_X, alpha_e, tau, alpha, nu, rho, regime, lam, ss_regime, ss, B)


def theorem1_scaling(profile: RateProfile, s: int, p: int, n: int, M_X: float = 1.0, M_e: float = 1.0,
                     kappa: float = 1.0, linf: Optional[float] = None) -> dict:
    """Regularization lower bound and sample-size requirement for the error
    bounds, with every unspecified universal constant set to 1.

    ``linf`` is the dependence-adjusted norm of ``|x_.|_inf``; it defaults to
    ``p^(1/gamma)`` (nearly independent coordinates).
    """
    g, nu, tau, rho = profile.gamma, profile.nu, profile.tau, profile.rho
    linf = p ** (1.0 / g) if linf is None else linf
    lp = math.log(p)
    if profile.lambda_regime == "tau>2":
        lam = math.sqrt(lp / n) * M_e * M_X + n ** (rho / tau - 1) * lp ** 1.5 * M_e * linf
    else:
        lam = profile.B * p ** (1 / tau) * n ** (1 / tau - 1) * M_X * M_e
    if g > 4:
        e = 1 - 2 * nu / g
        n_req = (M_X ** 4 * s ** 2 * lp / kappa ** 2
                 + s ** (1 / e) * lp ** (3 / (2 * e)) * linf ** (2 / e) * kappa ** (-1 / e))
    else:
        e = 1 - 2 / g
        n_req = M_X ** (2 / e) * s ** (1 / e) * p ** (4 / (g - 2)) * kappa ** (-1 / e)
    return {"lambda_lower": lam, "n_required": n_req, "units": "up to universal constants"}


def theorem1_error_bounds(lam: float, s: int, kappa: float) -> dict:
    """l2, l1 and prediction error bounds implied by a valid ``lam``."""
    return {
        "l2": 4 * lam * math.sqrt(s) / kappa,
        "l1": 16 * lam * s / kappa,
        "prediction": 8 * lam ** 2 * s / kappa,
    }


def theorem2_scaling(profile: RateProfile, s: int, p: int, n: int, M_X: float = 1.0, M_e: float = 1.0,
                     sigma: float = 1.0, N_1: float = 1.0, eta: float = 1.0, L: float = 1.0,
                     linf1: Optional[float] = None, linf2: Optional[float] = None) -> dict:
    """Feasible regularization interval and sample-size requirement for sign
    consistency, with universal constants set to 1.

    ``linf1``/``linf2`` are the dependence-adjusted norms of the relevant and
    irrelevant blocks' sup-norms; they default to ``s^(1/gamma)`` and
    ``p^(1/gamma)``.
    """
    if not profile.tau > 2:
        raise UnsupportedRegimeError(f"sign-consistency scaling needs tau > 2, got tau = {profile.tau:g}")
    if not profile.gamma > 4:
        raise UnsupportedRegimeError(f"sign-consistency scaling needs gamma > 4, got {profile.gamma:g}")
    if not (1 <= s < p and n >= 1):
        raise InvalidInputError("need 1 <= s < p and n >= 1")
    g, nu, tau, rho = profile.gamma, profile.nu, profile.tau, profile.rho
    linf1 = s ** (1.0 / g) if linf1 is None else linf1
    linf2 = p ** (1.0 / g) if linf2 is None else linf2
    ls, lp = math.log(s), math.log(p)
    upper = n * N_1 * L / (2 * math.sqrt(s))
    lead = max(math.sqrt(s * sigma) / (eta * math.sqrt(N_1)), 1.0)
    lower = (lead * (math.sqrt(n * ls) * M_e * M_X + n ** (rho / tau) * ls ** 1.5 * M_e * linf1)
             + (math.sqrt(n * lp) * M_e * M_X + n ** (rho / tau) * lp ** 1.5 * M_e * linf2) / eta)
    e = 1 - 2 * nu / g
    terms = [
        M_X ** 4 * sigma * s ** 3 * ls / (eta ** 2 * N_1 ** 3),
        M_X ** 2 * lp / sigma ** 2,
        M_X ** 4 * s ** 2 * lp / (eta ** 2 * N_1 ** 2),
        (N_1 ** 3 * sigma / eta ** 2) ** (1 / (2 * e)) * (s * ls) ** (3 / (2 * e)) * linf1 ** (2 / e),
        (eta * N_1) ** (-1 / e) * s ** (1 / e) * lp ** (3 / (2 * e)) * linf1 ** (1 / e) * linf2 ** (1 / e),
        sigma ** (-1 / e) * lp ** (3 / (2 * e)) * linf2 ** (1 / e),
    ]
    n_req = float(sum(terms))
    return {
        "lambda_lower": float(lower),
        "lambda_upper": float(upper),
        "n_required": n_req,
        "feasible": bool(lower <= upper),
        "sample_size_ok": bool(n >= n_req),
        "units": "up to universal constants",
    }
