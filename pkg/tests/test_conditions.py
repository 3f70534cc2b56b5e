import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from deplasso.conditions import (
    PartitionedSigma,
    bounded_correlation_sigma,
    condition_report,
    eta_margin,
    in_cone,
    irrepresentable_all_signs,
    irrepresentable_check,
    project_cone,
    restricted_eigenvalue,
    sign_consistency,
    sparse_min_eigenvalue,
)
from deplasso.core import Coefficients, InvalidInputError


def cone_grid_min_2d(S, points=200_001):
    """Minimum Rayleigh quotient over unit vectors in the 2-D cones of both
    singleton supports."""
    t = np.linspace(0, 2 * np.pi, points)
    U = np.stack([np.cos(t), np.sin(t)], 1)
    best = np.inf
    for j in (0, 1):
        mask = np.abs(U[:, 1 - j]) <= 3 * np.abs(U[:, j])
        V = U[mask]
        best = min(best, np.min(np.einsum("ij,jk,ik->i", V, S, V)))
    return best


def random_cone_search(S, s, samples, rng):
    p = S.shape[0]
    best = np.inf
    for J in itertools.combinations(range(p), s):
        J = list(J)
        Jc = [k for k in range(p) if k not in J]
        u = rng.standard_normal((samples, p))
        u[:, Jc] *= rng.uniform(0, 1, (samples, 1)) ** 2
        ratio = np.abs(u[:, Jc]).sum(1) / np.abs(u[:, J]).sum(1)
        u[:, Jc] *= np.minimum(1.0, 3.0 / ratio)[:, None]
        q = np.einsum("ij,jk,ik->i", u, S, u) / (u ** 2).sum(1)
        best = min(best, q.min())
    return best


@pytest.mark.parametrize("p,s", [(4, 1), (6, 3), (8, 8), (30, 3)])
def test_identity_kappa_is_one(p, s):
    assert restricted_eigenvalue(np.eye(p), s)[0] == 1.0


def test_diag_kappa():
    v, method = restricted_eigenvalue(np.diag([2.0, 0.5]), 1)
    assert method == "exact_small"
    assert np.isclose(v, 0.5, rtol=1e-6)
    assert np.isclose(v, cone_grid_min_2d(np.diag([2.0, 0.5])), rtol=0.02)


def test_correlated_2d_against_grid():
    S = np.array([[1.0, 0.8], [0.8, 1.0]])
    assert np.isclose(restricted_eigenvalue(S, 1)[0], cone_grid_min_2d(S), rtol=0.02)


def test_equicorrelation_against_random_search():
    S = 0.7 * np.eye(6) + 0.3
    v, _ = restricted_eigenvalue(S, 2)
    ref = random_cone_search(S, 2, 7000, np.random.default_rng(0))
    assert v <= ref * 1.0 + 1e-12
    assert np.isclose(v, ref, rtol=0.02)


def test_kappa_below_sparse_eigenvalues(rng):
    B = rng.standard_normal((8, 8))
    S = B @ B.T / 8 + 0.1 * np.eye(8)
    v, _ = restricted_eigenvalue(S, 2)
    smin, exact = sparse_min_eigenvalue(S, 2)
    assert exact and v <= smin + 1e-10
    assert v >= np.linalg.eigvalsh(S)[0] - 1e-12


def test_non_psd_rejected():
    with pytest.raises(InvalidInputError):
        restricted_eigenvalue(np.diag([1.0, -0.5]), 1)


def test_large_p_uses_sparse_bound():
    v, method = restricted_eigenvalue(0.5 * np.eye(40) + 0.5 * np.diag(np.ones(40)), 2)
    assert method == "sparse_eig_bound" and np.isclose(v, 1.0)


def test_cone_projection_lands_in_cone(rng):
    J = [0, 2]
    V = rng.standard_normal((200, 7)) * np.r_[0.1, 3, 0.1, 3, 3, 3, 3]
    P = project_cone(V, J)
    for u in P:
        assert in_cone(u, J, slack=1e-9)
    inside = np.array([[1.0, 0.1, 1.0, 0.1, 0, 0, 0]])
    np.testing.assert_allclose(project_cone(inside, J), inside)


def test_irrepresentable_identity_and_blocks():
    part = PartitionedSigma.from_sigma(np.eye(5), [0, 1])
    assert irrepresentable_check(part, [1, -1]) == 0.0
    assert irrepresentable_all_signs(part) == (0.0, True)
    S = np.eye(4)
    S[2:, 0] = S[0, 2:] = 0.9
    part = PartitionedSigma.from_sigma(S, [0, 1])
    assert np.isclose(irrepresentable_check(part, [1, 1]), 0.9)


def test_partition_reassembles(rng):
    B = rng.standard_normal((6, 6))
    S = B @ B.T
    part = PartitionedSigma.from_sigma(S, [1, 4])
    np.testing.assert_array_equal(part.assemble(), S)
    np.testing.assert_array_equal(part.sigma21, part.sigma12.T)


def test_all_signs_small_case():
    S = np.eye(3)
    S[2, :2] = S[:2, 2] = [0.3, -0.4]
    part = PartitionedSigma.from_sigma(S, [0, 1])
    v, exact = irrepresentable_all_signs(part)
    assert exact and np.isclose(v, 0.7)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 6))
def test_enumeration_equals_row_l1(seed, s):
    r = np.random.default_rng(seed)
    p = s + 4
    S = np.eye(p)
    S[s:, :s] = r.uniform(-0.3, 0.3, (p - s, s))
    S[:s, s:] = S[s:, :s].T
    part = PartitionedSigma.from_sigma(S, range(s))
    v, _ = irrepresentable_all_signs(part)
    assert np.isclose(v, np.abs(part.sigma21).sum(1).max())
    v_bound, exact = irrepresentable_all_signs(part, max_enum_s=0)
    assert not exact and np.isclose(v, v_bound)


def test_irrelevant_permutation_and_monotonicity(rng):
    B = rng.standard_normal((7, 7))
    S = B @ B.T / 7 + np.eye(7)
    part = PartitionedSigma.from_sigma(S, [0, 1, 2])
    v = irrepresentable_all_signs(part)[0]
    perm = [0, 1, 2, 6, 4, 5, 3]
    vp = irrepresentable_all_signs(PartitionedSigma.from_sigma(S[np.ix_(perm, perm)], [0, 1, 2]))[0]
    assert np.isclose(v, vp)
    smaller = irrepresentable_all_signs(PartitionedSigma.from_sigma(S[:6, :6], [0, 1, 2]))[0]
    assert smaller <= v + 1e-12


def test_singular_sigma11_names_n1():
    S = np.ones((3, 3))
    part = PartitionedSigma.from_sigma(S, [0, 1])
    with pytest.raises(InvalidInputError, match="N_1 = 0"):
        irrepresentable_check(part, [1, 1])


def test_bounded_correlation_construction():
    for worst in (False, True):
        S = bounded_correlation_sigma(12, 3, 0.5, seed=1, worst_case=worst)
        part = PartitionedSigma.from_sigma(S, [0, 1, 2])
        assert irrepresentable_all_signs(part)[0] < 1
    rep = condition_report(bounded_correlation_sigma(12, 3, 0.5, worst_case=True), [0, 1, 2], c=0.5)
    assert rep.example2_bound_holds and rep.irrep_value < 1


def test_eta_and_report():
    assert eta_margin(0.3) == 0.7 and eta_margin(1.4) == 0.0
    rep = condition_report(np.eye(6), [0, 1])
    assert rep.kappa_lower == 1.0 and rep.irrep_value == 0.0 and rep.irrep_holds_eta == 1.0


def test_sign_consistency():
    b = np.array([1.0, 0.0, -2.0])
    assert sign_consistency(b, Coefficients(b))
    assert not sign_consistency(np.array([1.0, 0.1, -2.0]), b)
    assert sign_consistency(2 * b, b)
