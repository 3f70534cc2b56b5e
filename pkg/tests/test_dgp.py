import json

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from deplasso.core import InvalidInputError
from deplasso.dgp import (
    Innovation,
    ProcessSpec,
    almon_weights,
    block_sizes,
    build_model_matrices,
    companion_radius,
    linear_process_coefs,
    model_covariance,
    simulate_dataset,
    simulate_garch11,
    simulate_process,
    simulate_var,
    true_beta,
    var_covariance,
)

# High-precision evaluation (mpmath, 30 digits) of
# exp(d1 j + d2 j^2) / sum_k exp(2 d1 k + 2 d2 k^2), d = (0.5, -1), j = 1..5.
ALMON_5 = [1.6376852723484466, 0.13442939332710156, 0.0014933756651087847,
           2.2451995047634967e-6, 4.568270813377347e-10]


def test_zero_var_returns_innovations():
    spec = ProcessSpec("VAR", coefs=(np.zeros((3, 3)),), burn_in=7)
    x = simulate_var(spec, 50, seed=3)
    raw = ProcessSpec("IIDStudentT", dimension=3, burn_in=7)
    assert_allclose(x, simulate_process(raw, 50, seed=3), rtol=0, atol=0)


def test_ar1_autocorrelation():
    spec = ProcessSpec("VAR", coefs=(np.array([[0.5]]),))
    x = simulate_var(spec, 100_000, seed=11)[:, 0]
    r1 = np.corrcoef(x[1:], x[:-1])[0, 1]
    assert abs(r1 - 0.5) < 0.02


def test_unstable_var_rejected():
    with pytest.raises(InvalidInputError, match="unstable"):
        ProcessSpec("VAR", coefs=(np.array([[1.01]]),))


def test_model1_layout():
    A1, A2, A3, A4 = build_model_matrices("M1", 100)
    assert np.count_nonzero(A1) == 2 * 25 + 8 * 100 + 2 * 25
    assert A1[0, 0] == 0.15 and A4[0, 0] == -0.1
    assert A1[10, 10] == 0.075 and A4[10, 10] == -0.05
    assert not A2.any() and not A3.any()
    assert companion_radius([A1, A2, A3, A4]) < 1


def test_model2_entries():
    (A1,) = build_model_matrices("M2", 100)
    assert np.isclose(A1[0, 1], -0.16)
    assert np.isclose(A1[0, 0], 0.4)
    assert A1[0, 5] == 0


def test_block_sizes_rule():
    assert block_sizes(100) == [5, 5] + [10] * 8 + [5, 5]
    with pytest.raises(InvalidInputError, match="divisible by 10"):
        block_sizes(101)


def test_model1_cross_block_independence():
    coefs = build_model_matrices("M1", 40)
    x = simulate_var(ProcessSpec("VAR", coefs=tuple(coefs), innovation=Innovation("normal")), 100_000, seed=5)
    C = np.corrcoef(x.T)
    assert abs(C[0, 5]) < 0.05 and abs(C[2, 15]) < 0.05
    S = model_covariance("M1", 40)
    assert S[0, 5] == 0.0 and S[2, 15] == 0.0


def test_var_covariance_matches_scalar_formula():
    # AR(1): var = 1 / (1 - a^2).
    assert np.isclose(var_covariance([np.array([[0.6]])])[0, 0], 1 / (1 - 0.36))


def test_var_stationary_mean():
    x = simulate_var(ProcessSpec("VAR", coefs=tuple(build_model_matrices("M2", 20))), 100_000, seed=8)
    se = x.std(0) / np.sqrt(x.shape[0]) * 3  # generous for positive autocorrelation
    assert np.all(np.abs(x.mean(0)) < 5 * se)


def test_garch_degenerate_variance():
    e = simulate_garch11((0.7, 0.0, 0.0), 1_000_000, seed=1)
    assert abs(e.var() / 0.7 - 1) < 0.03


def test_garch_unconditional_variance():
    e = simulate_garch11((0.1, 0.1, 0.8), 1_000_000, seed=2)
    assert abs(e.var() - 1.0) < 0.05


def test_garch_deterministic_and_validated():
    assert_allclose(simulate_garch11((0.1, 0.1, 0.8), 100, seed=4), simulate_garch11((0.1, 0.1, 0.8), 100, seed=4),
                    rtol=0, atol=0)
    with pytest.raises(InvalidInputError):
        simulate_garch11((0.0, 0.1, 0.8), 10)
    with pytest.raises(InvalidInputError):
        simulate_garch11((0.1, 0.5, 0.6), 10)


def test_student_t_moments():
    x = Innovation("t", 5).draw(np.random.default_rng(0), 1_000_000)
    assert abs(x.var() / (5 / 3) - 1) < 0.05
    assert stats.kurtosis(x) > 0
    z = Innovation("t", 5, standardize=True).draw(np.random.default_rng(0), 1_000_000)
    assert abs(z.var() - 1) < 0.05


def test_almon_weights():
    assert_allclose(almon_weights(4, (0, 0)), np.full(4, 0.25), rtol=1e-15)
    assert_allclose(almon_weights(5, (0.5, -1)), ALMON_5, rtol=1e-13)
    for d in [(3.0, -0.1), (-2.0, -2.0), (0.1, 0.4)]:
        assert np.all(almon_weights(6, d) > 0)
    tb = almon_weights(5, (0.5, -1), "textbook")
    assert np.isclose(tb.sum(), 1.0)


def test_true_beta_models():
    assert_allclose(true_beta("M1", 100, 5)[:5], np.array([-1, 1, -1, 1, -1]) / np.sqrt(5))
    b3 = true_beta("M3", 100, 5)
    assert_allclose(b3[:5], ALMON_5, rtol=1e-13)
    b20 = true_beta("M4", 100, 20)
    assert_allclose(b20[5:10], ALMON_5, rtol=1e-13)
    assert_allclose(b20[10:20], almon_weights(10), rtol=1e-13)
    for m in ("M1", "M2", "M3", "M4"):
        b = true_beta(m, 100, 5)
        assert np.count_nonzero(b) == 5 and not b[5:].any()
    with pytest.raises(InvalidInputError):
        true_beta("M3", 100, 7)


def test_dataset_shapes_and_determinism(tmp_path):
    a = simulate_dataset("M1", 50, 100, 5, seed=9)
    b = simulate_dataset("M1", 50, 100, 5, seed=9)
    assert a.y.shape == (60,) and a.X.shape == (60, 100)
    assert_allclose(a.y, b.y, rtol=0, atol=0)
    tr = a.train()
    assert tr.X.shape == (50, 101)
    assert tr.X[0, 0] == a.y0 and tr.X[1, 0] == a.y[0]
    Z, yt = a.test()
    assert Z.shape == (10, 101) and yt.shape == (10,)
    a.to_csv(tmp_path / "a.csv")
    b.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    a.write_truth(tmp_path / "t.json")
    assert json.loads((tmp_path / "t.json").read_text())["phi"] == 0.6
    c = simulate_dataset("M1", 50, 100, 5, seed=9, replicate=1)
    assert not np.allclose(a.y, c.y)


def test_dataset_recursion_holds():
    d = simulate_dataset("M2", 80, 100, 10, seed=1, innovation=Innovation("normal"))
    Z = d.design()
    resid = d.y - Z @ d.truth
    # The residuals are the error draws: uncorrelated with the regressors.
    assert abs(np.corrcoef(resid, Z[:, 0])[0, 1]) < 0.3
    assert abs(resid.var() - 1) < 0.5


def test_linear_process_truncation():
    A = linear_process_coefs(lambda l: 0.5 ** l * np.eye(2))
    assert 0.5 ** (len(A) - 1) >= 1e-8 > 0.5 ** len(A)
