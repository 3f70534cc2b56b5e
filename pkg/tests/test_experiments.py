import numpy as np
import pytest

from deplasso.core import InvalidInputError
from deplasso.experiments import (
    ExperimentConfig,
    estimation_metrics,
    forecast_metrics,
    run_experiment,
    run_replicate,
)


def test_estimation_metrics_examples():
    assert estimation_metrics([[0.6, 1.0]], [0.6, 1.0]) == (0.0, 0.0)
    ae, rmse = estimation_metrics([[0.7, 0.9]], [0.6, 1.0])
    assert np.isclose(ae, 0.1) and np.isclose(rmse, 0.1)
    with pytest.raises(InvalidInputError):
        estimation_metrics([[1.0, 2.0, 3.0]], [1.0, 2.0])


def test_forecast_metrics_examples():
    assert forecast_metrics(np.ones((1, 10)), np.ones((1, 10))) == (0.0, 0.0)
    afe, rmsfe = forecast_metrics([[1.0, -1.0]], [[0.0, 0.0]], h=2)
    assert afe == 1.0 and rmsfe == 1.0
    with pytest.raises(InvalidInputError):
        forecast_metrics([[1.0]], [[0.0]], h=2)
    with pytest.raises(InvalidInputError):
        forecast_metrics([[np.nan, 1.0]], [[0.0, 0.0]], h=2)


def test_config_validation():
    with pytest.raises(InvalidInputError):
        ExperimentConfig(mc_reps=0)
    with pytest.raises(InvalidInputError, match="divisible"):
        ExperimentConfig(ps=(105,))
    with pytest.raises(InvalidInputError):
        ExperimentConfig(estimators=("ridge",))
    with pytest.raises(InvalidInputError):
        ExperimentConfig.from_dict({"bogus": 1})


def small(**kw):
    base = dict(ns=(50,), ps=(100,), ss=(5,), mc_reps=2, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_run_is_deterministic(tmp_path):
    a = run_experiment(small(mc_reps=1))
    b = run_experiment(small(mc_reps=1))
    a.write(tmp_path / "a")
    b.write(tmp_path / "b")
    for f in ("estimation.csv", "forecast.csv", "replicates.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    head = (tmp_path / "a" / "estimation.csv").read_text().splitlines()[0]
    assert head == "model,estimator,n,p,s,metric,value,stderr"


def test_replicate_order_invariance():
    cfg = small(estimators=("lasso_bic",), mc_reps=3)
    rows = run_experiment(cfg).rows
    recs = [run_replicate(cfg, ("M1", 50, 100, 5), r)[0] for r in (2, 0, 1)]
    ae = np.mean([r.abs_err for r in recs]) / 101
    assert np.isclose(rows[0].AE, ae, rtol=1e-14)


def test_threads_do_not_change_results():
    cfg = small(estimators=("lasso_bic",), mc_reps=4)
    a = run_experiment(cfg, threads=1)
    b = run_experiment(cfg, threads=2)
    assert a.table_csv(["AE", "RMSE"]) == b.table_csv(["AE", "RMSE"])


def test_lasso_only_has_no_midas_rows():
    res = run_experiment(small(estimators=("lasso_bic",)))
    assert {r.estimator for r in res.rows} == {"lasso_bic"}
    assert all(r.AE >= 0 and r.RMSFE >= 0 for r in res.rows)


def test_failures_are_counted(monkeypatch):
    import deplasso.experiments as ex

    def boom(*a, **k):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(ex, "_midas_estimate", boom)
    res = run_experiment(small())
    row = res.row("M1", "midas", 50, 100, 5)
    assert row.n_failed == 2 and row.n_ok == 0
    assert all("solver exploded" in r.detail for r in res.records if r.estimator == "midas")
    assert "failed" in res.text_table()
