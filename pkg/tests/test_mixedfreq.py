import datetime as dt

import numpy as np
import pytest

from deplasso.core import InvalidInputError
from deplasso.mixedfreq import (
    Mode,
    NowcastProtocol,
    SeriesSpec,
    audit_no_lookahead,
    build_design,
    ingest_csv,
    load_manifest,
    rolling_evaluation,
    synthetic_fixture,
    weekly_aggregate,
)


def write(path, rows):
    path.write_text("date,value\n" + "".join(f"{d.isoformat()},{v}\n" for d, v in rows))
    return str(path)


def quarterly(tmp_path, n, values=None, start=2001):
    vals = values if values is not None else np.arange(n, dtype=float)
    rows = [(dt.date(start + k // 4, 3 * (k % 4) + 2, 10), v) for k, v in zip(range(n), vals)]
    return write(tmp_path / "y.csv", rows)


def monthly(tmp_path, name, n_quarters, values, start=2001):
    rows = [(dt.date(start + k // 12, k % 12 + 1, 1), values[k]) for k in range(3 * n_quarters)]
    return write(tmp_path / f"{name}.csv", rows)


def test_constant_logdiff_is_zero(tmp_path):
    files = {"y": quarterly(tmp_path, 8), "m": monthly(tmp_path, "m", 8, np.full(24, 5.0))}
    panel = ingest_csv(files, [SeriesSpec("m", "monthly", "logdiff")], SeriesSpec("y", "quarterly"))
    z = panel.flat("m")
    assert np.isnan(z[0]) and np.all(z[1:] == 0)


def test_monthly_lag_indexing(tmp_path):
    files = {"y": quarterly(tmp_path, 8), "m": monthly(tmp_path, "m", 8, np.arange(1, 25.0))}
    panel = ingest_csv(files, [SeriesSpec("m", "monthly")], SeriesSpec("y", "quarterly"))
    assert panel.blocks["m"].shape == (8, 3)
    # Quarter 2 holds months 4..6; z_{3i-b} counts back from its last month.
    assert [panel.lag_value("m", 2, b) for b in (0, 1, 2)] == [6.0, 5.0, 4.0]


def test_daily_trimming(tmp_path):
    days = []
    for mo in (1, 2, 3):
        d = dt.date(2001, mo, 1)
        k = 0
        while d.month == mo and k < 17:
            if d.weekday() < 5:
                days.append((d, float(k)))
                k += 1
            d += dt.timedelta(days=1)
    files = {"y": quarterly(tmp_path, 1), "d": write(tmp_path / "d.csv", days)}
    panel = ingest_csv(files, [SeriesSpec("d", "daily", days_per_month=16)], SeriesSpec("y", "quarterly"))
    assert panel.blocks["d"].shape == (1, 48)
    assert panel.blocks["d"][0, :16].tolist() == list(range(16))
    assert any("discarded 3" in n for n in panel.notes)


def test_short_months_and_bad_rows(tmp_path):
    days = [(dt.date(2001, 1, k), 1.0) for k in range(2, 10)]
    files = {"y": quarterly(tmp_path, 1), "d": write(tmp_path / "d.csv", days)}
    with pytest.raises(InvalidInputError, match="short months"):
        ingest_csv(files, [SeriesSpec("d", "daily", days_per_month=16)], SeriesSpec("y", "quarterly"))
    (tmp_path / "bad.csv").write_text("date,value\n2001-01-01,1\n2001-02-30,2\nxx,3\n")
    with pytest.raises(InvalidInputError, match="line 3.*line 4"):
        ingest_csv({"y": str(tmp_path / "bad.csv")}, [], SeriesSpec("y", "quarterly"))


@pytest.fixture(scope="module")
def panel(tmp_path_factory):
    man = synthetic_fixture(tmp_path_factory.mktemp("fx"), n_quarters=60, seed=3)
    return load_manifest(man)[0]


def test_ar_only_design(panel):
    d = build_design(panel, NowcastProtocol("forecast", {}, 1), 30)
    assert d.labels == ["const", "y_lag1"]
    assert np.all(d.X[:, 0] == 1) and np.allclose(d.X[:, 1], panel.target[d.quarters - 1])


def test_nowcast_regressor_sets(panel):
    lags = {"m1": 2}
    f = build_design(panel, NowcastProtocol("forecast", lags, 1), 30)
    n1 = build_design(panel, NowcastProtocol("nowcast1", lags, 1), 30)
    n2 = build_design(panel, NowcastProtocol("nowcast2", lags, 1), 30)
    cur1 = [c for c in n1.columns if c.kind == "cur"]
    assert len(cur1) == 1 and cur1[0].index == 0
    assert n1.x_origin[n1.labels.index("m1_cur0")] == panel.blocks["m1"][30, 0]
    assert set(f.labels) < set(n1.labels) < set(n2.labels)
    assert set(n2.labels) - set(n1.labels) == {"m1_cur1"}
    # Daily series: one month of 16 days is visible under nowcast1.
    d1 = build_design(panel, NowcastProtocol("nowcast1", {"d1": 0}, 0), 30)
    assert sum(c.kind == "cur" for c in d1.columns) == 16


def test_no_lookahead_everywhere(panel):
    for mode in Mode:
        d = build_design(panel, NowcastProtocol(mode, {"m1": 5, "d1": 20}, 2), 40)
        assert audit_no_lookahead(d) == d.times.size + d.t_origin.size


def test_audit_detects_leak(panel):
    d = build_design(panel, NowcastProtocol("nowcast1", {"m1": 2}, 1), 30)
    leaked = type(d)(**{**d.__dict__, "mode": Mode.FORECAST})
    with pytest.raises(AssertionError, match="look-ahead"):
        audit_no_lookahead(leaked)


def test_insufficient_history(panel):
    with pytest.raises(InvalidInputError):
        build_design(panel, NowcastProtocol("forecast", {}, 3), 2)


def test_weekly_aggregation(panel):
    w = weekly_aggregate(panel, "d1", days=4)
    assert w.blocks["d1"].shape == (panel.n_quarters, 12)
    assert np.isclose(w.blocks["d1"][5, 0], panel.blocks["d1"][5, :4].mean())


def test_perfect_foresight_is_zero(panel):
    # y_t = 0.5 + y_{t-1}: exactly linear in (const, y_lag1) and full rank.
    y = 1.0 + 0.5 * np.arange(panel.n_quarters)
    exact = type(panel)(**{**panel.__dict__, "target": y})
    res = rolling_evaluation(exact, {"f": NowcastProtocol("forecast", {}, 1)}, ["ar_ols"], 40, 59, select=False)
    s = res.summary()["f:ar_ols"]
    assert s["MAE"] < 1e-10 and s["RMSE"] < 1e-10 and s["MAD"] < 1e-10


def test_rolling_outputs(panel, tmp_path):
    protos = {m: NowcastProtocol(m, {"m1": 2, "m2": 2}, 1) for m in ("forecast", "nowcast1")}
    res = rolling_evaluation(panel, protos, ["lasso_bic", "ar_ols"], 40, 59)
    s = res.summary()
    for col, v in s.items():
        assert v["MAE"] <= v["RMSE"] + 1e-15
    assert s["nowcast1:lasso_bic"]["RMSE"] < s["forecast:lasso_bic"]["RMSE"]
    res.write(tmp_path)
    cum = np.loadtxt(tmp_path / "cum_abs.csv", delimiter=",", skiprows=1, usecols=range(1, 5))
    assert np.all(np.diff(cum, axis=0) >= 0)
    assert (tmp_path / "scores.csv").read_text().startswith("metric,forecast:lasso_bic")
