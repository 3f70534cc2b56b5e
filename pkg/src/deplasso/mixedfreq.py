"""Mixed-frequency panels, forecasting and nowcasting designs, and rolling
out-of-sample evaluation.

Quarter ``i`` of a series with ``m`` values per quarter occupies flat
positions ``(i-1) m + 1 .. i m`` (1-based), so ``z[i m - b]`` is lag ``b``
counted back from the quarter's last value.  Within a quarter, position
``pos`` (0-based) belongs to month ``pos // (m / 3)``.
"""
from __future__ import annotations

import csv
import datetime as dt
import io
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import InvalidInputError, RegressionProblem, seed_stream
from .lasso import SolverOptions, fit_path_bic
from .midas import MidasModel, MidasOptions, fit_midas, ols_init

log = logging.getLogger(__name__)

ESTIMATORS = ("lasso_bic", "midas_empirical", "ar_ols", "ar_lasso")


class Frequency(str, Enum):
    QUARTERLY = "quarterly"
    MONTHLY = "monthly"
    DAILY = "daily"


class Transform(str, Enum):
    NONE = "none"
    DIFF = "diff"
    LOGDIFF = "logdiff"


class Mode(str, Enum):
    FORECAST = "forecast"
    NOWCAST1 = "nowcast1"
    NOWCAST2 = "nowcast2"

    @property
    def months(self) -> int:
        """Months of the target quarter already observed."""
        return {"forecast": 0, "nowcast1": 1, "nowcast2": 2}[self.value]


@dataclass(frozen=True)
class SeriesSpec:
    """One input series.  ``days_per_month`` applies to daily series, which
    keep the first that many trading days of every month."""

    name: str
    frequency: Frequency
    transform: Transform = Transform.NONE
    source: str = ""
    days_per_month: int = 16

    def __post_init__(self):
        object.__setattr__(self, "frequency", Frequency(self.frequency))
        object.__setattr__(self, "transform", Transform(self.transform))
        if not self.name:
            raise InvalidInputError("series needs a name")
        if self.frequency is Frequency.DAILY and self.days_per_month < 1:
            raise InvalidInputError("days_per_month must be >= 1")

    @property
    def per_quarter(self) -> int:
        return {Frequency.QUARTERLY: 1, Frequency.MONTHLY: 3,
                Frequency.DAILY: 3 * self.days_per_month}[self.frequency]

    @property
    def per_month(self) -> int:
        if self.frequency is Frequency.QUARTERLY:
            raise InvalidInputError("quarterly series have no within-quarter months")
        return self.per_quarter // 3


def quarter_of(d: dt.date) -> tuple[int, int]:
    return d.year, (d.month - 1) // 3 + 1


def quarter_label(q: tuple[int, int]) -> str:
    return f"{q[0]}Q{q[1]}"


def _quarter_range(first, last) -> list:
    out, (y, k) = [], first
    while (y, k) <= last:
        out.append((y, k))
        y, k = (y + 1, 1) if k == 4 else (y, k + 1)
    return out


@dataclass(frozen=True)
class MixedFreqPanel:
    """Quarterly target plus high-frequency blocks.

    ``blocks[name]`` has shape ``(Q, m_l)``; missing values are NaN.
    """

    target: np.ndarray
    quarters: tuple
    specs: Mapping[str, SeriesSpec]
    blocks: Mapping[str, np.ndarray]
    target_name: str = "y"
    notes: tuple = ()

    def __post_init__(self):
        Q = len(self.quarters)
        if self.target.shape != (Q,):
            raise InvalidInputError("target must have one value per quarter")
        for name, b in self.blocks.items():
            if b.shape != (Q, self.specs[name].per_quarter):
                raise InvalidInputError(f"series {name!r} must have shape ({Q}, {self.specs[name].per_quarter})")

    @property
    def n_quarters(self) -> int:
        return len(self.quarters)

    @property
    def labels(self) -> list:
        return [quarter_label(q) for q in self.quarters]

    def index_of(self, label: str) -> int:
        return self.labels.index(label)

    def flat(self, name: str) -> np.ndarray:
        return self.blocks[name].ravel()

    def lag_value(self, name: str, i: int, b: int) -> float:
        """``z_{l, i m_l - b}`` with 1-based quarter ``i``."""
        m = self.specs[name].per_quarter
        k = i * m - b
        if not 1 <= k <= self.n_quarters * m:
            raise InvalidInputError(f"position {k} outside series {name!r}")
        return float(self.flat(name)[k - 1])

    def availability(self, name: str, mode) -> np.ndarray:
        """Within-quarter positions of ``name`` observed under ``mode``."""
        spec = self.specs[name]
        month = np.arange(spec.per_quarter) // spec.per_month
        return month < Mode(mode).months


# ---------------------------------------------------------------- ingestion

def read_series_csv(path) -> list:
    """``date,value`` rows (header optional) as ``(date, float)`` pairs."""
    rows, bad = [], []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), 1):
            if not rec or not "".join(rec).strip():
                continue
            if lineno == 1 and rec[0].strip().lower() in ("date", "observation_date"):
                continue
            try:
                if len(rec) < 2:
                    raise ValueError("need date and value")
                rows.append((dt.date.fromisoformat(rec[0].strip()), float(rec[1])))
            except ValueError as exc:
                bad.append(f"line {lineno}: {exc}")
    if bad:
        raise InvalidInputError(f"unparseable rows in {path}: " + "; ".join(bad))
    return rows


def _apply_transform(x: np.ndarray, tr: Transform, name: str) -> np.ndarray:
    if tr is Transform.NONE:
        return x
    if tr is Transform.LOGDIFF:
        if np.any(x[np.isfinite(x)] <= 0):
            raise InvalidInputError(f"logdiff of {name!r} needs positive values")
        x = np.log(x)
    out = np.full_like(x, np.nan)
    out[1:] = x[1:] - x[:-1]
    return out


def _place(spec: SeriesSpec, obs: list, quarters: list, notes: list) -> np.ndarray:
    """Map dated observations into a ``(Q, m)`` block."""
    qi = {q: k for k, q in enumerate(quarters)}
    m = spec.per_quarter
    block = np.full((len(quarters), m), np.nan)
    obs = sorted(obs)
    dates = [d for d, _ in obs]
    if len(set(dates)) != len(dates):
        raise InvalidInputError(f"duplicate dates in series {spec.name!r}")
    if spec.frequency is Frequency.QUARTERLY:
        groups = {}
        for d, v in obs:
            groups.setdefault(quarter_of(d), []).append(v)
        for q, vs in groups.items():
            if len(vs) != 1:
                raise InvalidInputError(f"series {spec.name!r}: {len(vs)} values in quarter {quarter_label(q)}")
            if q in qi:
                block[qi[q], 0] = vs[0]
        return block
    months = {}
    for d, v in obs:
        months.setdefault((d.year, d.month), []).append(v)
    per = spec.per_month
    short, trimmed = [], 0
    for (y, mo), vs in months.items():
        if spec.frequency is Frequency.MONTHLY and len(vs) != 1:
            raise InvalidInputError(f"series {spec.name!r}: {len(vs)} values in month {y}-{mo:02d}")
        if len(vs) < per:
            short.append(f"{y}-{mo:02d} has {len(vs)} of {per}")
            continue
        trimmed += len(vs) - per
        q = (y, (mo - 1) // 3 + 1)
        if q in qi:
            j = (mo - 1) % 3
            block[qi[q], j * per:(j + 1) * per] = vs[:per]
    if short:
        raise InvalidInputError(f"series {spec.name!r} has short months: " + "; ".join(short))
    if trimmed:
        notes.append(f"{spec.name}: discarded {trimmed} trading days beyond {per} per month")
    if spec.frequency is Frequency.DAILY:
        # A quarter touched by data must be complete.
        present = {(d.year, (d.month - 1) // 3 + 1) for d in dates}
        partial = [quarter_label(q) for q in quarters if q in present and np.isnan(block[qi[q]]).any()]
        if partial:
            raise InvalidInputError(f"series {spec.name!r}: incomplete quarters " + ", ".join(partial))
    return block


def ingest_csv(files: Mapping[str, str], specs: Sequence[SeriesSpec], target: SeriesSpec) -> MixedFreqPanel:
    """Build a panel from per-series ``date,value`` files.

    The quarter range is that of the target.  Daily series are trimmed
    before the transformation, which then runs over the series in time
    order; values a transformation cannot produce stay NaN and the rows that
    need them are dropped at design time.
    """
    if target.frequency is not Frequency.QUARTERLY:
        raise InvalidInputError("target must be quarterly")
    notes: list = []
    t_obs = read_series_csv(files[target.name])
    if not t_obs:
        raise InvalidInputError("target file is empty")
    qs = sorted({quarter_of(d) for d, _ in t_obs})
    quarters = _quarter_range(qs[0], qs[-1])
    y = _place(target, t_obs, quarters, notes)[:, 0]
    y = _apply_transform(y, target.transform, target.name)
    blocks, spec_map = {}, {}
    for spec in specs:
        if spec.name == target.name or spec.name in spec_map:
            raise InvalidInputError(f"duplicate series name {spec.name!r}")
        if spec.name not in files:
            raise InvalidInputError(f"no file given for series {spec.name!r}")
        b = _place(spec, read_series_csv(files[spec.name]), quarters, notes)
        b = _apply_transform(b.ravel(), spec.transform, spec.name).reshape(b.shape)
        blocks[spec.name], spec_map[spec.name] = b, spec
    for msg in notes:
        log.info(msg)
    return MixedFreqPanel(y, tuple(quarters), spec_map, blocks, target.name, tuple(notes))


def load_manifest(path) -> tuple[MixedFreqPanel, dict]:
    """Panel from a YAML manifest with ``target`` and ``series`` entries,
    each giving ``name``, ``file`` (relative to the manifest), ``frequency``,
    ``transform`` and, for daily data, ``days_per_month``."""
    import yaml

    path = Path(path)
    cfg = yaml.safe_load(path.read_text()) or {}
    try:
        tdef = dict(cfg["target"])
        sdefs = [dict(s) for s in cfg.get("series", [])]
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"manifest needs 'target' and 'series': {exc}") from exc
    files = {}

    def mk(d):
        files[d["name"]] = str(path.parent / d.pop("file"))
        return SeriesSpec(**{k: d[k] for k in ("name", "frequency", "transform", "days_per_month") if k in d},
                          source=files[d["name"]])

    tdef.setdefault("frequency", "quarterly")
    tspec = mk(tdef)
    specs = [mk(d) for d in sdefs]
    return ingest_csv(files, specs, tspec), cfg


def weekly_aggregate(panel: MixedFreqPanel, name: str, days: int = 4, new_name: Optional[str] = None) -> MixedFreqPanel:
    """Replace (or add as ``new_name``) a daily series by means over
    non-overlapping ``days``-day blocks within each month; leftover days at
    the end of a month are discarded."""
    spec = panel.specs[name]
    if spec.frequency is not Frequency.DAILY:
        raise InvalidInputError(f"{name!r} is not daily")
    per_w = spec.days_per_month // days
    if per_w < 1:
        raise InvalidInputError("fewer trading days per month than days per week")
    B = panel.blocks[name].reshape(panel.n_quarters, 3, spec.days_per_month)[:, :, :per_w * days]
    W = B.reshape(panel.n_quarters, 3, per_w, days).mean(-1).reshape(panel.n_quarters, 3 * per_w)
    wspec = replace(spec, name=new_name or name, days_per_month=per_w)
    specs, blocks = dict(panel.specs), dict(panel.blocks)
    if new_name is None:
        del specs[name], blocks[name]
    specs[wspec.name], blocks[wspec.name] = wspec, W
    return replace(panel, specs=specs, blocks=blocks)


# ------------------------------------------------------------------ designs

@dataclass(frozen=True)
class NowcastProtocol:
    mode: Mode = Mode.FORECAST
    lags: Mapping[str, int] = field(default_factory=dict)  # B_l
    ar_order: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "lags", dict(self.lags))
        if self.ar_order < 0 or any(b < 0 for b in self.lags.values()):
            raise InvalidInputError("AR order and lag budgets must be >= 0")


@dataclass(frozen=True)
class Column:
    """A design column: ``kind`` is ``const``, ``ar``, ``cur`` (target-quarter
    value at position ``index``) or ``lag`` (lag ``index`` from the end of
    the previous quarter)."""

    series: str
    kind: str
    index: int

    @property
    def label(self) -> str:
        if self.kind == "const":
            return "const"
        if self.kind == "ar":
            return f"{self.series}_lag{self.index}"
        if self.kind == "cur":
            return f"{self.series}_cur{self.index}"
        return f"{self.series}_lag{self.index}"


def design_columns(panel: MixedFreqPanel, protocol: NowcastProtocol) -> list:
    """Columns in order: constant, AR lags, then per series the observed
    target-quarter values newest first followed by lags ``0..B_l``."""
    cols = [Column("", "const", 0)] + [Column(panel.target_name, "ar", j) for j in range(1, protocol.ar_order + 1)]
    for name, B in protocol.lags.items():
        if name not in panel.specs:
            raise InvalidInputError(f"unknown series {name!r} in lag budget")
        avail = np.flatnonzero(panel.availability(name, protocol.mode))
        cols += [Column(name, "cur", int(p)) for p in avail[::-1]]
        cols += [Column(name, "lag", b) for b in range(B + 1)]
    return cols


def boundary(t: int, mode) -> float:
    """Information boundary for target quarter ``t`` (0-based), in quarters."""
    return t + Mode(mode).months / 3.0


def _entry(panel, col: Column, t: int) -> tuple[float, float]:
    """Value and release time (end of its month or quarter) of a column at
    target quarter ``t``."""
    if col.kind == "const":
        return 1.0, -np.inf
    if col.kind == "ar":
        q = t - col.index
        return (float(panel.target[q]) if q >= 0 else np.nan), q + 1.0
    spec = panel.specs[col.series]
    m = spec.per_quarter
    f = t * m + col.index if col.kind == "cur" else t * m - 1 - col.index
    if f < 0:
        return np.nan, np.nan
    q, pos = divmod(f, m)
    return float(panel.blocks[col.series][q, pos]), q + (pos // spec.per_month + 1) / 3.0


@dataclass(frozen=True)
class DesignSet:
    """Training rows (all quarters before the origin with complete data) and
    the origin row.  ``times`` holds each entry's release time."""

    columns: tuple
    X: np.ndarray
    y: np.ndarray
    quarters: np.ndarray
    times: np.ndarray
    origin: int
    x_origin: np.ndarray
    y_origin: float
    t_origin: np.ndarray
    mode: Mode
    dropped: int

    @property
    def labels(self) -> list:
        return [c.label for c in self.columns]

    def problem(self) -> RegressionProblem:
        return RegressionProblem(self.y, self.X, self.labels)


def _row(panel, cols, t):
    vals, times = zip(*(_entry(panel, c, t) for c in cols))
    return np.array(vals), np.array(times)


def build_design(panel: MixedFreqPanel, protocol: NowcastProtocol, origin: int) -> DesignSet:
    """Rows for target quarters ``t < origin`` plus the origin row, built
    with the same availability rule throughout."""
    if not 0 <= origin < panel.n_quarters:
        raise InvalidInputError(f"origin {origin} outside the panel")
    if origin - protocol.ar_order < 0:
        raise InvalidInputError(f"origin {origin} has fewer than {protocol.ar_order} past quarters for the AR terms")
    cols = design_columns(panel, protocol)
    rows, ys, ts, qs = [], [], [], []
    dropped = 0
    for t in range(origin):
        x, tm = _row(panel, cols, t)
        if np.all(np.isfinite(x)) and np.isfinite(panel.target[t]):
            rows.append(x), ys.append(panel.target[t]), ts.append(tm), qs.append(t)
        else:
            dropped += 1
    xo, to = _row(panel, cols, origin)
    if not np.all(np.isfinite(xo)):
        raise InvalidInputError(f"origin row {panel.labels[origin]} has missing regressors")
    if len(rows) <= len(cols) // 4 + 1:
        raise InvalidInputError(f"only {len(rows)} complete training rows before {panel.labels[origin]}")
    if dropped:
        log.info("origin %s: dropped %d incomplete rows", panel.labels[origin], dropped)
    return DesignSet(tuple(cols), np.array(rows), np.array(ys), np.array(qs), np.array(ts), origin, xo,
                     float(panel.target[origin]), to, protocol.mode, dropped)


def audit_no_lookahead(design: DesignSet) -> int:
    """Check every entry of every row against its quarter's information
    boundary; return the number of entries checked."""
    checked = 0
    for t, tm in zip(list(design.quarters) + [design.origin], list(design.times) + [design.t_origin]):
        lim = boundary(t, design.mode)
        bad = [design.columns[k].label for k in np.flatnonzero(tm > lim + 1e-12)]
        if bad:
            raise AssertionError(f"look-ahead at quarter index {t}: {bad}")
        checked += tm.size
    return checked


# -------------------------------------------------------------- estimators

def _ols(X, y):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef


def _lasso_predict(X, y, x0, grid_size=100):
    # Column 0 is the constant; it becomes the unpenalized intercept.
    Z = X[:, 1:]
    scale = Z.std(0)
    scale[scale == 0] = 1.0
    path = fit_path_bic(RegressionProblem(y, Z / scale), grid_size, SolverOptions(fit_intercept=True))
    fit = path.selected
    return float(fit.predict((x0[1:] / scale)[None, :])[0]), fit.converged


def _ar_columns(design: DesignSet) -> list:
    return [k for k, c in enumerate(design.columns) if c.kind in ("const", "ar")]


def _midas_model(design: DesignSet, delta=(0.0, 0.0)) -> MidasModel:
    cols = design.columns
    ar = [k for k, c in enumerate(cols) if c.kind == "ar"]
    groups, k = [], 0
    while k < len(cols):
        c = cols[k]
        if c.kind in ("cur", "lag"):
            j = k
            while j < len(cols) and cols[j].series == c.series and cols[j].kind in ("cur", "lag"):
                j += 1
            groups.append((k, j))
            k = j
        else:
            k += 1
    # Design column 0 is the constant; the MIDAS intercept replaces it.
    return ols_init(RegressionProblem(design.y, design.X), ar, groups, intercept=True, delta=delta)


def _estimate(est: str, design: DesignSet) -> tuple[float, bool]:
    X, y, x0 = design.X, design.y, design.x_origin
    if est == "ar_ols":
        k = _ar_columns(design)
        return float(x0[k] @ _ols(X[:, k], y)), True
    if est == "ar_lasso":
        k = _ar_columns(design)
        if len(k) == 1:
            return float(y.mean()), True
        return _lasso_predict(X[:, k], y, x0[k])
    if est == "lasso_bic":
        return _lasso_predict(X, y, x0)
    if est == "midas_empirical":
        init = _midas_model(design)
        fit = fit_midas(RegressionProblem(y, X), init, MidasOptions(max_iter=100))
        return float(fit.model.predict(x0[None, :])[0]), fit.converged
    raise InvalidInputError(f"unknown estimator {est!r}; choose from {ESTIMATORS}")


def _bic(rss, n, k):
    return n * np.log(max(rss, 1e-300) / n) + k * np.log(n)


def select_orders(panel: MixedFreqPanel, protocol: NowcastProtocol, first_origin: int, max_ar: int = 4,
                  lag_candidates: Optional[Mapping[str, Sequence[int]]] = None) -> NowcastProtocol:
    """BIC choice of the AR order (OLS) and of each series' lag count (MIDAS
    with equal-weight start), on rows before ``first_origin``.  Every
    candidate is scored on the rows valid under the longest candidate."""
    lag_candidates = lag_candidates or {k: sorted({b for b in (v, panel.specs[k].per_quarter - 1) if b <= v})
                                        for k, v in protocol.lags.items()}
    widest = replace(protocol, ar_order=max_ar, lags={k: max(v) for k, v in lag_candidates.items()})
    base = build_design(panel, widest, first_origin)
    keep = base.quarters

    def sub(proto):
        d = build_design(panel, proto, first_origin)
        mask = np.isin(d.quarters, keep)
        return replace(d, X=d.X[mask], y=d.y[mask], quarters=d.quarters[mask], times=d.times[mask])

    n = keep.size
    scores = {}
    for a in range(0, max_ar + 1):
        d = sub(replace(protocol, ar_order=a, lags={}))
        r = d.y - d.X @ _ols(d.X, d.y)
        scores[a] = _bic(float(r @ r), n, a + 1)
    a_best = min(scores, key=lambda a: (scores[a], a))
    lags = dict(widest.lags)
    for name, cands in lag_candidates.items():
        best = None
        for B in cands:
            trial = replace(protocol, ar_order=a_best, lags={**lags, name: B})
            d = sub(trial)
            fit = fit_midas(RegressionProblem(d.y, d.X), _midas_model(d), MidasOptions(max_iter=50))
            k = fit.model.to_vector().size
            sc = _bic(fit.rss, n, k)
            if best is None or sc < best[0]:
                best = (sc, B)
        lags[name] = best[1]
    return replace(protocol, ar_order=a_best, lags=lags)


@dataclass
class EvaluationResult:
    origins: list
    columns: list
    errors: np.ndarray  # (origins, columns), NaN where an estimator failed
    failures: dict
    protocols: dict

    def summary(self) -> dict:
        out = {}
        for k, c in enumerate(self.columns):
            e = self.errors[:, k]
            e = e[np.isfinite(e)]
            out[c] = {"MAD": float(np.median(np.abs(e))) if e.size else np.nan,
                      "MAE": float(np.abs(e).mean()) if e.size else np.nan,
                      "RMSE": float(np.sqrt((e ** 2).mean())) if e.size else np.nan,
                      "n_ok": int(e.size), "n_failed": int(self.failures.get(c, 0))}
        return out

    def _csv(self, rows, header) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else repr(float(v)) for v in r])
        return buf.getvalue()

    def scores_csv(self) -> str:
        s = self.summary()
        return self._csv([[m] + [s[c][m] for c in self.columns] for m in ("MAD", "MAE", "RMSE", "n_ok", "n_failed")],
                         ["metric"] + self.columns)

    def _curve(self, power) -> np.ndarray:
        inc = np.where(np.isfinite(self.errors), np.abs(self.errors) ** power, 0.0)
        return np.cumsum(inc, axis=0)

    def curve_csv(self, power: int) -> str:
        C = self._curve(power)
        return self._csv([[o] + list(C[k]) for k, o in enumerate(self.origins)], ["origin"] + self.columns)

    def errors_csv(self) -> str:
        return self._csv([[o] + list(self.errors[k]) for k, o in enumerate(self.origins)], ["origin"] + self.columns)

    def write(self, out_dir) -> list:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {"scores.csv": self.scores_csv(), "cum_abs.csv": self.curve_csv(1), "cum_sq.csv": self.curve_csv(2),
                 "errors.csv": self.errors_csv()}
        for k, v in files.items():
            (out / k).write_text(v)
        return [out / k for k in files]


def rolling_evaluation(panel: MixedFreqPanel, protocols: Mapping[str, NowcastProtocol], estimators: Sequence[str],
                       first_origin: int, last_origin: int, select: bool = True, max_ar: int = 4,
                       audit: bool = True) -> EvaluationResult:
    """Expanding-window one-quarter predictions at origins
    ``first_origin..last_origin`` (inclusive, 0-based quarter indices).

    With ``select`` the AR order and lag counts are chosen once by BIC on
    the rows before the first origin and then held fixed.  Columns of the
    result are ``"<protocol>:<estimator>"``.
    """
    bad = set(estimators) - set(ESTIMATORS)
    if bad:
        raise InvalidInputError(f"unknown estimators {sorted(bad)}; choose from {ESTIMATORS}")
    if not 0 < first_origin <= last_origin < panel.n_quarters:
        raise InvalidInputError("origin range outside the panel")
    chosen = {k: (select_orders(panel, p, first_origin, max_ar) if select else p) for k, p in protocols.items()}
    columns = [f"{k}:{e}" for k in chosen for e in estimators]
    origins = list(range(first_origin, last_origin + 1))
    E = np.full((len(origins), len(columns)), np.nan)
    failures: dict = {}
    for r, o in enumerate(origins):
        c = 0
        for pname, proto in chosen.items():
            design = build_design(panel, proto, o)
            if audit:
                audit_no_lookahead(design)
            for est in estimators:
                try:
                    pred, _ = _estimate(est, design)
                    if not np.isfinite(pred):
                        raise FloatingPointError("non-finite prediction")
                    E[r, c] = design.y_origin - pred
                except Exception as exc:
                    failures[columns[c]] = failures.get(columns[c], 0) + 1
                    log.warning("%s failed at %s: %s", columns[c], panel.labels[o], exc)
                c += 1
    return EvaluationResult([panel.labels[o] for o in origins], columns, E, failures, chosen)


# ------------------------------------------------------------------ fixture

def _weekdays(year: int, month: int) -> list:
    d = dt.date(year, month, 1)
    out = []
    while d.month == month:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def synthetic_fixture(out_dir, n_quarters: int = 80, seed: int = 0, signal: float = 1.0, noise: float = 0.3,
                      start_year: int = 2000) -> Path:
    """Write CSV files and a manifest for a panel in which the target
    quarter's first-month value of ``m1`` carries the signal:

        y_i = 0.3 y_{i-1} + signal * m1[i, month 1] + noise * u_i

    with an uninformative monthly series ``m2`` and a daily series ``d1``
    (16 trading days kept per month).  Returns the manifest path.
    """
    import yaml

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = seed_stream(seed, 41)
    quarters = _quarter_range((start_year, 1), (start_year + (n_quarters - 1) // 4, (n_quarters - 1) % 4 + 1))
    months = [(y, 3 * (k - 1) + j + 1) for y, k in quarters for j in range(3)]
    m1 = rng.standard_normal(len(months))
    m2 = rng.standard_normal(len(months))
    y = np.zeros(len(quarters))
    u = rng.standard_normal(len(quarters))
    for i in range(len(quarters)):
        y[i] = 0.3 * (y[i - 1] if i else 0.0) + signal * m1[3 * i] + noise * u[i]

    def write(name, rows):
        with (out / f"{name}.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "value"])
            for d, v in rows:
                w.writerow([d.isoformat(), repr(float(v))])

    write("y", [(dt.date(q[0], 3 * q[1] - 1, 15), v) for q, v in zip(quarters, y)])
    write("m1", [(dt.date(yy, mm, 1), v) for (yy, mm), v in zip(months, m1)])
    write("m2", [(dt.date(yy, mm, 1), v) for (yy, mm), v in zip(months, m2)])
    daily = []
    for yy, mm in months:
        for d in _weekdays(yy, mm):
            daily.append((d, rng.standard_normal()))
    write("d1", daily)
    manifest = {
        "target": {"name": "y", "file": "y.csv", "transform": "none"},
        "series": [
            {"name": "m1", "file": "m1.csv", "frequency": "monthly", "transform": "none"},
            {"name": "m2", "file": "m2.csv", "frequency": "monthly", "transform": "none"},
            {"name": "d1", "file": "d1.csv", "frequency": "daily", "transform": "none", "days_per_month": 16},
        ],
    }
    path = out / "manifest.yaml"
    path.write_text(yaml.safe_dump(manifest, sort_keys=False))
    return path
