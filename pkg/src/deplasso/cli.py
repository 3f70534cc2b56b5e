"""Command-line entry point: ``deplasso <command> --config run.yaml --out DIR``.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.  Every
output directory receives a ``manifest.json`` holding the resolved
configuration that produced it.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .conditions import bounded_correlation_sigma, condition_report
from .core import InvalidInputError
from .dependence import estimate_fdm, rate_profile, theorem1_scaling, theorem2_scaling
from .dgp import Innovation, ProcessSpec, build_model_matrices, linear_process_coefs, model_covariance, simulate_dataset
from .experiments import ExperimentConfig, run_experiment, stderr_progress
from .mixedfreq import NowcastProtocol, load_manifest, rolling_evaluation, synthetic_fixture, weekly_aggregate

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


class ConfigError(InvalidInputError):
    pass


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_path: Optional[str]
    config: dict
    seed: Optional[int]
    version: str
    output_dir: str

    def write(self, out: Path) -> None:
        (out / "manifest.json").write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, (np.integer, np.floating)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        cfg = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if cfg is None:
        return {}
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping of settings")
    return cfg


def _take(cfg: dict, allowed: set) -> None:
    extra = set(cfg) - allowed
    if extra:
        raise ConfigError(f"unknown settings {sorted(extra)}; allowed: {sorted(allowed)}")


def _innovation(d) -> Innovation:
    d = dict(d or {})
    _take(d, {"law", "df", "standardize"})
    return Innovation(d.get("law", "t"), float(d.get("df", 5.0)), bool(d.get("standardize", True)))


def _write_key_values(path: Path, d: dict) -> None:
    path.write_text("".join(f"{k} = {v!r}\n" for k, v in d.items()))


# ----------------------------------------------------------------- commands

def cmd_simulate(cfg: dict, out: Path, args) -> dict:
    _take(cfg, {"model_id", "n", "p", "s", "seed", "replicates", "holdout", "burn_in", "innovation", "almon_variant"})
    resolved = {"model_id": "M1", "n": 100, "p": 100, "s": 5, "seed": 0, "replicates": 1, "holdout": 10,
                "burn_in": 500, "innovation": {"law": "t", "df": 5.0, "standardize": True},
                "almon_variant": "printed", **cfg}
    if args.seed is not None:
        resolved["seed"] = args.seed
    inn = _innovation(resolved["innovation"])
    for r in range(int(resolved["replicates"])):
        ds = simulate_dataset(resolved["model_id"], int(resolved["n"]), int(resolved["p"]), int(resolved["s"]),
                              int(resolved["seed"]), replicate=r, holdout=int(resolved["holdout"]),
                              burn_in=int(resolved["burn_in"]), innovation=inn,
                              almon_variant=resolved["almon_variant"])
        ds.to_csv(out / f"dataset_r{r}.csv")
        ds.write_truth(out / f"truth_r{r}.json")
        _progress(f"simulate: replicate {r} written")
    return resolved


def cmd_experiment(cfg: dict, out: Path, args) -> dict:
    settings = dict(cfg)
    write_conditions = bool(settings.pop("conditions", True))
    if args.seed is not None:
        settings["seed"] = args.seed
    if args.mc_reps is not None:
        settings["mc_reps"] = args.mc_reps
    if args.estimators is not None:
        settings["estimators"] = [e.strip() for e in args.estimators.split(",") if e.strip()]
    try:
        config = ExperimentConfig.from_dict(settings)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    result = run_experiment(config, threads=args.threads, progress=_progress)
    result.write(out)
    if write_conditions:
        lines = []
        for m in config.model_ids:
            for p in config.ps:
                S = model_covariance(m, p)
                for s in config.ss:
                    rep = condition_report(S, list(range(s)), s)
                    lines.append(f"[{m} p={p} s={s}]\n" + "".join(f"{k} = {v!r}\n" for k, v in rep.as_dict().items()))
        (out / "conditions.txt").write_text("\n".join(lines))
    return {**config.to_dict(), "conditions": write_conditions}


def _process_spec(d: dict) -> ProcessSpec:
    d = dict(d)
    _take(d, {"kind", "coefs", "model_id", "p", "lag_decay", "dimension", "garch", "innovation", "burn_in"})
    kind = d.get("kind", "IIDStudentT")
    inn = _innovation(d.get("innovation", {"law": "normal"}))
    burn = int(d.get("burn_in", 500))
    if "model_id" in d:
        coefs = build_model_matrices(d["model_id"], int(d["p"]))
        return ProcessSpec("VAR", coefs=tuple(coefs), innovation=inn, burn_in=burn)
    if kind == "LinearProcess" and "lag_decay" in d:
        # A_l = decay^l * I_p, truncated.
        p, rho = int(d.get("dimension", 1)), float(d["lag_decay"])
        coefs = linear_process_coefs(lambda l: rho ** l * np.eye(p))
        return ProcessSpec(kind, coefs=tuple(coefs), innovation=inn, burn_in=burn)
    return ProcessSpec(kind, dimension=int(d.get("dimension", 1)), coefs=tuple(np.asarray(c, dtype=float) for c in d.get("coefs", [])),
                       garch=tuple(d.get("garch", (0.1, 0.1, 0.8))), innovation=inn, burn_in=burn)


def cmd_depnorm(cfg: dict, out: Path, args) -> dict:
    _take(cfg, {"process", "q", "i_max", "mc", "alpha", "seed", "n_batches"})
    resolved = {"process": {"kind": "IIDStudentT"}, "q": 2.0, "i_max": 20, "mc": 10000, "alpha": 0.0, "seed": 0,
                "n_batches": 10, **cfg}
    if args.seed is not None:
        resolved["seed"] = args.seed
    if args.mc_reps is not None:
        resolved["mc"] = args.mc_reps
    spec = _process_spec(resolved["process"])
    rep = estimate_fdm(spec, float(resolved["q"]), int(resolved["i_max"]), int(resolved["mc"]),
                       seed=int(resolved["seed"]), n_batches=int(resolved["n_batches"]))
    rep.to_csv(out / "delta.csv")
    rep.write_summary(out / "summary.txt", float(resolved["alpha"]))
    return resolved


def _sigma(d) -> tuple[np.ndarray, dict]:
    if isinstance(d, list):
        return np.asarray(d, dtype=float), {"matrix": d}
    d = dict(d)
    kind = d.get("kind", "identity")
    p = int(d.get("p", 10))
    if kind == "identity":
        return np.eye(p), d
    if kind == "equicorrelation":
        r = float(d["rho"])
        return (1 - r) * np.eye(p) + r * np.ones((p, p)), d
    if kind == "bounded_correlation":
        return bounded_correlation_sigma(p, int(d["s"]), float(d["c"]), int(d.get("seed", 0)),
                                         bool(d.get("worst_case", False))), d
    if kind == "model":
        return model_covariance(d["model_id"], p), d
    raise ConfigError(f"unknown sigma kind {kind!r}")


def cmd_conditions(cfg: dict, out: Path, args) -> dict:
    _take(cfg, {"sigma", "relevant", "s", "c", "seed"})
    resolved = {"sigma": {"kind": "identity", "p": 10}, "s": 3, "c": 0.999999, "seed": 0, **cfg}
    if args.seed is not None:
        resolved["seed"] = args.seed
    S, sd = _sigma(resolved["sigma"])
    s = int(resolved["s"])
    relevant = list(resolved.get("relevant", range(s)))
    rep = condition_report(S, relevant, s, float(resolved["c"]), int(resolved["seed"]))
    _write_key_values(out / "report.txt", rep.as_dict())
    resolved["relevant"] = relevant
    resolved["sigma"] = sd
    return resolved


def cmd_rates(cfg: dict, out: Path, args) -> dict:
    keys1 = {"gamma", "q", "alpha_X", "alpha_e", "B", "s", "p", "n", "M_X", "M_e", "kappa", "linf",
             "sigma", "N_1", "eta", "L", "linf1", "linf2"}
    _take(cfg, keys1)
    r = {"gamma": 8.0, "q": 8.0, "alpha_X": 0.45, "alpha_e": 0.45, "B": 1.0, "s": 5, "p": 100, "n": 200,
         "M_X": 1.0, "M_e": 1.0, "kappa": 1.0, "sigma": 1.0, "N_1": 1.0, "eta": 1.0, "L": 1.0, **cfg}
    prof = rate_profile(float(r["gamma"]), float(r["q"]), float(r["alpha_X"]), float(r["alpha_e"]), float(r["B"]))
    res = {f"profile.{k}": v for k, v in asdict(prof).items()}
    t1 = theorem1_scaling(prof, int(r["s"]), int(r["p"]), int(r["n"]), r["M_X"], r["M_e"], r["kappa"], r.get("linf"))
    res.update({f"theorem1.{k}": v for k, v in t1.items()})
    try:
        t2 = theorem2_scaling(prof, int(r["s"]), int(r["p"]), int(r["n"]), r["M_X"], r["M_e"], r["sigma"], r["N_1"],
                              r["eta"], r["L"], r.get("linf1"), r.get("linf2"))
        res.update({f"theorem2.{k}": v for k, v in t2.items()})
    except InvalidInputError as exc:
        res["theorem2.unsupported"] = str(exc)
    _write_key_values(out / "rates.txt", res)
    return r


def _origin(panel, v) -> int:
    if isinstance(v, str):
        try:
            return panel.index_of(v)
        except ValueError as exc:
            raise ConfigError(f"origin {v!r} is not a quarter of the panel") from exc
    return int(v) if v >= 0 else panel.n_quarters + int(v)


def cmd_nowcast(cfg: dict, out: Path, args) -> dict:
    _take(cfg, {"manifest", "synthetic", "protocols", "estimators", "first_origin", "last_origin", "select",
                "max_ar", "weekly"})
    resolved = {"synthetic": None, "estimators": ["lasso_bic", "midas_empirical", "ar_ols", "ar_lasso"],
                "first_origin": -40, "last_origin": -1, "select": True, "max_ar": 4, "weekly": None, **cfg}
    if args.seed is not None and resolved.get("synthetic") is not None:
        resolved["synthetic"] = {**resolved["synthetic"], "seed": args.seed}
    if args.estimators is not None:
        resolved["estimators"] = [e.strip() for e in args.estimators.split(",") if e.strip()]
    if "manifest" in resolved:
        panel, _ = load_manifest(resolved["manifest"])
    elif resolved["synthetic"] is not None:
        syn = dict(resolved["synthetic"])
        _take(syn, {"n_quarters", "seed", "signal", "noise"})
        man = synthetic_fixture(out / "fixture", **syn)
        panel, _ = load_manifest(man)
    else:
        raise ConfigError("nowcast needs 'manifest' or 'synthetic'")
    if resolved["weekly"]:
        w = dict(resolved["weekly"])
        panel = weekly_aggregate(panel, w["series"], int(w.get("days", 4)), w.get("name"))
    protos = resolved.get("protocols")
    if not protos:
        lags = {k: sp.per_quarter - 1 for k, sp in panel.specs.items()}
        protos = {m: {"lags": lags, "ar_order": 1} for m in ("forecast", "nowcast1", "nowcast2")}
    protocols = {}
    for name, pd_ in protos.items():
        pd_ = dict(pd_)
        _take(pd_, {"mode", "lags", "ar_order"})
        protocols[name] = NowcastProtocol(pd_.get("mode", name), pd_.get("lags", {}), int(pd_.get("ar_order", 1)))
    resolved["protocols"] = {k: {"mode": p.mode.value, "lags": dict(p.lags), "ar_order": p.ar_order}
                             for k, p in protocols.items()}
    res = rolling_evaluation(panel, protocols, resolved["estimators"], _origin(panel, resolved["first_origin"]),
                             _origin(panel, resolved["last_origin"]), bool(resolved["select"]), int(resolved["max_ar"]))
    res.write(out)
    resolved["selected"] = {k: {"ar_order": p.ar_order, "lags": dict(p.lags)} for k, p in res.protocols.items()}
    for msg in panel.notes:
        _progress(f"nowcast: {msg}")
    _progress(f"nowcast: {len(res.origins)} origins, {len(res.columns)} columns")
    return resolved


COMMANDS = {"simulate": cmd_simulate, "experiment": cmd_experiment, "nowcast": cmd_nowcast,
            "depnorm": cmd_depnorm, "conditions": cmd_conditions, "rates": cmd_rates}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deplasso", description="Lasso under serial dependence: simulation, "
                                 "Monte Carlo tables, nowcasting, dependence norms and condition diagnostics.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML settings file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--mc-reps", type=int, dest="mc_reps")
        sp.add_argument("--estimators", help="comma-separated estimator names")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = _load_config(args.config)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        out.mkdir(parents=True, exist_ok=True)
        resolved = COMMANDS[args.command](cfg, out, args)
        RunManifest(args.command, args.config, resolved, args.seed, __version__, str(out)).write(out)
    except (InvalidInputError, KeyError, TypeError) as exc:
        print(f"deplasso {args.command}: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"deplasso {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
