"""Command-line front end.

Subcommands:

    optimize  run the full pipeline for one model and report tau_opt, R_opt
    sweep-a   large-scale (and optionally finite-T) optimum over a list of a
    figure1   finite-T vs large-scale tau_opt over a grid of (a, T)
    validate  run the cross-check suites; exit code reflects the outcome
    mc        Monte Carlo training-phase entropy for the XOR model

Exit codes: 0 success, 2 domain/config error, 3 validation failure,
4 boundary-continuity (A2) violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .derivatives import DerivativeConfig, check_a2, mutual_info_limit
from .errors import A2ViolationError, DomainError, NumericalError
from .finite import EnumerationInstance, coupon_expected_unique, mc_entropy, xor_finite_tau_opt
from .models import BilinearModel, GainDistribution, XorModel, bilinear_mi, xor_surface
from .optimize import optimal_tau

log = logging.getLogger("trainbound")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_A2 = 4

OUTPUT_DIR_ENV = "TRAINBOUND_OUTPUT_DIR"
RESULT_COLUMNS = ("model", "a", "T", "method", "tau_opt", "rate_opt")
MODES = ("optimize", "sweep-a", "figure1", "validate", "mc")


@dataclass
class ExperimentConfig:
    mode: str = "optimize"
    model: str = "xor"
    a: float = 1.0
    a_list: list = field(default_factory=lambda: [1.0])
    T_list: list = field(default_factory=lambda: [10, 100, 1000, 10000])
    T: int = 100
    T_tau: int = 25
    gain_mean: float = 0.0
    gain_std: float = 1.0
    grid_points: int = 1000
    refine_tol: float = 1e-8
    fd_step: float = 1e-4
    richardson_levels: int = 3
    a2_tol: float = 1e-5
    a2_points: int = 9
    samples: int = 1_000_000
    seed: Optional[int] = None
    budget: int = 10**8
    validate_size: int = 20_000
    out: Optional[str] = None
    format: Optional[str] = None
    no_timestamp: bool = False
    round_channels: bool = False
    workers: int = 1
    inject_fault: bool = False

    def derivative_config(self) -> DerivativeConfig:
        return DerivativeConfig(step=self.fd_step, richardson_levels=self.richardson_levels, tolerance=self.a2_tol)


def parse_number(text) -> float:
    """Accept plain floats, fractions like 3/4, and the constant e (e.g. 1/e)."""
    if isinstance(text, (int, float)):
        return float(text)
    text = str(text).strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return parse_number(num) / parse_number(den)
    if text == "e":
        return math.e
    return float(text)


def parse_list(text, convert=parse_number) -> list:
    if isinstance(text, list):
        return [convert(v) for v in text]
    return [convert(v) for v in str(text).split(",") if v.strip()]


def _int(text) -> int:
    value = parse_number(text)
    if value != int(value):
        raise ValueError(f"{text!r} is not an integer")
    return int(value)


_CONVERTERS = {
    "a": parse_number,
    "a_list": parse_list,
    "T_list": lambda v: parse_list(v, _int),
    "T": _int,
    "T_tau": _int,
    "gain_mean": float,
    "gain_std": float,
    "grid_points": int,
    "refine_tol": float,
    "fd_step": float,
    "richardson_levels": int,
    "a2_tol": float,
    "a2_points": int,
    "samples": _int,
    "seed": int,
    "budget": _int,
    "validate_size": int,
    "workers": int,
}


def _add_options(p: argparse.ArgumentParser) -> None:
    s = argparse.SUPPRESS
    p.add_argument("--config", default=s, help="JSON file with option defaults (flags win)")
    p.add_argument("--show-config", action="store_true", default=s, help="print the effective configuration and exit")
    p.add_argument("--model", choices=("xor", "bilinear"), default=s)
    p.add_argument("--a", default=s, help="XOR channel density, e.g. 1, 0.25 or 1/e")
    p.add_argument("--a-list", dest="a_list", default=s, help="comma-separated list of a")
    p.add_argument("--T-list", dest="T_list", default=s, help="comma-separated block lengths")
    p.add_argument("--T", default=s, help="block length (mc)")
    p.add_argument("--T-tau", dest="T_tau", default=s, help="training length (mc)")
    p.add_argument("--gain-mean", dest="gain_mean", default=s)
    p.add_argument("--gain-std", dest="gain_std", default=s)
    p.add_argument("--grid-points", dest="grid_points", default=s)
    p.add_argument("--refine-tol", dest="refine_tol", default=s)
    p.add_argument("--fd-step", dest="fd_step", default=s)
    p.add_argument("--richardson-levels", dest="richardson_levels", default=s)
    p.add_argument("--a2-tol", dest="a2_tol", default=s)
    p.add_argument("--a2-points", dest="a2_points", default=s, help="tau values at which A2 is checked (optimize)")
    p.add_argument("--samples", default=s)
    p.add_argument("--seed", default=s)
    p.add_argument("--budget", default=s, help="state budget for exhaustive enumeration")
    p.add_argument("--validate-size", dest="validate_size", default=s)
    p.add_argument("--out", default=s, help="output file ('-' for stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=s)
    p.add_argument("--no-timestamp", dest="no_timestamp", action="store_true", default=s)
    p.add_argument("--round-channels", dest="round_channels", action="store_true", default=s,
                   help="round a*T to the nearest integer instead of skipping")
    p.add_argument("--workers", default=s)
    p.add_argument("--inject-fault", dest="inject_fault", action="store_true", default=s, help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trainbound", description="Training-based mutual information bound.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        _add_options(sub.add_parser(mode))
    return parser


def resolve_config(ns: argparse.Namespace) -> tuple[ExperimentConfig, bool]:
    """Defaults, then the optional config file, then command-line flags."""
    given = vars(ns).copy()
    show = bool(given.pop("show_config", False))
    merged: dict = {}
    config_path = given.pop("config", None)
    if config_path:
        with open(config_path, encoding="utf-8") as f:
            loaded = json.load(f)
        if not isinstance(loaded, dict):
            raise DomainError("config file must hold a JSON object")
        merged.update({k.replace("-", "_"): v for k, v in loaded.items()})
    merged.update(given)

    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(merged) - known
    if unknown:
        raise DomainError(f"unknown configuration keys: {sorted(unknown)}")
    values = {}
    for key, value in merged.items():
        convert = _CONVERTERS.get(key)
        try:
            values[key] = convert(value) if convert and value is not None else value
        except (TypeError, ValueError) as exc:
            raise DomainError(f"bad value for {key}: {value!r} ({exc})") from exc
    cfg = ExperimentConfig(**values)
    if cfg.mode == "mc" and cfg.seed is None:
        raise DomainError("mc mode needs --seed")
    if cfg.seed is None:
        cfg.seed = 0
    return cfg, show


def _meta(cfg: ExperimentConfig) -> dict:
    meta = {"tool": "trainbound", "version": __version__}
    if not cfg.no_timestamp:
        meta["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return meta


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: list[dict], columns=RESULT_COLUMNS) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _output_path(cfg: ExperimentConfig, default_name: str) -> Optional[Path]:
    """None means stdout."""
    if cfg.out == "-":
        return None
    if cfg.out:
        return Path(cfg.out)
    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if env_dir:
        return Path(env_dir) / default_name
    return None


def _emit(text: str, path: Optional[Path]) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    log.info("wrote %s", path)


# -- model plumbing -----------------------------------------------------------


def _bilinear_model(cfg: ExperimentConfig) -> BilinearModel:
    return BilinearModel(GainDistribution.normal(cfg.gain_mean, cfg.gain_std))


def large_scale_optimum(a: float, cfg: ExperimentConfig) -> dict:
    """XOR pipeline: surface, derivatives, boundary-continuity checks, cI, tau_opt."""
    dcfg = cfg.derivative_config()
    surface = xor_surface(XorModel(a))
    probe = np.linspace(0.05, 0.95, cfg.a2_points) if cfg.a2_points > 0 else []
    reports = [check_a2(surface, float(t), dcfg) for t in probe]
    for r in reports:
        if not r.passed:
            raise A2ViolationError(f"A2 check failed at tau={r.tau}", r)
    result = optimal_tau(
        lambda t: mutual_info_limit(surface, t, dcfg, override_a2=True), cfg.grid_points, cfg.refine_tol
    )
    if 0.0 < result.tau_opt < 1.0:
        at_opt = check_a2(surface, result.tau_opt, dcfg)
        reports.append(at_opt)
        if not at_opt.passed:
            raise A2ViolationError(f"A2 check failed at tau_opt={result.tau_opt}", at_opt)
    return {"result": result, "a2": reports}


def _finite_row(a: float, T: int, round_channels: bool) -> Optional[dict]:
    try:
        res = xor_finite_tau_opt(a, T, round_channels=round_channels)
    except DomainError as exc:
        log.warning("skipping a=%r T=%r: %s", a, T, exc)
        return None
    return {"model": "xor", "a": a, "T": T, "method": "finite", "tau_opt": res.tau_opt, "rate_opt": res.rate}


def _asymptotic_row(a: float, cfg: ExperimentConfig) -> dict:
    res = large_scale_optimum(a, cfg)["result"]
    return {"model": "xor", "a": a, "T": None, "method": "asymptotic", "tau_opt": res.tau_opt, "rate_opt": res.rate_opt}


def _pmap(func, items, workers: int):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, *zip(*items)))
    return [func(*item) for item in items]


def _sort_rows(rows: list[dict]) -> list[dict]:
    order = {"finite": 0, "asymptotic": 1}
    return sorted(rows, key=lambda r: (r["a"], r["T"] if r["T"] is not None else -1, order[r["method"]]))


def _table_output(cfg: ExperimentConfig, rows: list[dict], name: str) -> None:
    fmt = cfg.format or "csv"
    if fmt == "csv":
        _emit(rows_to_csv(rows), _output_path(cfg, f"{name}.csv"))
    else:
        doc = {"meta": _meta(cfg), "rows": [{c: r.get(c) for c in RESULT_COLUMNS} for r in rows]}
        _emit(_json(doc), _output_path(cfg, f"{name}.json"))


# -- modes --------------------------------------------------------------------


def run_optimize(cfg: ExperimentConfig) -> int:
    if cfg.model == "xor":
        out = large_scale_optimum(cfg.a, cfg)
        result, reports = out["result"], out["a2"]
        doc = {
            "model": "xor",
            "a": cfg.a,
            "steps": {
                "a1": "memoryless, time-invariant, iid inputs by construction",
                "surface": "F(tau, eps) = (a/tau)(1 - exp(-tau/a)) + eps - 1",
                "a2_checks": [
                    {"tau": r.tau, "training_gap": r.training_gap, "data_gap": r.data_gap, "passed": r.passed}
                    for r in reports
                ],
            },
        }
    else:
        model = _bilinear_model(cfg)
        result = optimal_tau(lambda t: bilinear_mi(model, t), cfg.grid_points, cfg.refine_tol)
        doc = {"model": "bilinear", "gain": {"kind": "normal", "mean": cfg.gain_mean, "std": cfg.gain_std}}
    doc.update(
        {
            "meta": _meta(cfg),
            "tau_opt": result.tau_opt,
            "rate_opt": result.rate_opt,
            "boundary_flag": result.boundary_flag.value,
            "grid_points": cfg.grid_points,
            "refine_tol": cfg.refine_tol,
        }
    )
    path = _output_path(cfg, "optimize.json")
    _emit(_json(doc), path)
    if path is not None:
        curve = [
            {"tau": t, "mi": v / (1.0 - t), "objective": v}
            for t, v in zip(result.objective.taus, result.objective.values)
        ]
        _emit(rows_to_csv(curve, ("tau", "mi", "objective")), path.with_suffix(".curve.csv"))
    return EXIT_OK


def run_sweep(cfg: ExperimentConfig) -> int:
    if cfg.model != "xor":
        raise DomainError("sweep-a needs the xor model")
    rows = _pmap(_asymptotic_row, [(a, cfg) for a in cfg.a_list], cfg.workers)
    finite = _pmap(_finite_row, [(a, T, cfg.round_channels) for a in cfg.a_list for T in cfg.T_list], cfg.workers)
    rows.extend(r for r in finite if r is not None)
    _table_output(cfg, _sort_rows(rows), "sweep-a")
    return EXIT_OK


def run_figure1(cfg: ExperimentConfig) -> int:
    if cfg.model != "xor":
        raise DomainError("figure1 needs the xor model")
    asymptotic = dict(zip(cfg.a_list, _pmap(_asymptotic_row, [(a, cfg) for a in cfg.a_list], cfg.workers)))
    finite = _pmap(_finite_row, [(a, T, cfg.round_channels) for a in cfg.a_list for T in cfg.T_list], cfg.workers)
    rows = []
    for row in finite:
        if row is None:
            continue
        rows.append(row)
        rows.append(dict(asymptotic[row["a"]], T=row["T"]))
    _table_output(cfg, _sort_rows(rows), "figure1")
    return EXIT_OK


def run_validate(cfg: ExperimentConfig) -> int:
    from .validate import run_all

    checks = run_all(
        cfg.derivative_config(),
        budget=cfg.budget,
        samples=cfg.samples,
        seed=cfg.seed,
        grid_points=cfg.grid_points,
        refine_tol=cfg.refine_tol,
        inject_fault=cfg.inject_fault,
        size=cfg.validate_size,
    )
    passed = all(c.passed for c in checks)
    doc = {"meta": _meta(cfg), "passed": passed, "checks": [c.to_dict() for c in checks]}
    _emit(_json(doc), _output_path(cfg, "validate.json"))
    for c in checks:
        log.info("%-24s %-7s observed=%s tol=%s", c.name, c.status, c.observed, c.tolerance)
    return EXIT_OK if passed else EXIT_VALIDATION


def run_mc(cfg: ExperimentConfig) -> int:
    n = round(cfg.a * cfg.T) if cfg.round_channels else None
    if n is None:
        product = cfg.a * cfg.T
        if abs(product - round(product)) > 1e-9:
            raise DomainError(f"a*T = {product!r} is not an integer")
        n = round(product)
    inst = EnumerationInstance(n_channels=int(n), t=cfg.T_tau, exhaustive=False)
    est = mc_entropy(inst, cfg.T_tau, cfg.samples, cfg.seed, workers=cfg.workers)
    exact = coupon_expected_unique(int(n), cfg.T_tau)
    doc = {
        "meta": _meta(cfg),
        "n_channels": int(n),
        "T_tau": cfg.T_tau,
        "samples": est.samples,
        "seed": cfg.seed,
        "estimate": est.estimate,
        "std_err": est.std_err,
        "coupon_exact": exact,
        "z_score": (est.estimate - exact) / est.std_err if est.std_err > 0 else 0.0,
    }
    _emit(_json(doc), _output_path(cfg, "mc.json"))
    return EXIT_OK


RUNNERS = {
    "optimize": run_optimize,
    "sweep-a": run_sweep,
    "figure1": run_figure1,
    "validate": run_validate,
    "mc": run_mc,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg, show = resolve_config(ns)
        if show:
            sys.stdout.write(_json(asdict(cfg)))
            return EXIT_OK
        return RUNNERS[cfg.mode](cfg)
    except A2ViolationError as exc:
        log.error("%s", exc)
        return EXIT_A2
    except (DomainError, NumericalError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
