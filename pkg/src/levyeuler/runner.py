"""Run a configured experiment and persist its artifacts.

Artifacts in the output directory:

``report.csv``
    One row per (series, p, ladder point); columns ``REPORT_COLUMNS``.
``summary.json``
    Fits, checks and the overall verdict; sorted keys, no timing.
``manifest.json``
    Full config, its hash, version string, seed, workers and wall time.
``plot.csv`` / ``rate.png``
    Log2 estimates with fit lines, and the matching figure.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import spearmanr

from . import __version__, rates
from .config import ExperimentConfig, serialize
from .error_stats import (
    ABORT_THRESHOLD,
    TEST_FUNCTIONS,
    fit_rate,
    grid_increment_scaling,
    moment_scaling_driver,
    report_from_errors,
    sup_errors,
    weak_from_terminal,
)
from .plotting import Series, render_rate_figure, write_plot_csv

REPORT_COLUMNS = ("config_hash", "kind", "series", "p", "x", "estimate", "spread", "paths", "aborted")
SPEARMAN_BOUND = -0.9


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list = field(default_factory=list)
    fits: list = field(default_factory=list)  # (series, p, RateFit)
    checks: list = field(default_factory=list)
    series: list = field(default_factory=list)
    paths: int = 0
    aborted: int = 0

    @property
    def valid(self) -> bool:
        return self.paths == 0 or self.aborted / self.paths <= ABORT_THRESHOLD

    @property
    def passed(self) -> bool:
        return self.valid and all(c.passed for c in self.checks)

    def summary(self) -> dict:
        cfg = self.config
        return _clean({
            "name": cfg.name,
            "kind": cfg.kind,
            "claim": cfg.claim,
            "config_hash": cfg.config_hash,
            "seed": cfg.seed,
            "paths": self.paths,
            "aborted": self.aborted,
            "valid": self.valid,
            "fits": [dict(series=s, p=p, **f.as_dict()) for s, p, f in self.fits],
            "checks": [{"name": c.name, "passed": c.passed, **c.detail} for c in self.checks],
            "verdict": "pass" if self.passed else "fail",
        })


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _prediction(cfg: ExperimentConfig, default: rates.Prediction) -> tuple[float, float]:
    exp = default.exponent if cfg.predicted is None else cfg.predicted
    tol = default.tolerance if cfg.tolerance is None else cfg.tolerance
    return exp, tol


def _add_series(res: ExperimentResult, label, p, xs, est, spr, paths, aborted, fit=None):
    h = res.config.config_hash
    for x, e, s in zip(xs, est, spr):
        res.rows.append([h, res.config.kind, label, repr(float(p)), repr(float(x)), repr(float(e)),
                         repr(float(s)), str(paths), str(aborted)])
    slope = fit.slope if fit is not None else float("nan")
    icpt = fit.intercept if fit is not None else float("nan")
    res.series.append(Series(label, p, list(xs), [float(e) for e in est], slope, icpt))
    if fit is not None:
        res.fits.append((label, float(p), fit))
        res.checks.append(Check(f"{label} p={p:g} slope", fit.passed,
                                {"slope": fit.slope, "predicted": fit.predicted, "tolerance": fit.tolerance,
                                 "mode": fit.mode, "verdict": fit.verdict}))


def _run_strong(cfg, spec, coeffs, workers, res):
    errs, aborted, _ = sup_errors(coeffs, spec, cfg.ns, cfg.paths, cfg.seed, workers)
    res.paths, res.aborted = cfg.paths, int(aborted.sum())
    for p in cfg.p:
        rep = report_from_errors(errs["euler"], aborted, cfg.ns, p, cfg.batches)
        pred = rates.strong_rate(spec.alpha, p, truncated=spec.truncated, beta=coeffs.beta,
                                 symmetric=spec.density.symmetric, nondegenerate=coeffs.nondegenerate is not None)
        exp, tol = _prediction(cfg, pred)
        fit = fit_rate(cfg.ns, rep.estimates, exp, tol, "upper")
        _add_series(res, "strong", p, cfg.ns, rep.estimates, rep.spreads, rep.paths, rep.aborted, fit)


def _run_weak(cfg, spec, coeffs, workers, res):
    phi = TEST_FUNCTIONS[cfg.phi]
    _, aborted, terminal = sup_errors(coeffs, spec, cfg.ns, cfg.paths, cfg.seed, workers)
    res.paths, res.aborted = cfg.paths, int(aborted.sum())
    rep = weak_from_terminal(terminal, aborted, cfg.ns, spec.n_base, phi)
    pred = rates.weak_rate(spec.alpha, phi.beta, symmetric=spec.density.symmetric)
    exp, tol = _prediction(cfg, pred)
    fit = fit_rate(cfg.ns, rep.weak, exp, tol, "upper")
    # the fit is reported, the checks are domination and monotone decay
    _add_series(res, "weak", phi.beta, cfg.ns, rep.weak, rep.se, rep.paths, rep.aborted)
    res.fits.append(("weak", phi.beta, fit))
    _add_series(res, "weak-bound", phi.beta, cfg.ns, rep.bound, np.zeros(len(cfg.ns)), rep.paths, rep.aborted)
    dom = rep.dominated
    res.checks.append(Check("weak <= |phi|_beta * strong + 4 SE", bool(dom.all()),
                            {"per_n": [bool(v) for v in dom]}))
    if np.all(rep.weak == 0):
        res.checks.append(Check("weak error decays", True, {"spearman": None, "note": "identically zero"}))
    else:
        rho = float(spearmanr(np.log(cfg.ns), rep.weak).statistic)
        res.checks.append(Check("weak error decays", rho <= SPEARMAN_BOUND, {"spearman": rho,
                                                                              "bound": SPEARMAN_BOUND}))


def _run_moment(cfg, spec, coeffs, workers, res):
    res.paths = cfg.paths
    for p in cfg.p:
        pred = rates.moment_rate(spec.alpha, p, truncated=spec.truncated, symmetric=spec.density.symmetric)
        exp, tol = _prediction(cfg, pred)
        sc = moment_scaling_driver(spec, p, cfg.ts, cfg.paths, cfg.seed, workers, cfg.batches,
                                   cfg.jumps_per_sample, tolerance=tol)
        fit = sc.fit if cfg.predicted is None else fit_rate(sc.xs, sc.estimates, exp, tol, "two-sided")
        _add_series(res, "moment", p, sc.xs, sc.estimates, sc.spreads, sc.paths, sc.aborted, fit)


def _run_increment(cfg, spec, coeffs, workers, res):
    res.paths = cfg.paths
    for p in cfg.p:
        pred = rates.increment_rate(spec.alpha, p, truncated=spec.truncated, symmetric=spec.density.symmetric)
        exp, tol = _prediction(cfg, pred)
        sc = grid_increment_scaling(coeffs, spec, p, cfg.ns, cfg.paths, cfg.seed, workers, cfg.batches, tol)
        fit = sc.fit if cfg.predicted is None else fit_rate(sc.xs, sc.estimates, exp, tol, "two-sided")
        res.aborted = max(res.aborted, sc.aborted)
        _add_series(res, "increment", p, sc.xs, sc.estimates, sc.spreads, sc.paths, sc.aborted, fit)


def _run_oracle(cfg, spec, coeffs, workers, res):
    errs, aborted, _ = sup_errors(coeffs, spec, cfg.ns, cfg.paths, cfg.seed, workers, ("euler", "exact"))
    res.paths, res.aborted = cfg.paths, int(aborted.sum())
    exp = -1.0 if cfg.predicted is None else cfg.predicted
    tol = 0.2 if cfg.tolerance is None else cfg.tolerance
    for p in cfg.p:
        fits = {}
        for ref in ("euler", "exact"):
            rep = report_from_errors(errs[ref], aborted, cfg.ns, p, cfg.batches)
            fits[ref] = fit_rate(cfg.ns, rep.estimates, exp, tol, "upper")
            _add_series(res, f"vs-{ref}", p, cfg.ns, rep.estimates, rep.spreads, rep.paths, rep.aborted, fits[ref])
        diff = abs(fits["euler"].slope - fits["exact"].slope)
        ok = math.isfinite(diff) and diff <= cfg.diff_tolerance
        res.checks.append(Check(f"oracle slopes agree p={p:g}", ok, {"difference": diff,
                                                                     "tolerance": cfg.diff_tolerance}))


_KIND_RUNNERS = {
    "strong": _run_strong,
    "weak": _run_weak,
    "moment": _run_moment,
    "increment": _run_increment,
    "oracle": _run_oracle,
}


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Run ``cfg`` in memory; results do not depend on ``workers``."""
    res = ExperimentResult(cfg)
    _KIND_RUNNERS[cfg.kind](cfg, cfg.driver_spec(), cfg.coefficients(), workers, res)
    return res


def version_string() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--tags", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _dump_json(obj, path) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def write_artifacts(res: ExperimentResult, out_dir, workers: int, wall_time: float) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = res.config
    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        w.writerows(res.rows)
    _dump_json(res.summary(), out / "summary.json")
    text = serialize(cfg, include_output=False)
    _dump_json(_clean({
        "config": cfg.as_dict(),
        "config_text": text,
        "config_hash": cfg.config_hash,
        "config_sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
        "version": version_string(),
        "seed": cfg.seed,
        "workers": workers,
        "wall_time_s": round(wall_time, 3),
    }), out / "manifest.json")
    write_plot_csv(res.series, out / "plot.csv")
    xlabel = "t" if cfg.kind == "moment" else "n"
    render_rate_figure(res.series, out / "rate.png", title=cfg.name, xlabel=xlabel)
    return out


def default_workers() -> int:
    env = os.environ.get("LEVYEULER_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def resolve_output(cfg: ExperimentConfig, override: Optional[str] = None) -> Path:
    """Precedence: explicit argument, ``LEVYEULER_OUT``, config ``output_dir``, ``runs/<name>``."""
    if override:
        return Path(override)
    env = os.environ.get("LEVYEULER_OUT")
    if env:
        return Path(env) / cfg.name
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return Path("runs") / cfg.name


def run(cfg: ExperimentConfig, out_dir=None, workers: Optional[int] = None) -> tuple[ExperimentResult, Path]:
    workers = default_workers() if workers is None else max(1, int(workers))
    t0 = time.perf_counter()
    res = run_experiment(cfg, workers)
    out = write_artifacts(res, resolve_output(cfg, out_dir), workers, time.perf_counter() - t0)
    return res, out
