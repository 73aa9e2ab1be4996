"""Strong / weak errors, moment scalings and log-log rate fits.

All estimators reduce per-path quantities in path-index order, and paths are
processed in fixed blocks of ``PATH_BLOCK`` indices, so results do not depend
on how many worker processes were used.  ``p``-th moments are aggregated with
median-of-means because for ``p`` close to ``alpha`` the summands have
infinite variance.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from multiprocessing import get_context
from typing import Callable, Optional, Sequence

import numpy as np

from . import rates
from .coefficients import SdeCoefficients
from .euler_engine import exact_finite_activity_path, run_euler, simulate_block
from .levy_measure import ConfigurationError
from .path_driver import DriverSpec, _rng, aggregate, build_skeleton, check_resolution, driver_marginals

PATH_BLOCK = 256
SAMPLE_BLOCK = 4096
BATCHES = 32
ABORT_THRESHOLD = 1e-4
EXACT_FLOOR = 1e-12

_TAG_PROBE = 5


# ---------------------------------------------------------------------------
# plumbing


def path_blocks(M: int, block: int = PATH_BLOCK) -> list[range]:
    return [range(s, min(s + block, M)) for s in range(0, M, block)]


def map_blocks(fn: Callable, tasks: Sequence, workers: int = 1) -> list:
    """Ordered map; ``workers > 1`` fans out over forked processes."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks)), mp_context=get_context("fork")) as ex:
        return list(ex.map(fn, tasks))


def median_of_means(values: np.ndarray, batches: int = BATCHES) -> tuple[float, float]:
    """Median of batch means with batch ``index mod batches``; NaN entries are skipped.

    Returns ``(estimate, spread)`` where ``spread`` is the standard deviation of
    the batch means.
    """
    values = np.asarray(values, dtype=float)
    B = max(1, min(batches, int(np.isfinite(values).sum())))
    means = []
    for b in range(B):
        v = values[b::B]
        v = v[np.isfinite(v)]
        if v.size:
            # correctly rounded sum, so the result does not depend on order within a batch
            means.append(math.fsum(v) / v.size)
    means = np.asarray(means)
    spread = float(means.std(ddof=1)) if means.size > 1 else 0.0
    return float(np.median(means)), spread


# ---------------------------------------------------------------------------
# reports


@dataclass
class ErrorReport:
    ns: list[int]
    p: float
    estimates: np.ndarray
    spreads: np.ndarray
    paths: int
    aborted: int
    label: str = "strong"

    @property
    def aborted_fraction(self) -> float:
        return self.aborted / self.paths if self.paths else 0.0

    @property
    def valid(self) -> bool:
        return self.aborted_fraction <= ABORT_THRESHOLD


@dataclass
class RateFit:
    slope: float
    intercept: float
    slope_se: float
    r2: float
    predicted: float
    tolerance: float
    mode: str
    verdict: str
    n_points: int

    @property
    def passed(self) -> bool:
        return self.verdict in ("pass", "exact")

    def as_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in self.__dict__.items()}


@dataclass
class ScalingResult:
    xs: list
    p: float
    estimates: np.ndarray
    spreads: np.ndarray
    fit: RateFit
    paths: int
    aborted: int = 0
    meta: dict = field(default_factory=dict)


@dataclass
class WeakReport:
    ns: list[int]
    weak: np.ndarray
    se: np.ndarray
    bound: np.ndarray
    phi_norm: float
    beta_phi: float
    paths: int
    aborted: int

    @property
    def dominated(self) -> np.ndarray:
        return self.weak <= self.bound + 4 * self.se


def fit_rate(xs, ys, predicted: float, tolerance: float = 0.1, mode: str = "upper",
             exact_floor: float = EXACT_FLOOR) -> RateFit:
    """OLS of ``log y`` on ``log x``.

    ``mode`` is ``"upper"`` (pass when slope <= predicted + tol; decay at least as
    fast as predicted), ``"lower"`` or ``"two-sided"``.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 4:
        raise ValueError("a rate fit needs at least 4 points")
    if np.all(ys <= exact_floor):
        nan = float("nan")
        return RateFit(nan, nan, nan, nan, predicted, tolerance, mode, "exact", int(xs.size))
    if np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        nan = float("nan")
        return RateFit(nan, nan, nan, nan, predicted, tolerance, mode, "degenerate", int(xs.size))
    lx, ly = np.log(xs), np.log(ys)
    X = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(X, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    sxx = float(((lx - lx.mean()) ** 2).sum())
    syy = float(((ly - ly.mean()) ** 2).sum())
    rss = float((resid**2).sum())
    se = math.sqrt(rss / (xs.size - 2) / sxx) if xs.size > 2 else float("nan")
    r2 = 1.0 - rss / syy if syy > 0 else 1.0
    if mode == "upper":
        ok = slope <= predicted + tolerance
    elif mode == "lower":
        ok = slope >= predicted - tolerance
    elif mode == "two-sided":
        ok = abs(slope - predicted) <= tolerance
    else:
        raise ValueError(f"unknown verdict mode {mode!r}")
    return RateFit(float(slope), float(intercept), se, float(r2), predicted, tolerance, mode,
                   "pass" if ok else "fail", int(xs.size))


# ---------------------------------------------------------------------------
# strong / weak errors


def _check_ladder(spec: DriverSpec, ns: Sequence[int], margin: int = 3) -> None:
    if len(ns) == 0:
        raise ValueError("empty ladder")
    for n in ns:
        check_resolution(int(n), spec.base_log2)
    if max(ns) > 2 ** (spec.base_log2 - margin):
        raise ValueError(f"coarsest-to-reference gap too small: max n must be <= 2^(base_log2 - {margin})")


def _check_p(spec: DriverSpec, p: float) -> None:
    if not spec.truncated and p >= spec.alpha:
        raise ConfigurationError(
            f"p = {p} >= alpha = {spec.alpha}: only the moments p < alpha exist for the nontruncated driver"
        )


def _sup_block(coeffs, spec, master_seed, ns, references, ode_tol, indices):
    n_base = spec.n_base
    need = list(ns) + ([n_base] if "euler" in references else [])
    states, aborted, _ = simulate_block(coeffs, spec, master_seed, indices, need)
    refs = {}
    if "euler" in references:
        refs["euler"] = states[n_base]
    if "exact" in references:
        refs["exact"] = np.stack([
            exact_finite_activity_path(coeffs, build_skeleton(master_seed, int(i), spec), spec, ode_tol)
            for i in indices
        ])
    out = {}
    with np.errstate(invalid="ignore"):
        for key, ref in refs.items():
            cols = []
            for n in ns:
                m = n_base // n
                diff = np.linalg.norm(states[n] - ref[:, ::m], axis=-1)
                cols.append(diff.max(axis=1))
            out[key] = np.column_stack(cols)
    terminal = {n: states[n][:, -1] for n in ns}
    if "euler" in references:
        terminal[n_base] = refs["euler"][:, -1]
    return out, aborted, terminal


def sup_errors(coeffs: SdeCoefficients, spec: DriverSpec, n_ladder: Sequence[int], M: int, master_seed: int,
               workers: int = 1, references: Sequence[str] = ("euler",), ode_tol: float = 1e-10):
    """Per-path ``sup_k |X^n_{k/n} - X^ref_{k/n}|`` for every ladder ``n``.

    Returns ``({reference: (M, L) array}, aborted (M,), {n: terminal states (M, d)})``.
    Aborted paths carry NaN errors.
    """
    ns = [int(n) for n in n_ladder]
    _check_ladder(spec, ns)
    if "exact" in references and spec.small_jump_mode != "drop":
        raise ConfigurationError("the event-driven oracle needs small_jump_mode = drop")
    fn = partial(_sup_block, coeffs, spec, master_seed, ns, tuple(references), ode_tol)
    parts = map_blocks(fn, path_blocks(M), workers)
    errs = {k: np.concatenate([p[0][k] for p in parts]) for k in references}
    aborted = np.concatenate([p[1] for p in parts])
    terminal = {n: np.concatenate([p[2][n] for p in parts]) for n in parts[0][2]}
    for v in errs.values():
        v[aborted] = np.nan
    return errs, aborted, terminal


def report_from_errors(errs: np.ndarray, aborted: np.ndarray, ns, p: float, batches: int = BATCHES,
                       label: str = "strong") -> ErrorReport:
    est, spr = zip(*(median_of_means(errs[:, j] ** p, batches) for j in range(len(ns))))
    return ErrorReport(list(ns), p, np.array(est), np.array(spr), int(errs.shape[0]), int(aborted.sum()), label)


def strong_error(coeffs: SdeCoefficients, spec: DriverSpec, n_ladder: Sequence[int], p: float, M: int,
                 master_seed: int, workers: int = 1, batches: int = BATCHES, reference: str = "euler",
                 ode_tol: float = 1e-10) -> ErrorReport:
    """Median-of-means estimate of ``E sup_k |X^n_{k/n} - X^ref_{k/n}|^p`` per ladder ``n``."""
    _check_p(spec, p)
    errs, aborted, _ = sup_errors(coeffs, spec, n_ladder, M, master_seed, workers, (reference,), ode_tol)
    return report_from_errors(errs[reference], aborted, n_ladder, p, batches, f"strong-vs-{reference}")


@dataclass(frozen=True)
class TestFunction:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    beta: float
    holder_norm: float  # sup norm plus Hölder seminorm


def _min_abs_pow(beta, x):
    return np.minimum(np.linalg.norm(x, axis=-1), 1.0) ** beta


def _one(x):
    return np.ones(x.shape[0])


TEST_FUNCTIONS = {
    "min-abs-sqrt": TestFunction("min-abs-sqrt", partial(_min_abs_pow, 0.5), 0.5, 2.0),
    "min-abs": TestFunction("min-abs", partial(_min_abs_pow, 1.0), 1.0, 2.0),
    "constant": TestFunction("constant", _one, 1.0, 1.0),
}


def weak_from_terminal(terminal: dict, aborted: np.ndarray, ns, n_ref: int, phi: TestFunction) -> WeakReport:
    ok = ~aborted
    ref = terminal[n_ref][ok]
    fr = phi.fn(ref)
    weak, se, bound = [], [], []
    for n in ns:
        xn = terminal[n][ok]
        diff = phi.fn(xn) - fr
        weak.append(abs(diff.mean()))
        se.append(diff.std(ddof=1) / math.sqrt(diff.size) if diff.size > 1 else 0.0)
        bound.append(phi.holder_norm * np.mean(np.linalg.norm(xn - ref, axis=-1) ** phi.beta))
    return WeakReport(list(ns), np.array(weak), np.array(se), np.array(bound), phi.holder_norm, phi.beta,
                      int(aborted.size), int(aborted.sum()))


def weak_error(coeffs: SdeCoefficients, spec: DriverSpec, n_ladder: Sequence[int], phi, M: int, master_seed: int,
               workers: int = 1) -> WeakReport:
    """Paired estimate of ``|E phi(X_1^n) - E phi(X_1^ref)|`` with the Hölder bound-check quantity.

    ``phi`` is a :class:`TestFunction` or a name in ``TEST_FUNCTIONS``.
    """
    if isinstance(phi, str):
        phi = TEST_FUNCTIONS[phi]
    _, aborted, terminal = sup_errors(coeffs, spec, n_ladder, M, master_seed, workers)
    return weak_from_terminal(terminal, aborted, n_ladder, spec.n_base, phi)


# ---------------------------------------------------------------------------
# moment scalings


def adapted_epsilon(spec: DriverSpec, t: float, jumps_per_sample: float) -> float:
    """Cutoff giving about ``jumps_per_sample`` simulated jumps over ``[0, t]``.

    The cutoff scales like ``t^(1/alpha)``, the natural size of ``L_t``, so the
    surrogate error is the same at every ``t`` and does not tilt the slope.
    """
    eps = (spec.density.mass * t / (spec.alpha * jumps_per_sample)) ** (1.0 / spec.alpha)
    return min(eps, 1.0)


def _moment_block(spec, master_seed, t, stream, eps, size):
    return np.linalg.norm(driver_marginals(master_seed, spec, t, size, stream, eps), axis=-1)


def moment_scaling_driver(spec: DriverSpec, p: float, t_ladder: Sequence[float], M: int, master_seed: int,
                          workers: int = 1, batches: int = BATCHES, jumps_per_sample: float = 64.0,
                          epsilon_mode: str = "adapted", tolerance: Optional[float] = None) -> ScalingResult:
    """Slope of ``log E|L_t|^p`` (``L0`` when truncated) against ``log t``."""
    pred = rates.moment_rate(spec.alpha, p, truncated=spec.truncated, symmetric=spec.density.symmetric)
    ts = [float(t) for t in t_ladder]
    for t in ts:
        k = t * spec.n_base
        if not (0 < t <= 1) or k != int(k) or (int(k) & (int(k) - 1)):
            raise ValueError(f"t = {t} is not a dyadic point of the base grid")
    tasks = []
    for i, t in enumerate(ts):
        eps = adapted_epsilon(spec, t, jumps_per_sample) if epsilon_mode == "adapted" else spec.epsilon_cut
        for b, blk in enumerate(path_blocks(M, SAMPLE_BLOCK)):
            tasks.append((i, b, t, eps, len(blk)))
    vals = map_blocks(_MomentTask(spec, master_seed), tasks, workers)
    est, spr, epss = [], [], []
    for i, t in enumerate(ts):
        v = np.concatenate([v for (j, *_), v in zip(tasks, vals) if j == i]) ** p
        e, s = median_of_means(v, batches)
        est.append(e)
        spr.append(s)
        epss.append(next(task[3] for task in tasks if task[0] == i))
    fit = fit_rate(ts, est, pred.exponent, pred.tolerance if tolerance is None else tolerance, "two-sided")
    return ScalingResult(ts, p, np.array(est), np.array(spr), fit, M, 0, {"epsilon": epss, "claim": pred.claim})


class _MomentTask:
    def __init__(self, spec, master_seed):
        self.spec, self.seed = spec, master_seed

    def __call__(self, task):
        i, b, t, eps, size = task
        return _moment_block(self.spec, self.seed, t, (i << 20) | b, eps, size)


def _increment_block(coeffs, spec, master_seed, ns, indices):
    from .path_driver import base_noise

    skels = [build_skeleton(master_seed, int(i), spec) for i in indices]
    base = np.stack([base_noise(s) for s in skels])
    drift = spec.compensator_drift()
    u = np.array([_rng(master_seed, int(i), _TAG_PROBE).random() for i in indices])
    out = np.empty((len(indices), len(ns)))
    aborted = np.zeros(len(indices), dtype=bool)
    rows = np.arange(len(indices))
    for j, n in enumerate(ns):
        states, ab = run_euler(coeffs, aggregate(base, n, drift))
        aborted |= ab
        k = np.minimum((u * n).astype(np.int64), n - 1)
        half = aggregate(base, 2 * n, drift)[rows, 2 * k]
        xk = states[rows, k]
        with np.errstate(invalid="ignore", over="ignore"):
            incr = coeffs.drift(xk) / (2 * n) + coeffs.diffusion_apply(xk, half)
        out[:, j] = np.linalg.norm(incr, axis=-1)
    return out, aborted


def grid_increment_scaling(coeffs: SdeCoefficients, spec: DriverSpec, p: float, n_ladder: Sequence[int], M: int,
                           master_seed: int, workers: int = 1, batches: int = BATCHES,
                           tolerance: Optional[float] = None) -> ScalingResult:
    """Slope of ``log E|X^n_t - X^n_{pi_n(t)}|^p`` against ``log n``, ``t`` the midpoint of a random cell."""
    pred = rates.increment_rate(spec.alpha, p, truncated=spec.truncated, symmetric=spec.density.symmetric)
    ns = [int(n) for n in n_ladder]
    for n in ns:
        check_resolution(2 * n, spec.base_log2)
    parts = map_blocks(partial(_increment_block, coeffs, spec, master_seed, ns), path_blocks(M), workers)
    vals = np.concatenate([p_[0] for p_ in parts])
    aborted = np.concatenate([p_[1] for p_ in parts])
    vals[aborted] = np.nan
    est, spr = zip(*(median_of_means(vals[:, j] ** p, batches) for j in range(len(ns))))
    fit = fit_rate(ns, est, pred.exponent, pred.tolerance if tolerance is None else tolerance, "two-sided")
    return ScalingResult(ns, p, np.array(est), np.array(spr), fit, M, int(aborted.sum()), {"claim": pred.claim})
