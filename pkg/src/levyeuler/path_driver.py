"""One realisation of the driving noise, consistent across every dyadic grid.

A skeleton stores the jumps above the cutoff, a per-base-cell surrogate for
the compensated small jumps, and the compensator drift.  Coarse grids never
draw their own noise: their increments are block sums of the base cells, so
all resolutions and the fine-grid reference see the same realisation.

Jumps are generated shell by shell on the absolute dyadic radii
``(2^-k-1, 2^-k]`` (plus ``(1, inf)`` for the nontruncated driver), each shell
from its own seeded stream.  Lowering the cutoff therefore adds jumps but
never moves the ones already above it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .levy_measure import (
    AngularDensity,
    ConfigurationError,
    StableIndex,
    big_jump_compensator,
    first_moment_radial,
    radius_from_uniform,
    sample_direction,
    shell_mass,
    small_jump_moments,
    stable_scale_constant,
)

MODES = ("gaussian_surrogate", "drop")

# stream tags mixed into the seed sequence
_TAG_SHELL = 1
_TAG_SMALL = 2
_TAG_EXACT = 3
_TAG_MARGINAL = 4


@dataclass(frozen=True)
class DriverSpec:
    index: StableIndex
    density: AngularDensity
    epsilon_cut: float = 1e-3
    small_jump_mode: str = "gaussian_surrogate"
    base_log2: int = 14
    exact_marginals: bool = False

    def __post_init__(self):
        if not (0 < self.epsilon_cut <= 1):
            raise ConfigurationError("epsilon_cut must lie in (0, 1]")
        if self.small_jump_mode not in MODES:
            raise ConfigurationError(f"small_jump_mode must be one of {MODES}")
        if self.base_log2 < 6:
            raise ConfigurationError("base_log2 must be at least 6")
        self.index.check_density(self.density)
        if self.exact_marginals:
            if self.dimension != 1 or self.density.constant is None or self.index.truncated:
                raise ConfigurationError("exact_marginals needs d = 1, constant rho and the nontruncated driver")
            if self.index.alpha == 1.0:
                raise ConfigurationError("exact_marginals is implemented for alpha in (1, 2)")

    @property
    def alpha(self) -> float:
        return self.index.alpha

    @property
    def truncated(self) -> bool:
        return self.index.truncated

    @property
    def dimension(self) -> int:
        return self.density.dimension

    @property
    def n_base(self) -> int:
        return 2**self.base_log2

    @property
    def r_max(self) -> float:
        return 1.0 if self.truncated else math.inf

    def compensator_drift(self, epsilon: Optional[float] = None) -> np.ndarray:
        """Drift per unit time removed to compensate the simulated jumps above ``epsilon``."""
        eps = self.epsilon_cut if epsilon is None else epsilon
        d = self.dimension
        if self.exact_marginals or self.density.symmetric:
            return np.zeros(d)
        upper = math.inf if (not self.truncated and self.alpha > 1) else 1.0
        return self.density.sphere_moments[1] * first_moment_radial(self.alpha, eps, upper)

    def describe(self) -> dict:
        return {
            "alpha": self.alpha,
            "truncated": self.truncated,
            "density": self.density.name,
            "dimension": self.dimension,
            "epsilon_cut": self.epsilon_cut,
            "small_jump_mode": self.small_jump_mode,
            "base_log2": self.base_log2,
            "exact_marginals": self.exact_marginals,
        }


@dataclass(frozen=True, eq=False)
class PathSkeleton:
    seed: int
    path_index: int
    jump_times: np.ndarray
    jump_marks: np.ndarray
    base_small_increments: np.ndarray
    compensator_drift: np.ndarray
    truncated: bool
    epsilon: float
    mode: str
    base_log2: int
    meta: dict = field(default_factory=dict)

    @property
    def n_jumps(self) -> int:
        return len(self.jump_times)

    def to_json(self) -> str:
        jumps = [[float(t), *map(float, y)] for t, y in zip(self.jump_times, self.jump_marks)]
        rec = {
            "seed": self.seed,
            "path_index": self.path_index,
            "jumps": jumps,
            "mode": self.mode,
            "epsilon": self.epsilon,
            "truncated": self.truncated,
            "compensator_drift": [float(v) for v in self.compensator_drift],
        }
        return json.dumps(rec, sort_keys=True)


def _rng(*keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def _shells(epsilon: float, truncated: bool) -> list[tuple[int, float, float]]:
    """``(key, lo, hi)`` radial shells covering ``(epsilon, r_max]``."""
    out = [] if truncated else [(0, 1.0, math.inf)]
    k = 0
    while 2.0 ** (-k) > epsilon:
        out.append((k + 1, 2.0 ** (-k - 1), 2.0 ** (-k)))
        k += 1
    return out


def _untie(rng, times, n_base):
    """Redraw any time that falls exactly on a base grid point."""
    while True:
        bad = np.flatnonzero(np.floor(times * n_base) == times * n_base)
        if bad.size == 0:
            return times
        times[bad] = rng.random(bad.size)


def sample_jumps(master_seed: int, path_index: int, spec: DriverSpec, epsilon: Optional[float] = None):
    """Jump times and marks with ``epsilon < |y| <= r_max`` on ``[0, 1)``, sorted in time."""
    eps = spec.epsilon_cut if epsilon is None else epsilon
    d = spec.dimension
    times, marks = [], []
    for key, lo, hi in _shells(eps, spec.truncated):
        rng = _rng(master_seed, path_index, _TAG_SHELL, key)
        count = rng.poisson(spec.density.mass * shell_mass(spec.alpha, lo, hi))
        if count == 0:
            continue
        t = _untie(rng, rng.random(count), spec.n_base)
        r = radius_from_uniform(rng.random(count), spec.alpha, lo, hi)
        theta = sample_direction(rng, spec.density, count)
        keep = r > eps
        times.append(t[keep])
        marks.append(r[keep, None] * theta[keep])
    if not times:
        return np.empty(0), np.empty((0, d))
    t = np.concatenate(times)
    y = np.concatenate(marks)
    order = np.argsort(t)
    return t[order], y[order]


def _cms(rng: np.random.Generator, alpha: float, size) -> np.ndarray:
    """Standard symmetric alpha-stable draws, characteristic function ``exp(-|u|^alpha)``."""
    u = rng.uniform(-0.5 * np.pi, 0.5 * np.pi, size)
    w = rng.standard_exponential(size)
    return (np.sin(alpha * u) / np.cos(u) ** (1.0 / alpha)) * (np.cos((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)


def exact_stable_scale(spec: DriverSpec, dt: float) -> float:
    return (spec.density.constant * stable_scale_constant(spec.alpha) * dt) ** (1.0 / spec.alpha)


def _exact_base(master_seed, path_index, spec):
    rng = _rng(master_seed, path_index, _TAG_EXACT)
    return (exact_stable_scale(spec, 1.0 / spec.n_base) * _cms(rng, spec.alpha, spec.n_base))[:, None]


def build_skeleton(master_seed: int, path_index: int, spec: DriverSpec) -> PathSkeleton:
    """Deterministic noise realisation for ``(master_seed, path_index, spec)``."""
    d = spec.dimension
    if spec.exact_marginals:
        return PathSkeleton(master_seed, path_index, np.empty(0), np.empty((0, d)),
                            _exact_base(master_seed, path_index, spec), np.zeros(d),
                            False, spec.epsilon_cut, "exact", spec.base_log2)
    times, marks = sample_jumps(master_seed, path_index, spec)
    if spec.small_jump_mode == "gaussian_surrogate":
        cov = small_jump_moments(spec.density, spec.alpha, spec.epsilon_cut).covariance / spec.n_base
        z = _rng(master_seed, path_index, _TAG_SMALL).standard_normal((spec.n_base, d))
        small = z @ _psd_sqrt(cov).T
    else:
        small = np.zeros((spec.n_base, d))
    return PathSkeleton(master_seed, path_index, times, marks, small, spec.compensator_drift(),
                        spec.truncated, spec.epsilon_cut, spec.small_jump_mode, spec.base_log2)


def _psd_sqrt(cov: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(cov)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.T


def check_resolution(n: int, base_log2: int) -> int:
    """Return ``log2(n)``; reject non-dyadic or too-fine resolutions."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"resolution n = {n} is not a power of two")
    j = n.bit_length() - 1
    if j > base_log2:
        raise ValueError(f"resolution n = 2^{j} exceeds the base grid 2^{base_log2}")
    return j


def base_noise(skeleton: PathSkeleton) -> np.ndarray:
    """Jumps plus small-jump surrogate summed per base cell, without the compensator."""
    n_base = 2**skeleton.base_log2
    out = skeleton.base_small_increments.copy()
    if skeleton.n_jumps:
        cell = np.floor(skeleton.jump_times * n_base).astype(np.int64)
        for i in range(out.shape[1]):
            out[:, i] += np.bincount(cell, weights=skeleton.jump_marks[:, i], minlength=n_base)
    return out


def aggregate(base: np.ndarray, n: int, drift: np.ndarray) -> np.ndarray:
    """Block-sum base-cell noise (last two axes ``(n_base, d)``) to ``n`` cells and subtract ``drift / n``."""
    n_base, d = base.shape[-2:]
    m = n_base // n
    blocks = base.reshape(*base.shape[:-2], n, m, d).sum(axis=-2) if m > 1 else base.copy()
    return blocks - np.asarray(drift) / n


def driver_increments(skeleton: PathSkeleton, spec: DriverSpec, n: int) -> np.ndarray:
    """Increments of ``L`` (or ``L0``) over the ``n`` cells ``[k/n, (k+1)/n)``; shape ``(n, d)``."""
    check_resolution(n, skeleton.base_log2)
    return aggregate(base_noise(skeleton), n, skeleton.compensator_drift)


def truncate_driver(skeleton: PathSkeleton, spec: DriverSpec) -> tuple[PathSkeleton, DriverSpec]:
    """Drop jumps with ``|y| > 1`` and switch to the ``L0`` compensator.

    For ``alpha`` in (1, 2) the pieces satisfy ``L = L0 + V - P`` per cell, with
    ``V`` the removed jumps and ``P = t * big_jump_compensator``; at ``alpha = 1``
    the removed jumps were never compensated, so ``P = 0``.
    """
    if spec.truncated:
        raise ConfigurationError("driver is already truncated")
    if spec.exact_marginals:
        raise ConfigurationError("exact-marginal skeletons carry no jump list to truncate")
    new_spec = replace(spec, index=StableIndex(spec.alpha, truncated=True))
    keep = np.linalg.norm(skeleton.jump_marks, axis=1) <= 1.0
    new = replace(skeleton, jump_times=skeleton.jump_times[keep], jump_marks=skeleton.jump_marks[keep],
                  compensator_drift=new_spec.compensator_drift(), truncated=True)
    return new, new_spec


def removed_big_jumps(skeleton: PathSkeleton) -> PathSkeleton:
    """The ``V`` part of the decomposition as a skeleton with no drift and no small jumps."""
    big = np.linalg.norm(skeleton.jump_marks, axis=1) > 1.0
    return replace(skeleton, jump_times=skeleton.jump_times[big], jump_marks=skeleton.jump_marks[big],
                   base_small_increments=np.zeros_like(skeleton.base_small_increments),
                   compensator_drift=np.zeros_like(skeleton.compensator_drift))


def exact_stable_increments(master_seed: int, path_index: int, spec: DriverSpec, n: int) -> np.ndarray:
    """Exact symmetric stable increments on the ``n``-grid, aggregated from the base grid."""
    if not spec.exact_marginals:
        raise ConfigurationError("spec.exact_marginals is not set")
    check_resolution(n, spec.base_log2)
    return aggregate(_exact_base(master_seed, path_index, spec), n, np.zeros(1))


def driver_marginals(master_seed: int, spec: DriverSpec, t: float, size: int, stream: int = 0,
                     epsilon: Optional[float] = None) -> np.ndarray:
    """``size`` independent draws of ``L_t`` (``L0_t`` when truncated), shape ``(size, d)``.

    Uses one radial shell ``(epsilon, r_max]``, a Gaussian surrogate (or nothing,
    in drop mode) below ``epsilon`` and the matching compensator drift.
    """
    rng = _rng(master_seed, _TAG_MARGINAL, stream)
    d = spec.dimension
    if spec.exact_marginals:
        return (exact_stable_scale(spec, t) * _cms(rng, spec.alpha, size))[:, None]
    eps = spec.epsilon_cut if epsilon is None else epsilon
    lam = spec.density.mass * shell_mass(spec.alpha, eps, spec.r_max)
    counts = rng.poisson(lam * t, size)
    total = int(counts.sum())
    r = radius_from_uniform(rng.random(total), spec.alpha, eps, spec.r_max)
    y = r[:, None] * sample_direction(rng, spec.density, total)
    owner = np.repeat(np.arange(size), counts)
    out = np.empty((size, d))
    for i in range(d):
        out[:, i] = np.bincount(owner, weights=y[:, i], minlength=size)
    if spec.small_jump_mode == "gaussian_surrogate":
        cov = small_jump_moments(spec.density, spec.alpha, eps).covariance * t
        out += rng.standard_normal((size, d)) @ _psd_sqrt(cov).T
    return out - spec.compensator_drift(eps) * t
