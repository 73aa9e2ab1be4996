"""Drift / diffusion pairs with declared regularity constants.

Coefficients act on batches: ``drift(X)`` and ``diffusion_apply(X, dL)`` take
``X`` of shape ``(P, d)`` and return ``(P, d)``.  Built-in families are
diagonal, which keeps the Euler inner loop to a handful of array operations.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True, eq=False)
class SdeCoefficients:
    name: str
    dimension: int
    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]  # (P, d) -> (P, d, d)
    beta: float = 1.0
    holder_constant: float = 0.0  # declared [b]_beta
    drift_bound: float = 0.0
    diffusion_bound: float = 0.0
    diffusion_lipschitz: float = 0.0
    nondegenerate: Optional[float] = None  # c0 with |det G| >= c0
    x0: np.ndarray = field(default_factory=lambda: np.zeros(1))
    diffusion_diag: Optional[Callable[[np.ndarray], np.ndarray]] = None
    constant: bool = False

    @property
    def lipschitz(self) -> bool:
        return self.beta >= 1.0

    def diffusion_apply(self, x: np.ndarray, dl: np.ndarray) -> np.ndarray:
        if self.diffusion_diag is not None:
            return self.diffusion_diag(x) * dl
        g = self.diffusion(x)
        return (g * dl[:, None, :]).sum(axis=-1)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "dimension": self.dimension,
            "beta": self.beta,
            "holder_constant": self.holder_constant,
            "drift_bound": self.drift_bound,
            "diffusion_bound": self.diffusion_bound,
            "diffusion_lipschitz": self.diffusion_lipschitz,
            "nondegenerate": self.nondegenerate,
            "x0": [float(v) for v in self.x0],
        }


def _diag_matrix(diag_fn, x):
    g = diag_fn(x)
    out = np.zeros(g.shape + (g.shape[-1],))
    idx = np.arange(g.shape[-1])
    out[..., idx, idx] = g
    return out


def _holder_drift(beta, a, x):
    z = x - a
    return np.clip(np.sign(z) * np.abs(z) ** beta, -1.0, 1.0)


def _tanh_diag(scale, x):
    return 1.0 + scale * np.tanh(x)


def _sin_diag(scale, x):
    return 1.0 + scale * np.sin(x)


def _sin_drift(x):
    return np.sin(x)


def _cos_drift(x):
    return np.cos(x)


def _tanh_only(x):
    return np.tanh(x)


def _const_drift(b0, x):
    return np.full_like(x, b0)


def _const_diag(g0, x):
    return np.full_like(x, g0)


def _diag_family(name, d, drift, diag, **kw):
    return SdeCoefficients(name=name, dimension=d, drift=drift, diffusion=partial(_diag_matrix, diag),
                           diffusion_diag=diag, **kw)


def builtin(name: str, dimension: int = 1, x0=None, alpha: Optional[float] = None) -> SdeCoefficients:
    """Look up a coefficient family by registry name.

    ``holder-drift:<beta>[:<a>]``, ``lipschitz``, ``degenerate`` and
    ``constant:<b0>:<g0>``.  ``alpha`` only feeds the ``beta > 1 - alpha/2``
    warning.
    """
    d = int(dimension)
    x0 = np.zeros(d) if x0 is None else np.broadcast_to(np.asarray(x0, dtype=float), (d,)).copy()
    head, *args = name.strip().split(":")
    sd = math.sqrt(d)
    if head == "holder-drift" and len(args) in (1, 2):
        beta = float(args[0])
        a = float(args[1]) if len(args) == 2 else 0.0
        if not 0 < beta <= 1:
            raise ValueError("holder-drift needs beta in (0, 1]")
        if alpha is not None and beta <= 1 - alpha / 2:
            warnings.warn(f"beta = {beta} does not satisfy beta > 1 - alpha/2 = {1 - alpha / 2:g}", stacklevel=2)
        return _diag_family(name, d, partial(_holder_drift, beta, a), partial(_tanh_diag, 0.2), beta=beta,
                            holder_constant=2 ** (1 - beta) * d ** ((1 - beta) / 2), drift_bound=sd,
                            diffusion_bound=1.2, diffusion_lipschitz=0.2, nondegenerate=0.8**d, x0=x0)
    if head == "lipschitz" and not args:
        return _diag_family(name, d, _sin_drift, partial(_sin_diag, 0.3), beta=1.0, holder_constant=1.0,
                            drift_bound=sd, diffusion_bound=1.3, diffusion_lipschitz=0.3,
                            nondegenerate=0.7**d, x0=x0)
    if head == "degenerate" and not args:
        return _diag_family(name, d, _cos_drift, _tanh_only, beta=1.0, holder_constant=1.0, drift_bound=sd,
                            diffusion_bound=1.0, diffusion_lipschitz=1.0, nondegenerate=None, x0=x0)
    if head == "constant" and len(args) == 2:
        b0, g0 = float(args[0]), float(args[1])
        return _diag_family(name, d, partial(_const_drift, b0), partial(_const_diag, g0), beta=1.0,
                            holder_constant=0.0, drift_bound=abs(b0) * sd, diffusion_bound=abs(g0),
                            diffusion_lipschitz=0.0, nondegenerate=abs(g0) ** d if g0 else None, x0=x0,
                            constant=True)
    raise KeyError(f"unknown coefficient family {name!r}")


@dataclass
class RegularityReport:
    drift_sup: float
    holder_quotient_max: float
    diffusion_lipschitz_max: float
    min_abs_det: float
    finite: bool
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def _pairs(rng, n, d, center, radius=3.0):
    """Random pairs; half of them straddle the drift singularity almost symmetrically."""
    half = n // 2
    u = rng.standard_normal((n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    s = 10.0 ** rng.uniform(-4, 0, (half, 1))
    near_x = center + s * u[:half]
    near_y = center - s * u[:half] * (1 + rng.uniform(-0.05, 0.05, (half, 1)))
    far_x = rng.uniform(-radius, radius, (n - half, d))
    far_y = far_x + u[half:] * 10.0 ** rng.uniform(-6, 0.5, (n - half, 1))
    return np.vstack([near_x, far_x]), np.vstack([near_y, far_y])


def validate(coeffs: SdeCoefficients, n_samples: int = 10_000, seed: int = 0, center: float = 0.0) -> RegularityReport:
    """Sampled regularity constants of ``coeffs``; flags declared constants that are violated."""
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    rng = np.random.default_rng(seed)
    d = coeffs.dimension
    x, y = _pairs(rng, n_samples, d, center)
    bx, by = coeffs.drift(x), coeffs.drift(y)
    gx, gy = coeffs.diffusion(x), coeffs.diffusion(y)
    dist = np.linalg.norm(x - y, axis=1)
    ok = dist > 0
    finite = bool(np.all(np.isfinite(bx)) and np.all(np.isfinite(gx)) and np.all(np.isfinite(by)) and np.all(np.isfinite(gy)))
    drift_sup = float(np.max(np.linalg.norm(np.vstack([bx, by]), axis=1)))
    hq = np.linalg.norm(bx - by, axis=1)[ok] / dist[ok] ** coeffs.beta
    lq = np.linalg.norm(gx - gy, ord=2, axis=(1, 2))[ok] / dist[ok]
    dets = np.abs(np.linalg.det(np.concatenate([gx, gy])))
    gnorm = float(np.max(np.linalg.norm(np.concatenate([gx, gy]), ord=2, axis=(1, 2))))
    rep = RegularityReport(drift_sup, float(hq.max(initial=0.0)), float(lq.max(initial=0.0)), float(dets.min()),
                           finite, [])
    slack = 1 + 1e-6
    if not finite:
        rep.violations.append("non-finite coefficient values")
    if rep.holder_quotient_max > coeffs.holder_constant * slack:
        rep.violations.append(f"Hölder quotient {rep.holder_quotient_max:.6g} > declared {coeffs.holder_constant:.6g}")
    if rep.drift_sup > coeffs.drift_bound * slack:
        rep.violations.append(f"|b|_0 {rep.drift_sup:.6g} > declared {coeffs.drift_bound:.6g}")
    if gnorm > coeffs.diffusion_bound * slack:
        rep.violations.append(f"||G|| {gnorm:.6g} > declared {coeffs.diffusion_bound:.6g}")
    if rep.diffusion_lipschitz_max > coeffs.diffusion_lipschitz * slack:
        rep.violations.append(f"Lipschitz quotient of G {rep.diffusion_lipschitz_max:.6g} > declared {coeffs.diffusion_lipschitz:.6g}")
    if coeffs.nondegenerate is not None and rep.min_abs_det < coeffs.nondegenerate / slack:
        rep.violations.append(f"min |det G| {rep.min_abs_det:.6g} < declared {coeffs.nondegenerate:.6g}")
    return rep


def holder_quotient_sup(coeffs: SdeCoefficients, n_pairs: int, seed: int = 0, center: float = 0.0) -> float:
    rng = np.random.default_rng(seed)
    x, y = _pairs(rng, n_pairs, coeffs.dimension, center)
    dist = np.linalg.norm(x - y, axis=1)
    ok = dist > 0
    q = np.linalg.norm(coeffs.drift(x) - coeffs.drift(y), axis=1)[ok] / dist[ok] ** coeffs.beta
    return float(q.max())
