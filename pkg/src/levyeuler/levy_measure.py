"""Stable-like Lévy measures ``rho(y) dy / |y|^(d+alpha)`` and their samplers.

The angular density ``rho`` lives on the unit sphere only, so 0-homogeneity
holds by construction.  Polar factorisation splits every jump ``y = r * theta``
into a direction drawn from ``rho(theta) / m_rho`` and a radius with density
proportional to ``r^(-1-alpha)``.

Sphere conventions
------------------
* ``d = 1``: the "sphere" is ``{-1, +1}`` with counting measure, so the
  isotropic density ``rho = 1`` has mass ``m_rho = 2``.
* ``d = 2``: trapezoid rule on the circle.
* ``d = 3``: Gauss-Legendre in ``cos(polar angle)`` times trapezoid in azimuth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, partial
from typing import Callable, Optional

import numpy as np
from scipy import integrate, stats

QUAD_RTOL = 1e-8
MAX_PROPOSALS = 10**6


class ConfigurationError(ValueError):
    """Raised when a driver / density / index combination is inconsistent."""


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class AngularDensity:
    """Direction-only density ``rho`` on ``S^{d-1}``.

    Parameters
    ----------
    dimension : int
        Space dimension ``d``.
    evaluate : callable
        Vectorised map from an ``(N, d)`` array of unit vectors to ``(N,)``
        nonnegative values.
    upper_bound : float
        ``K >= sup rho``; drives the rejection sampler.
    lower_bound : float
        ``c0 <= inf rho``.
    symmetric : bool
        Declares ``rho(-theta) == rho(theta)``.
    holder_beta : float, optional
        Sphere Hölder exponent, recorded as metadata only.
    name : str
        Registry name, used in reports and hashes.
    """

    dimension: int
    evaluate: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    upper_bound: float
    lower_bound: float
    symmetric: bool = False
    holder_beta: Optional[float] = None
    name: str = "user"
    constant: Optional[float] = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigurationError("dimension must be a positive integer")
        if not (0 <= self.lower_bound <= self.upper_bound) or not math.isfinite(self.upper_bound):
            raise ConfigurationError("need 0 <= lower_bound <= upper_bound < inf")

    def __call__(self, theta) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        return np.asarray(self.evaluate(theta), dtype=float).reshape(theta.shape[0])

    @cached_property
    def sphere_moments(self) -> tuple[float, np.ndarray, np.ndarray]:
        """``(m_rho, int theta rho, int theta theta^T rho)`` over the sphere."""
        return _sphere_moments(self)

    @property
    def mass(self) -> float:
        return self.sphere_moments[0]


@dataclass(frozen=True)
class StableIndex:
    alpha: float
    truncated: bool = False

    def __post_init__(self):
        if not (1.0 <= self.alpha < 2.0):
            raise ConfigurationError(f"alpha must lie in [1, 2), got {self.alpha}")

    def check_density(self, density: AngularDensity) -> None:
        if self.alpha == 1.0 and not self.truncated and not density.symmetric:
            raise ConfigurationError(
                "alpha = 1 with the nontruncated driver requires a symmetric angular "
                "density (sym): rho(-y) = rho(y)"
            )


@dataclass(frozen=True)
class SmallJumpMoments:
    epsilon: float
    covariance: np.ndarray
    mass_sphere: float


# ---------------------------------------------------------------------------
# sphere quadrature


def _circle_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    phi = 2.0 * np.pi * np.arange(n) / n
    pts = np.column_stack([np.cos(phi), np.sin(phi)])
    return pts, np.full(n, 2.0 * np.pi / n)


def _s2_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    z, wz = np.polynomial.legendre.leggauss(n)
    phi = 2.0 * np.pi * np.arange(2 * n) / (2 * n)
    zz, pp = np.meshgrid(z, phi, indexing="ij")
    s = np.sqrt(1.0 - zz**2)
    pts = np.column_stack([(s * np.cos(pp)).ravel(), (s * np.sin(pp)).ravel(), zz.ravel()])
    w = np.outer(wz, np.full(2 * n, 2.0 * np.pi / (2 * n))).ravel()
    return pts, w


def sphere_rule(dimension: int, level: int) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes and weights on ``S^{d-1}`` at refinement ``level``."""
    if dimension == 1:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    if dimension == 2:
        return _circle_rule(16 * 2**level)
    if dimension == 3:
        return _s2_rule(8 * 2**level)
    raise ConfigurationError(f"sphere quadrature is implemented for d <= 3, got d = {dimension}")


def sphere_integral(fn: Callable[[np.ndarray], np.ndarray], dimension: int, max_level: int = 10):
    """Integrate ``fn(theta)`` (values of shape ``(N, ...)``) over the sphere.

    Refines until the relative change drops below ``QUAD_RTOL``.
    """
    pts, w = sphere_rule(dimension, 0)
    prev = np.tensordot(w, fn(pts), axes=(0, 0))
    if dimension == 1:
        return prev
    for level in range(1, max_level + 1):
        pts, w = sphere_rule(dimension, level)
        cur = np.tensordot(w, fn(pts), axes=(0, 0))
        scale = max(np.max(np.abs(cur)), 1e-300)
        if np.max(np.abs(cur - prev)) <= QUAD_RTOL * scale:
            return cur
        prev = cur
    raise QuadratureError("sphere quadrature did not converge; density may be pathological")


def _sphere_moments(density: AngularDensity):
    d = density.dimension

    def integrand(theta):
        r = density(theta)
        out = np.empty((theta.shape[0], 1 + d + d * d))
        out[:, 0] = r
        out[:, 1 : 1 + d] = theta * r[:, None]
        out[:, 1 + d :] = (theta[:, :, None] * theta[:, None, :]).reshape(-1, d * d) * r[:, None]
        return out

    v = sphere_integral(integrand, d)
    return float(v[0]), v[1 : 1 + d].copy(), v[1 + d :].reshape(d, d).copy()


def uniform_sphere_points(dimension: int, n: int, seed: int = 0) -> np.ndarray:
    """Quasi-random sweep of ``n`` points on the sphere (scrambled Sobol' mapped through the Gaussian)."""
    if dimension == 1:
        return np.where(np.arange(n) % 2 == 0, 1.0, -1.0)[:, None]
    m = max(0, (int(n) - 1).bit_length())
    u = stats.qmc.Sobol(dimension, scramble=True, seed=seed).random_base2(m)[:n]
    g = stats.norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def check_density(density: AngularDensity, n_points: int = 2**13) -> None:
    """Assert the declared bounds and symmetry on a sphere sweep; raise on violation."""
    pts = uniform_sphere_points(density.dimension, n_points)
    vals = density(pts)
    if np.any(~np.isfinite(vals)) or vals.min() < density.lower_bound or vals.max() > density.upper_bound:
        raise ConfigurationError(
            f"density {density.name!r} violates c0 <= rho <= K on the sphere sweep "
            f"(observed range [{vals.min():.6g}, {vals.max():.6g}])"
        )
    if density.symmetric:
        tol = 0.0 if density.name != "user" else 1e-12
        if np.max(np.abs(vals - density(-pts))) > tol:
            raise ConfigurationError(f"density {density.name!r} is declared symmetric but rho(-t) != rho(t)")


# ---------------------------------------------------------------------------
# samplers


def uniform_directions(rng: np.random.Generator, dimension: int, size: int) -> np.ndarray:
    if dimension == 1:
        return np.where(rng.random(size) < 0.5, 1.0, -1.0)[:, None]
    g = rng.standard_normal((size, dimension))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_direction(rng: np.random.Generator, density: AngularDensity, size: Optional[int] = None) -> np.ndarray:
    """Draw directions with law ``rho(theta) / m_rho`` by rejection from the uniform sphere law.

    Returns shape ``(d,)`` when ``size`` is None, else ``(size, d)``.
    """
    want = 1 if size is None else int(size)
    d = density.dimension
    out = np.empty((want, d))
    filled = 0
    proposals = 0
    K = density.upper_bound
    if density.constant is not None:
        # acceptance probability is constant; the accepted law is uniform regardless
        out = uniform_directions(rng, d, want)
        return out[0] if size is None else out
    while filled < want:
        batch = max(2 * (want - filled), 16)
        theta = uniform_directions(rng, d, batch)
        r = density(theta)
        if np.any(r > K * (1 + 1e-12)):
            raise ConfigurationError(f"upper_bound K = {K} is below rho on a proposal; K must dominate sup rho")
        acc = theta[rng.random(batch) * K < r]
        take = min(len(acc), want - filled)
        out[filled : filled + take] = acc[:take]
        filled += take
        proposals += batch
        if proposals > MAX_PROPOSALS * want:
            raise RuntimeError("rejection sampler exceeded the proposal cap; upper_bound is inconsistent with rho")
    return out[0] if size is None else out


def radius_from_uniform(u, alpha: float, r_min: float, r_max: float = math.inf):
    """Inverse CDF of the density proportional to ``r^(-1-alpha)`` on ``[r_min, r_max]``."""
    if r_min <= 0:
        raise ValueError("r_min must be positive")
    if r_min >= r_max:
        raise ValueError("r_min must be below r_max")
    tail = 0.0 if math.isinf(r_max) else r_max ** (-alpha)
    lo = r_min ** (-alpha)
    return (lo - np.asarray(u) * (lo - tail)) ** (-1.0 / alpha)


def sample_radius(rng: np.random.Generator, alpha: float, r_min: float, r_max: float = math.inf, size=None):
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    u = rng.random(size)
    r = radius_from_uniform(u, alpha, r_min, r_max)
    return float(r) if size is None else r


def radial_cdf(r, alpha: float, r_min: float, r_max: float = math.inf):
    tail = 0.0 if math.isinf(r_max) else r_max ** (-alpha)
    lo = r_min ** (-alpha)
    r = np.clip(r, r_min, r_max)
    return (lo - r ** (-alpha)) / (lo - tail)


# ---------------------------------------------------------------------------
# moment computations


def shell_mass(alpha: float, r_lo: float, r_hi: float) -> float:
    """``int_{r_lo}^{r_hi} r^(-1-alpha) dr``."""
    if r_hi <= r_lo:
        return 0.0
    hi = 0.0 if math.isinf(r_hi) else r_hi ** (-alpha)
    return (r_lo ** (-alpha) - hi) / alpha


def jump_intensity(density: AngularDensity, alpha: float, epsilon: float, r_max: float = math.inf) -> float:
    """Total mass of the Lévy measure on ``{epsilon < |y| <= r_max}``."""
    if not (0 < epsilon <= r_max):
        raise ValueError("need 0 < epsilon <= r_max")
    return density.mass * shell_mass(alpha, epsilon, r_max)


def first_moment_radial(alpha: float, r_lo: float, r_hi: float) -> float:
    """``int_{r_lo}^{r_hi} r^(-alpha) dr`` (the radial factor of ``int y nu(dy)``)."""
    if r_hi <= r_lo:
        return 0.0
    if alpha == 1.0:
        if math.isinf(r_hi):
            raise ConfigurationError("first moment of the alpha = 1 measure diverges at infinity")
        return math.log(r_hi / r_lo)
    hi = 0.0 if math.isinf(r_hi) else r_hi ** (1 - alpha)
    return (r_lo ** (1 - alpha) - hi) / (alpha - 1)


def small_jump_moments(density: AngularDensity, alpha: float, epsilon: float) -> SmallJumpMoments:
    """Covariance of the compensated jumps with ``|y| <= epsilon``."""
    if not (0 < epsilon <= 1):
        raise ValueError("epsilon must lie in (0, 1]")
    mass, _, second = density.sphere_moments
    cov = epsilon ** (2 - alpha) / (2 - alpha) * second
    cov = 0.5 * (cov + cov.T)
    return SmallJumpMoments(epsilon=epsilon, covariance=cov, mass_sphere=mass)


def big_jump_compensator(density: AngularDensity, alpha: float, truncated: bool = False) -> np.ndarray:
    """``int_{|y|>1} y rho(y) |y|^(-d-alpha) dy``; zero at ``alpha = 1``."""
    if alpha == 1.0:
        if not truncated and not density.symmetric:
            raise ConfigurationError("alpha = 1 requires a symmetric density (sym) for the nontruncated driver")
        return np.zeros(density.dimension)
    if density.symmetric:
        return np.zeros(density.dimension)
    return density.sphere_moments[1] / (alpha - 1.0)


def stable_scale_constant(alpha: float) -> float:
    """``2 int_0^inf (1 - cos v) v^(-1-alpha) dv`` for ``alpha`` in (1, 2)."""
    if not (1.0 < alpha < 2.0):
        raise ValueError("alpha must lie in (1, 2)")
    # 1 - cos v = 2 sin^2(v/2) avoids cancellation near 0
    head, _ = integrate.quad(lambda v: 2.0 * math.sin(0.5 * v) ** 2 * v ** (-1.0 - alpha), 0.0, 1.0,
                             epsabs=0, epsrel=1e-12, limit=200)
    osc, _ = integrate.quad(lambda v: v ** (-1.0 - alpha), 1.0, math.inf, weight="cos", wvar=1.0)
    return 2.0 * (head + 1.0 / alpha - osc)


# ---------------------------------------------------------------------------
# registry


def _const_eval(c, theta):
    return np.full(theta.shape[0], c)


def _cosine_tilt_eval(a, theta):
    return 1.0 + a * theta[:, 0]


def _two_sided_eval(wp, wm, theta):
    return np.where(theta[:, 0] > 0, wp, wm)


def _const(c):
    return partial(_const_eval, c)


def _cosine_tilt(a):
    return partial(_cosine_tilt_eval, a)


def _two_sided(wp, wm):
    return partial(_two_sided_eval, wp, wm)


def isotropic(dimension: int = 1, level: float = 1.0) -> AngularDensity:
    return AngularDensity(dimension, _const(level), level, level, symmetric=True, holder_beta=1.0,
                          name="isotropic", constant=level)


def cosine_tilt(a: float) -> AngularDensity:
    if not abs(a) < 1:
        raise ConfigurationError("cosine-tilt needs |a| < 1 for a positive lower bound")
    return AngularDensity(2, _cosine_tilt(a), 1 + abs(a), 1 - abs(a), symmetric=(a == 0), holder_beta=1.0,
                          name=f"cosine-tilt:{a:g}", constant=1.0 if a == 0 else None)


def two_sided(w_plus: float, w_minus: float) -> AngularDensity:
    if min(w_plus, w_minus) <= 0:
        raise ConfigurationError("two-sided weights must be positive")
    return AngularDensity(1, _two_sided(w_plus, w_minus), max(w_plus, w_minus), min(w_plus, w_minus),
                          symmetric=(w_plus == w_minus), holder_beta=1.0,
                          name=f"two-sided:{w_plus:g}:{w_minus:g}",
                          constant=w_plus if w_plus == w_minus else None)


def density_from_name(name: str, dimension: int = 1) -> AngularDensity:
    """Resolve ``isotropic``, ``cosine-tilt:<a>`` or ``two-sided:<w+>:<w->``."""
    head, *args = name.strip().split(":")
    try:
        if head == "isotropic" and not args:
            return isotropic(dimension)
        if head == "cosine-tilt" and len(args) == 1:
            return cosine_tilt(float(args[0]))
        if head == "two-sided" and len(args) == 2:
            return two_sided(float(args[0]), float(args[1]))
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"bad density parameters in {name!r}") from exc
    raise ConfigurationError(f"unknown density {name!r}")
