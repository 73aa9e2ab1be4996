"""Predicted exponents for the convergence and moment-scaling experiments.

Every rate is an upper bound with an unknown constant; logarithmic factors
such as ``(n / ln n)`` are not resolvable on a short dyadic ladder, so only the
power of ``n`` (or ``t``) is returned, together with a default slope tolerance
wide enough to absorb them.
"""
from __future__ import annotations

from dataclasses import dataclass

from .levy_measure import ConfigurationError


@dataclass(frozen=True)
class Prediction:
    exponent: float
    tolerance: float
    claim: str


def _check_moment(p: float, alpha: float, truncated: bool) -> None:
    if p <= 0:
        raise ConfigurationError("moment order p must be positive")
    if not truncated and p >= alpha:
        raise ConfigurationError(
            f"p = {p} >= alpha = {alpha}: only the moments p < alpha exist for the nontruncated driver"
        )


def strong_rate(alpha: float, p: float, *, truncated: bool, beta: float = 1.0, symmetric: bool = False,
                nondegenerate: bool = False) -> Prediction:
    """Exponent of ``n`` bounding ``E sup_t |X^n_t - X_t|^p``."""
    _check_moment(p, alpha, truncated)
    holder = beta < 1.0
    if holder and not nondegenerate:
        raise ConfigurationError("a Hölder drift needs a uniformly nondegenerate G")
    if holder and not truncated:
        return Prediction(-p * beta / alpha, 0.08, "n^(-p beta/alpha)")
    if holder:
        crit = alpha / beta
        if p < crit:
            return Prediction(-p * beta / alpha, 0.08, "n^(-p beta/alpha), p < alpha/beta")
        if p == crit:
            return Prediction(-1.0, 0.15, "(n/ln n)^(-1), p = alpha/beta")
        return Prediction(-1.0, 0.15, "n^(-1), p > alpha/beta")
    if p < alpha:
        if alpha > 1:
            return Prediction(-p / alpha, 0.10, "(n/ln n)^(-p/alpha)")
        if symmetric:
            return Prediction(-p, 0.10, "(n/ln n)^(-p), alpha = 1 symmetric")
        return Prediction(-p, 0.15, "[n/(ln n)^2]^(-p), alpha = 1")
    if p == alpha:
        return Prediction(-1.0, 0.15, "[n/(ln n)^2]^(-1), p = alpha")
    return Prediction(-1.0, 0.15, "n^(-1), p > alpha")


def weak_rate(alpha: float, beta_phi: float, *, symmetric: bool = False) -> Prediction:
    if alpha > 1:
        return Prediction(-beta_phi / alpha, 0.15, "(n/ln n)^(-beta/alpha)")
    if symmetric:
        return Prediction(-beta_phi, 0.15, "(n/ln n)^(-beta), alpha = 1 symmetric")
    return Prediction(-beta_phi, 0.15, "[n/(ln n)^2]^(-beta), alpha = 1")


def moment_rate(alpha: float, p: float, *, truncated: bool, symmetric: bool = False) -> Prediction:
    """Exponent of ``t`` bounding ``E |L_t|^p`` (``L0`` when truncated) as ``t -> 0``."""
    _check_moment(p, alpha, truncated)
    if p > alpha:
        return Prediction(1.0, 0.10, "C t, p > alpha")
    if p == alpha:
        return Prediction(1.0, 0.15, "C t (1 + |ln t|), p = alpha")
    if alpha > 1:
        return Prediction(p / alpha, 0.07, "C t^(p/alpha), p < alpha")
    if symmetric:
        return Prediction(p, 0.07, "C t^p, alpha = 1 symmetric")
    return Prediction(p, 0.10, "C t^p (1 + |ln t|)^p, alpha = 1")


def increment_rate(alpha: float, p: float, *, truncated: bool, symmetric: bool = False) -> Prediction:
    """Exponent of ``n`` bounding ``E |X^n_t - X^n_{pi_n(t)}|^p``."""
    m = moment_rate(alpha, p, truncated=truncated, symmetric=symmetric)
    tol = 0.08 if p < alpha else 0.10
    return Prediction(-m.exponent, tol, m.claim.replace("C t", "C n^-1").replace("t^", "n^-"))
