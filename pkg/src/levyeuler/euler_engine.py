"""Euler scheme on coupled dyadic grids, plus an event-driven oracle.

The recursion freezes ``b`` and ``G`` at the left end of each cell, so with the
cell increments of the driver it reproduces the continuous-time scheme
exactly at grid times; there is no additional discretisation inside a cell.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .coefficients import SdeCoefficients
from .path_driver import (
    DriverSpec,
    PathSkeleton,
    aggregate,
    base_noise,
    build_skeleton,
    check_resolution,
)


class PathAborted(FloatingPointError):
    pass


@dataclass(frozen=True, eq=False)
class EulerPath:
    resolution: int
    states: np.ndarray  # (n + 1, d)
    driver_kind: str

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.resolution + 1) / self.resolution


def run_euler(coeffs: SdeCoefficients, increments: np.ndarray, x0=None) -> tuple[np.ndarray, np.ndarray]:
    """Euler recursion on a batch of paths.

    Parameters
    ----------
    increments : ndarray, shape (P, n, d)
        Driver increments per cell.
    x0 : array_like, optional
        Initial state, defaults to ``coeffs.x0``.

    Returns
    -------
    states : ndarray, shape (P, n + 1, d)
    aborted : ndarray of bool, shape (P,)
        Paths that produced a non-finite state.
    """
    P, n, d = increments.shape
    h = 1.0 / n
    x = np.empty((P, d))
    x[:] = coeffs.x0 if x0 is None else x0
    comp = np.zeros((P, d))
    states = np.empty((P, n + 1, d))
    states[:, 0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            step = coeffs.drift(x) * h + coeffs.diffusion_apply(x, increments[:, k])
            # Kahan-compensated accumulation
            y = step - comp
            t = x + y
            comp = (t - x) - y
            x = t
            states[:, k + 1] = x
    aborted = ~np.isfinite(states).all(axis=(1, 2))
    return states, aborted


def _kind(spec: DriverSpec) -> str:
    return "L0" if spec.truncated else "L"


def euler_path(coeffs: SdeCoefficients, skeleton: PathSkeleton, spec: DriverSpec, n: int) -> EulerPath:
    check_resolution(n, skeleton.base_log2)
    inc = aggregate(base_noise(skeleton), n, skeleton.compensator_drift)
    states, aborted = run_euler(coeffs, inc[None])
    if aborted[0]:
        raise PathAborted(f"Euler path {skeleton.path_index} at n = {n} produced a non-finite state")
    return EulerPath(n, states[0], _kind(spec))


def reference_path(coeffs: SdeCoefficients, skeleton: PathSkeleton, spec: DriverSpec) -> EulerPath:
    return euler_path(coeffs, skeleton, spec, 2**skeleton.base_log2)


def simulate_block(coeffs: SdeCoefficients, spec: DriverSpec, master_seed: int, path_indices: Sequence[int],
                   resolutions: Iterable[int]) -> tuple[dict[int, np.ndarray], np.ndarray, np.ndarray]:
    """Run every resolution on the same skeletons.

    Returns ``({n: states}, aborted, base)`` where ``base`` is the per-base-cell
    noise of shape ``(P, n_base, d)`` (no compensator).
    """
    skels = [build_skeleton(master_seed, int(i), spec) for i in path_indices]
    base = np.stack([base_noise(s) for s in skels])
    drift = spec.compensator_drift() if not spec.exact_marginals else np.zeros(spec.dimension)
    out = {}
    aborted = np.zeros(len(skels), dtype=bool)
    for n in resolutions:
        check_resolution(n, spec.base_log2)
        states, ab = run_euler(coeffs, aggregate(base, n, drift))
        out[n] = states
        aborted |= ab
    return out, aborted, base


def _ode_rhs(coeffs: SdeCoefficients, drift_c: np.ndarray):
    def rhs(_t, x):
        xb = x[None, :]
        return (coeffs.drift(xb) - coeffs.diffusion_apply(xb, drift_c[None, :]))[0]
    return rhs


def exact_finite_activity_path(coeffs: SdeCoefficients, skeleton: PathSkeleton, spec: DriverSpec,
                               ode_tol: float = 1e-10) -> np.ndarray:
    """Solve the SDE exactly for a compound-Poisson driver (drop mode).

    Between jumps the state follows ``dx/dt = b(x) - G(x) c`` with ``c`` the
    compensator drift; at each jump ``x <- x + G(x-) y``.  Returns the path on
    the base grid, shape ``(n_base + 1, d)``.
    """
    if skeleton.mode != "drop":
        raise ValueError("the event-driven oracle needs a drop-mode skeleton")
    n_base = 2**skeleton.base_log2
    grid = np.arange(n_base + 1) / n_base
    d = spec.dimension
    out = np.empty((n_base + 1, d))
    x = np.array(coeffs.x0, dtype=float).reshape(d)
    rhs = _ode_rhs(coeffs, np.asarray(skeleton.compensator_drift, dtype=float))
    still = coeffs.constant and not np.any(coeffs.drift(x[None])) and not np.any(skeleton.compensator_drift)
    edges = np.concatenate([[0.0], skeleton.jump_times, [1.0]])
    for j in range(len(edges) - 1):
        a, b = edges[j], edges[j + 1]
        lo = np.searchsorted(grid, a, side="left")
        hi = np.searchsorted(grid, b, side="left") if j < len(edges) - 2 else n_base + 1
        pts = grid[lo:hi]
        if still or b <= a:
            out[lo:hi] = x
            xend = x
        else:
            sol = solve_ivp(rhs, (a, b), x, method="DOP853", rtol=ode_tol, atol=ode_tol * 1e-2,
                            dense_output=True)
            if sol.status < 0:
                raise FloatingPointError(f"ODE solver failed on [{a}, {b}]: {sol.message}")
            if len(pts):
                out[lo:hi] = sol.sol(pts).T
            xend = sol.y[:, -1]
        if j < len(edges) - 2:
            y = skeleton.jump_marks[j]
            x = xend + coeffs.diffusion_apply(xend[None], y[None])[0]
        else:
            x = xend
    return out


def dump_path_csv(path: EulerPath, file) -> None:
    """Write ``t, x1..xd`` rows (LF line endings)."""
    d = path.states.shape[1]
    with open(file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(d)])
        for t, x in zip(path.times, path.states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x])
