import math

import numpy as np
import pytest

from levyeuler.coefficients import builtin
from levyeuler.euler_engine import (
    PathAborted,
    dump_path_csv,
    euler_path,
    exact_finite_activity_path,
    reference_path,
    run_euler,
    simulate_block,
)
from levyeuler.levy_measure import StableIndex, isotropic, two_sided
from levyeuler.path_driver import DriverSpec, build_skeleton, driver_increments

X1_ODE = 1.95629497100754  # 2 arctan(tan(1/2) e), solution of x' = sin x, x(0) = 1 at t = 1


def spec(**kw):
    base = dict(index=StableIndex(1.5), density=isotropic(1), epsilon_cut=0.05, small_jump_mode="gaussian_surrogate",
                base_log2=10)
    base.update(kw)
    return DriverSpec(**base)


def test_constant_coefficients_are_exact_on_every_grid():
    c = builtin("constant:0.5:2.0")
    s = spec(density=two_sided(1.5, 0.5))
    sk = build_skeleton(3, 0, s)
    L = np.concatenate([[0.0], np.cumsum(driver_increments(sk, s, 2**10)[:, 0])])
    for n in (16, 128, 1024):
        path = euler_path(c, sk, s, n)
        t = path.times
        exact = 0.5 * t + 2.0 * L[:: 1024 // n]
        assert np.max(np.abs(path.states[:, 0] - exact)) < 1e-12


def test_euler_converges_to_ode_without_noise():
    # truncated driver with epsilon = 1 in drop mode carries no jumps at all
    s = spec(index=StableIndex(1.5, truncated=True), epsilon_cut=1.0, small_jump_mode="drop")
    sk = build_skeleton(0, 0, s)
    assert sk.n_jumps == 0
    c = builtin("lipschitz", x0=1.0)
    errs = [abs(euler_path(c, sk, s, n).states[-1, 0] - X1_ODE) for n in (64, 128, 256, 512)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] * 512 == pytest.approx(errs[0] * 64, rel=0.05)  # first order


def test_event_oracle_solves_ode_between_jumps():
    s = spec(index=StableIndex(1.5, truncated=True), epsilon_cut=1.0, small_jump_mode="drop")
    out = exact_finite_activity_path(builtin("lipschitz", x0=1.0), build_skeleton(0, 0, s), s)
    t = np.arange(out.shape[0]) / (out.shape[0] - 1)
    assert np.max(np.abs(out[:, 0] - 2 * np.arctan(np.tan(0.5) * np.exp(t)))) < 1e-9


def test_event_oracle_constant_coefficients_with_jumps():
    s = spec(density=two_sided(1.5, 0.5), epsilon_cut=0.5, small_jump_mode="drop")
    sk = build_skeleton(5, 1, s)
    assert sk.n_jumps > 0
    c = builtin("constant:0.3:1.5")
    out = exact_finite_activity_path(c, sk, s)
    ref = reference_path(c, sk, s).states
    assert np.max(np.abs(out - ref)) < 1e-9


def test_finer_grid_differs_from_coarse_grid():
    s, c = spec(), builtin("lipschitz")
    sk = build_skeleton(2, 0, s)
    coarse = euler_path(c, sk, s, 32).states
    fine = euler_path(c, sk, s, 64).states[::2]
    assert np.all(np.abs(fine[1:] - coarse[1:]) > 0)


def test_event_oracle_needs_drop_mode():
    s = spec()
    with pytest.raises(ValueError):
        exact_finite_activity_path(builtin("lipschitz"), build_skeleton(0, 0, s), s)


def test_simulate_block_matches_single_paths():
    s, c = spec(), builtin("lipschitz")
    states, aborted, _ = simulate_block(c, s, 9, [0, 1, 2], [16, 64])
    assert not aborted.any()
    for k, i in enumerate([0, 1, 2]):
        single = euler_path(c, build_skeleton(9, i, s), s, 64).states
        assert np.array_equal(states[64][k], single)


def test_run_euler_flags_non_finite_paths():
    c = builtin("lipschitz")
    inc = np.zeros((2, 4, 1))
    inc[1, 2, 0] = np.inf
    _, aborted = run_euler(c, inc)
    assert aborted.tolist() == [False, True]


def test_euler_path_raises_on_abort():
    from dataclasses import replace

    s = spec()
    sk = build_skeleton(0, 0, s)
    bad = replace(sk, base_small_increments=np.full_like(sk.base_small_increments, np.nan))
    with pytest.raises(PathAborted):
        euler_path(builtin("lipschitz"), bad, s, 16)


def test_dump_path_csv(tmp_path):
    s = spec()
    p = euler_path(builtin("lipschitz"), build_skeleton(0, 0, s), s, 16)
    f = tmp_path / "path.csv"
    dump_path_csv(p, f)
    raw = f.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "t,x1" and len(lines) == 18
    assert math.isclose(float(lines[-1].split(",")[0]), 1.0)
