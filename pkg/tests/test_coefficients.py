import numpy as np
import pytest

from levyeuler.coefficients import SdeCoefficients, builtin, holder_quotient_sup, validate


@pytest.mark.parametrize("name", ["holder-drift:0.4", "holder-drift:0.8:0.3", "lipschitz", "constant:0.5:1.0"])
@pytest.mark.parametrize("d", [1, 2])
def test_builtin_families_meet_declared_constants(name, d):
    c = builtin(name, d)
    center = 0.3 if name.endswith(":0.3") else 0.0
    assert validate(c, 4000, seed=1, center=center).ok


def test_degenerate_family_declares_no_lower_bound():
    c = builtin("degenerate")
    assert c.nondegenerate is None
    assert validate(c, 2000).min_abs_det < 1e-3


def test_holder_quotient_attained_near_singularity():
    # |x|^0.4 sign(x) has seminorm 2^0.6 at symmetric pairs
    c = builtin("holder-drift:0.4")
    q = holder_quotient_sup(c, 20000, seed=2)
    assert 0.95 * 2**0.6 <= q <= 2**0.6 * (1 + 1e-9)


def test_validator_flags_understated_constant():
    c = builtin("holder-drift:0.4")
    bad = SdeCoefficients(c.name, 1, c.drift, c.diffusion, beta=0.4, holder_constant=1.0, drift_bound=1.0,
                          diffusion_bound=1.2, diffusion_lipschitz=0.2, nondegenerate=0.8,
                          diffusion_diag=c.diffusion_diag)
    rep = validate(bad, 4000)
    assert not rep.ok
    assert any("Hölder" in v for v in rep.violations)


def test_validator_needs_enough_samples():
    with pytest.raises(ValueError):
        validate(builtin("lipschitz"), 10)


def test_holder_warning_below_threshold():
    with pytest.warns(UserWarning, match="1 - alpha/2"):
        builtin("holder-drift:0.2", alpha=1.5)


def test_unknown_family():
    with pytest.raises(KeyError):
        builtin("nope")


def test_diffusion_apply_matches_matrix_product():
    c = builtin("lipschitz", 3)
    x = np.random.default_rng(0).standard_normal((5, 3))
    dl = np.random.default_rng(1).standard_normal((5, 3))
    full = np.einsum("pij,pj->pi", c.diffusion(x), dl)
    assert np.allclose(c.diffusion_apply(x, dl), full)
