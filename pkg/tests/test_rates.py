import pytest

from levyeuler.levy_measure import ConfigurationError
from levyeuler.rates import increment_rate, moment_rate, strong_rate, weak_rate


def test_holder_nontruncated():
    r = strong_rate(1.5, 1.0, truncated=False, beta=0.4, nondegenerate=True)
    assert r.exponent == pytest.approx(-0.4 / 1.5)
    assert r.exponent + r.tolerance == pytest.approx(-0.18666666, abs=1e-6)


def test_holder_needs_nondegenerate():
    with pytest.raises(ConfigurationError):
        strong_rate(1.5, 1.0, truncated=False, beta=0.4)


@pytest.mark.parametrize("p, exponent", [(1.0, -0.8 / 1.5), (1.875, -1.0), (4.0, -1.0)])
def test_truncated_holder_table(p, exponent):
    assert strong_rate(1.5, p, truncated=True, beta=0.8, nondegenerate=True).exponent == pytest.approx(exponent)


def test_lipschitz_rates():
    assert strong_rate(1.5, 1.0, truncated=False).exponent == pytest.approx(-2 / 3)
    assert strong_rate(1.0, 0.5, truncated=False, symmetric=True).exponent == pytest.approx(-0.5)
    assert strong_rate(1.5, 3.0, truncated=True).exponent == -1.0
    assert strong_rate(1.5, 1.5, truncated=True).tolerance == 0.15


def test_nontruncated_rejects_p_at_least_alpha():
    with pytest.raises(ConfigurationError, match="only the moments"):
        strong_rate(1.5, 1.5, truncated=False)
    with pytest.raises(ConfigurationError):
        moment_rate(1.5, 3.0, truncated=False)


def test_moment_table():
    assert moment_rate(1.5, 0.75, truncated=True).exponent == pytest.approx(0.5)
    assert moment_rate(1.5, 3.0, truncated=True).exponent == 1.0
    assert moment_rate(1.0, 0.5, truncated=False, symmetric=True).exponent == 0.5


def test_increment_and_weak():
    r = increment_rate(1.5, 1.0, truncated=False)
    assert (r.exponent, r.tolerance) == (pytest.approx(-2 / 3), 0.08)
    assert increment_rate(1.5, 3.0, truncated=True).exponent == -1.0
    assert weak_rate(1.5, 0.5).exponent == pytest.approx(-1 / 3)
