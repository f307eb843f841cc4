import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elasticsurf import special

# arguments straddling both regime switches
ARGS = [1e-8, 1e-3, 0.5, 1.0, 1.999, 2.0, 2.001, 5.0, 12.0, 24.999, 25.0, 25.001, 60.0, 400.0,
        1e4]


def oracle(order, t):
    return float(mp.besselj(order, t)), float(mp.bessely(order, t))


@pytest.mark.parametrize("t", ARGS)
@pytest.mark.parametrize("order", [0, 1])
def test_bessel_against_mpmath(order, t):
    j, y = oracle(order, t)
    assert abs(special.bessel_j(order, t) - j) <= 1e-12
    scale = max(1.0, abs(y))
    assert abs(special.bessel_y(order, t) - y) <= 1e-12 * scale


@pytest.mark.parametrize("t", ARGS)
def test_y1_regular_against_mpmath(t):
    with mp.workdps(40):
        want = float(mp.bessely(1, t) + 2 / (mp.pi * t))
    assert abs(special.y1_regular(t) - want) <= 1e-12


def test_trivial_values():
    assert special.bessel_j(0, 0.0) == 1.0
    assert special.bessel_j(1, 0.0) == 0.0


def test_first_zero_of_j0():
    assert abs(special.bessel_j(0, 2.404825557695773)) <= 1e-12


def test_hankel_at_one_matches_series():
    h = special.hankel1(0, 1.0)
    assert abs(h.real - 0.7651976866) < 1e-10
    assert abs(h - complex(mp.hankel1(0, 1))) < 1e-13


def test_hankel_large_argument_asymptotic():
    t = 200.0
    approx = math.sqrt(2 / (math.pi * t)) * np.exp(1j * (t - math.pi / 4))
    h = special.hankel1(0, t)
    assert abs(h - approx) / abs(approx) < 1.0 / t


def test_hankel_small_argument_expansion():
    eps = 1e-6
    lhs = 0.25j * special.hankel1(0, eps)
    rhs = (math.log(1 / eps) / (2 * math.pi) + 0.25j - math.log(0.5) / (2 * math.pi)
           - special.EULER_GAMMA / (2 * math.pi))
    assert abs(lhs - rhs) <= 1e-10


@pytest.mark.parametrize("t", [0.7, 3.0, 18.0, 40.0])
def test_hankel_derivative_relation(t):
    step = 1e-5
    fd = (special.hankel1(0, t + step) - special.hankel1(0, t - step)) / (2 * step)
    assert abs(fd + special.hankel1(1, t)) <= 1e-10 * max(1.0, abs(special.hankel1(1, t)))


@pytest.mark.parametrize("bad", [(2, 1.0), (0, -1.0)])
def test_bessel_j_domain(bad):
    with pytest.raises(ValueError):
        special.bessel_j(*bad)


@pytest.mark.parametrize("t", [0.0, -2.0])
def test_hankel_domain(t):
    with pytest.raises(ValueError):
        special.hankel1(0, t)


def test_vectorized_matches_scalar():
    t = np.array(ARGS)
    j0, j1, y0, y1r = special.bessel_parts(t)
    for k, tk in enumerate(ARGS):
        assert j0[k] == special.bessel_j(0, tk)
        assert y0[k] == special.bessel_y(0, tk)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-4, max_value=300.0))
def test_wronskian(t):
    j0, j1, y0, y1r = special.bessel_parts(np.array([t]))
    y1 = y1r[0] - 2 / (math.pi * t)
    w = j1[0] * y0[0] - j0[0] * y1
    assert abs(w - 2 / (math.pi * t)) <= 1e-12 * max(1.0, 2 / (math.pi * t))


def test_subnormal_argument_is_finite():
    t = 5e-324
    with np.errstate(invalid="raise", divide="raise"):
        y0 = special.bessel_y(0, t)
        y1r = special.y1_regular(t)
    assert np.isfinite(y1r) and abs(y1r) < 1e-300
    assert y0 == pytest.approx((2 / math.pi) * (math.log(t) - math.log(2) + special.EULER_GAMMA),
                               rel=1e-12)
