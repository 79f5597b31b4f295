import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import chebyshev as C

from bandpinv import chebpoly
from bandpinv.chebpoly import (
    cheb_T,
    constant_factor,
    decay_base,
    decay_bound,
    grid_error,
    odd_pinv_poly,
    psd_pinv_poly,
    snapped_ceil,
)

SWEEP = [(1.0, 2.0), (1.0, 10.0), (0.5, 50.0)]


def test_cheb_T_values():
    assert cheb_T(0, 0.7) == 1.0
    assert cheb_T(2, 0.3) == pytest.approx(-0.82, abs=1e-15)
    assert cheb_T(5, math.cos(0.4)) == pytest.approx(math.cos(2.0), abs=1e-12)
    with pytest.raises(ValueError):
        cheb_T(-1, 0.0)


@given(st.integers(0, 30), st.floats(-3, 3))
def test_cheb_T_matches_numpy(j, y):
    ref = C.chebval(y, [0] * j + [1])
    assert cheb_T(j, y) == pytest.approx(ref, rel=1e-9, abs=1e-9)


def _odd_oracle(n, a, b, x):
    t = (b - a) / (b + a)
    y = (b * b + a * a - 2 * x**2) / (b * b - a * a)
    series = C.chebval(y, t ** np.arange(n + 1))
    return 2.0 / (b * b - a * a) * (-2 * t / (1 - t * t) * x + 4 * t / (1 - t * t) * x * series)


def _psd_oracle(n, a, b, x):
    t = (math.sqrt(b) - math.sqrt(a)) / (math.sqrt(b) + math.sqrt(a))
    y = (a + b - 2 * x) / (b - a)
    coef = 2 * t ** np.arange(n + 1)
    coef[0] = 1.0
    return C.chebval(y, coef) / math.sqrt(a * b)


@pytest.mark.parametrize("n", [0, 1, 4, 9])
@pytest.mark.parametrize("a, b", SWEEP)
def test_polys_match_independent_series(n, a, b):
    x = np.linspace(-b, b, 301)
    assert np.allclose(odd_pinv_poly(n, a, b)(x), _odd_oracle(n, a, b, x), rtol=1e-12, atol=1e-12)
    xp = np.linspace(0, b, 301)
    assert np.allclose(psd_pinv_poly(n, a, b)(xp), _psd_oracle(n, a, b, xp), rtol=1e-12, atol=1e-12)


def test_odd_n0_is_x_over_3():
    p = odd_pinv_poly(0, 1.0, 3.0)
    x = np.linspace(-3, 3, 13)
    assert np.allclose(p(x), x / 3, atol=1e-15)
    assert grid_error(p, 1.0, 3.0) == pytest.approx(2.0 / 3.0, abs=1e-12)
    assert decay_bound("g", 0, 1.0, 3.0) == pytest.approx(3.7712361663, rel=1e-9)


def test_psd_n0_is_half():
    q = psd_pinv_poly(0, 1.0, 4.0)
    assert q(2.5) == pytest.approx(0.5)
    assert grid_error(q, 1.0, 4.0) == pytest.approx(0.5, abs=1e-12)
    assert 2 * decay_bound("h", 0, 1.0, 4.0) == pytest.approx(0.75)


@given(st.integers(0, 12), st.lists(st.floats(-2, 2), min_size=1, max_size=20))
def test_odd_poly_is_odd(n, xs):
    p = odd_pinv_poly(n, 1.0, 2.0)
    x = np.asarray(xs)
    assert np.array_equal(p(-x), -p(x))


@pytest.mark.parametrize("n", range(0, 13))
@pytest.mark.parametrize("a, b", SWEEP)
def test_even_coefficients_vanish(n, a, b):
    coef = odd_pinv_poly(n, a, b).coefficients()
    assert len(coef) <= 2 * n + 2
    assert np.all(coef[0::2] == 0)
    x = np.linspace(a, b, 7)
    if n <= 6:
        assert np.allclose(np.polynomial.polynomial.polyval(x, coef), odd_pinv_poly(n, a, b)(x), rtol=1e-8)


@pytest.mark.parametrize("n", range(0, 13))
@pytest.mark.parametrize("a, b", SWEEP)
def test_odd_bound_g(n, a, b):
    assert grid_error(odd_pinv_poly(n, a, b), a, b) <= decay_bound("g", n, a, b)


@pytest.mark.parametrize("n", range(0, 13))
@pytest.mark.parametrize("a, b", SWEEP)
def test_psd_bound_2h(n, a, b):
    assert grid_error(psd_pinv_poly(n, a, b), a, b) <= 2 * decay_bound("h", n, a, b)


def test_psd_construction_can_exceed_h():
    # the linear-substitution series is within 2*h but not always within h
    a, b = 1.0, 4.0
    assert grid_error(psd_pinv_poly(0, a, b), a, b) > decay_bound("h", 0, a, b)


def test_degenerate_interval():
    p = odd_pinv_poly(3, 2.0, 2.0)
    q = psd_pinv_poly(3, 2.0, 2.0)
    assert p(2.0) == pytest.approx(0.5)
    assert q(2.0) == pytest.approx(0.5)


@pytest.mark.parametrize("a, b", [(0.0, 1.0), (-1.0, 1.0), (2.0, 1.0)])
def test_domain_errors(a, b):
    with pytest.raises(ValueError):
        odd_pinv_poly(1, a, b)
    with pytest.raises(ValueError):
        psd_pinv_poly(1, a, b)
    with pytest.raises(ValueError):
        decay_bound("f2", 1, a, b)


def test_bound_examples():
    assert decay_bound("f1", 1, 1.0, 4.0) == pytest.approx(0.375)
    assert constant_factor("f2", 1.0, 3.0) == pytest.approx(7.542472332656507)
    assert decay_bound("f2", 3, 1.0, 3.0) == pytest.approx(3.7712361663282534)
    assert decay_bound("demko", 3, 1.0, 3.0) == pytest.approx(4.0 / 3.0)
    assert decay_bound("shin", 3, 1.0, 3.0) == pytest.approx(2.4)
    with pytest.raises(ValueError):
        decay_bound("nope", 1, 1.0, 2.0)
    with pytest.raises(ValueError):
        decay_bound("g", 1.5, 1.0, 2.0)


@pytest.mark.parametrize("x, expected", [(0.3 / 0.1, 3), (2.0000000001, 2), (2.1, 3), (-0.5, 0), (-1.0, -1)])
def test_snapped_ceil(x, expected):
    assert snapped_ceil(x) == expected


@given(st.floats(9.0, 1e8))
def test_f2_constant_beats_demko(b):
    a = 1.0
    ratio = constant_factor("f2", a, b) / constant_factor("demko", a, b)
    assert ratio == pytest.approx(8 * a / math.sqrt(b * b - a * a), rel=1e-10)
    assert ratio < 1


@given(st.floats(1e-3, 1e3), st.floats(1e-6, 1e3))
def test_f2_base_beats_shin(a, gap):
    b = a + gap
    if chebpoly._is_degenerate(a, b) or b == a:
        return
    assert decay_base("f2", a, b) < decay_base("shin", a, b)
