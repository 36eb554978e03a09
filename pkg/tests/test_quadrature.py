import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from occtime.quadrature import (QuadratureError, QuadratureSpec, airy_cutoff, integrate_1d,
                                integrate_batch, integrate_nested)
from occtime.specfun import ai

mp.mp.dps = 30


def test_polynomial_exact():
    r = integrate_1d(lambda x: x, QuadratureSpec(0.0, 1.0, 1e-12, 1e-15))
    assert r.converged
    assert r.value == pytest.approx(0.5, abs=1e-15)


def test_airy_tail_one_third():
    r = integrate_1d(ai, QuadratureSpec(0.0, math.inf, 1e-12, 1e-15, decay="airy"))
    assert abs(r.value - 1 / 3) < 1e-13
    assert abs(r.value - 1 / 3) <= max(r.err_est, 1e-15)


def test_airy_product_against_mpmath():
    # int_0^inf x Ai(x) Ai(2x) dx
    ref = float(mp.quad(lambda x: x * mp.airyai(x) * mp.airyai(2 * x), [0, 2, 6, mp.inf]))
    r = integrate_1d(lambda x: x * ai(x) * ai(2 * x),
                     QuadratureSpec(0.0, math.inf, 1e-12, 1e-16, decay="airy"))
    assert r.value == pytest.approx(ref, rel=1e-12)
    assert r.value == pytest.approx(0.0131269, abs=5e-8)


@pytest.mark.parametrize("k", [2.0, 3.5])
def test_algebraic_tail(k):
    # int_0^inf (1+x)^-k = 1/(k-1)
    r = integrate_1d(lambda x: (1 + x) ** -k,
                     QuadratureSpec(0.0, math.inf, 1e-12, 1e-16, decay="algebraic", exponent=k))
    assert r.value == pytest.approx(1 / (k - 1), rel=1e-12)


def test_negative_infinite_lower_bound_reflects():
    r = integrate_1d(lambda x: np.exp(x), QuadratureSpec(-math.inf, 0.0, 1e-12, 1e-16,
                                                        decay="algebraic", exponent=3.0))
    assert r.value == pytest.approx(1.0, rel=1e-10)


def test_separable_product():
    specs = [QuadratureSpec(0.0, math.inf, 1e-10, 1e-14, decay="airy"),
             QuadratureSpec(0.0, math.inf, 1e-12, 1e-16, decay="airy")]
    r = integrate_nested(lambda x, y: ai(x) * ai(y), specs)
    assert r.converged
    assert r.value == pytest.approx(1 / 9, abs=1e-11)


def test_bilinear_and_dependent_bounds():
    specs = [QuadratureSpec(0.0, 1.0, 1e-12, 1e-15),
             QuadratureSpec(0.0, 1.0, 1e-12, 1e-15)]
    assert integrate_nested(lambda x, y: x * y, specs).value == pytest.approx(0.25, abs=1e-15)
    tri = [QuadratureSpec(0.0, 1.0, 1e-12, 1e-15),
           QuadratureSpec(0.0, lambda x: x, 1e-12, 1e-15)]
    assert integrate_nested(lambda x, y: np.ones_like(x * y), tri).value == pytest.approx(0.5, abs=1e-14)


def test_level_weights_match_inline_product():
    specs = [QuadratureSpec(0.0, 2.0, 1e-11, 1e-15),
             QuadratureSpec(0.0, 1.0, 1e-13, 1e-17)]
    inline = integrate_nested(lambda x, y: np.exp(-x) * np.cos(x * y), specs)
    weighted = integrate_nested(lambda x, y: np.cos(x * y), specs, [lambda x: np.exp(-x), None])
    assert weighted.value == pytest.approx(inline.value, rel=1e-13)


def test_triple_nested():
    specs = [QuadratureSpec(0.0, 1.0, 1e-10, 1e-14),
             QuadratureSpec(0.0, 1.0, 1e-12, 1e-16),
             QuadratureSpec(0.0, 1.0, 1e-12, 1e-16)]
    r = integrate_nested(lambda x, y, z: np.exp(x + y + z), specs)
    assert r.value == pytest.approx((math.e - 1) ** 3, rel=1e-12)


def test_batch_matches_scalar():
    a = np.array([0.0, 1.0, 2.0])
    b = np.array([1.0, 3.0, 2.5])
    vals, errs, conv = integrate_batch(lambda x, rows: np.sin(x), a, b,
                                       QuadratureSpec(rel_tol=1e-13, abs_tol=1e-16))
    assert conv.all()
    np.testing.assert_allclose(vals, np.cos(a) - np.cos(b), rtol=1e-13, atol=1e-16)


def test_non_finite_raises_with_abscissa():
    with pytest.raises(QuadratureError) as exc:
        integrate_1d(lambda x: np.where(x > 0.7, np.nan, 1.0),
                     QuadratureSpec(0.0, 1.0))
    assert exc.value.abscissa > 0.7


def test_nonconvergence_is_reported():
    r = integrate_1d(lambda x: np.sin(1 / x), QuadratureSpec(1e-6, 1.0, 1e-14, 1e-18,
                                                              max_subdivisions=4))
    assert not r.converged
    assert r.failed_level == 0


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(rel_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(decay="exponential")
    with pytest.raises(ValueError):
        QuadratureSpec(decay="algebraic", exponent=1.0)
    with pytest.raises(ValueError):
        integrate_1d(np.exp, QuadratureSpec(0.0, math.inf))
    specs = [QuadratureSpec(0.0, 1.0, 1e-12), QuadratureSpec(0.0, 1.0, 1e-8)]
    with pytest.raises(ValueError):
        integrate_nested(lambda x, y: x, specs)


def test_airy_cutoff_truncation_below_tolerance():
    for tol in (1e-8, 1e-12, 1e-16):
        assert float(ai(np.array(airy_cutoff(tol)))) < tol


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(-3.0, 3.0))
def test_error_estimate_is_honest(a, c):
    # int_0^a exp(c x) dx
    exact = a if c == 0 else math.expm1(c * a) / c
    r = integrate_1d(lambda x: np.exp(c * x), QuadratureSpec(0.0, a, 1e-10, 1e-14))
    assert abs(r.value - exact) <= r.err_est + 4e-16 * abs(exact)


def test_deterministic():
    spec = QuadratureSpec(0.0, math.inf, 1e-12, 1e-16, decay="airy")
    f = lambda x: np.cos(x) * ai(x)  # noqa: E731
    assert integrate_1d(f, spec).value == integrate_1d(f, spec).value


def _airy_battery():
    out = [(ai, 1 / 3)]
    for a in (0.5, 2.0, 3.0):
        out.append((lambda x, a=a: x * ai(x) * ai(a * x),
                    (a - 1) / (a**3 - 1) / (2 * math.pi * math.sqrt(3))))
        out.append((lambda x, a=a: x**4 * ai(x) * ai(a * x),
                    math.sqrt(3) / math.pi * (a + 1) * ((a - 1) / (a**3 - 1)) ** 3))
    return out


@pytest.mark.parametrize("f,exact", _airy_battery())
@pytest.mark.parametrize("rel", [1e-6, 1e-9, 1e-12])
def test_error_estimate_honest_on_airy_moments(f, exact, rel):
    r = integrate_1d(f, QuadratureSpec(0.0, math.inf, rel, rel * 1e-3, decay="airy"))
    assert r.converged
    assert abs(r.value - exact) <= 10 * r.err_est + 1e-16


def test_linearity():
    rng = np.random.default_rng(0)
    spec = QuadratureSpec(0.0, math.inf, 1e-12, 1e-16, decay="airy")
    for _ in range(5):
        al, be, w = rng.normal(size=3)
        f = lambda x: ai(x) * np.cos(w * x)  # noqa: E731
        g = lambda x: ai(x) * x**2  # noqa: E731
        rf, rg = integrate_1d(f, spec), integrate_1d(g, spec)
        r = integrate_1d(lambda x: al * f(x) + be * g(x), spec)
        assert abs(r.value - (al * rf.value + be * rg.value)) <= (
            r.err_est + abs(al) * rf.err_est + abs(be) * rg.err_est + 1e-16)


@pytest.mark.parametrize("c", [1.0, 5.0])
def test_interval_additivity(c):
    f = lambda x: x * ai(x) * ai(2 * x)  # noqa: E731
    whole = integrate_1d(f, QuadratureSpec(0.0, math.inf, 1e-12, 1e-17, decay="airy"))
    left = integrate_1d(f, QuadratureSpec(0.0, c, 1e-12, 1e-17))
    right = integrate_1d(f, QuadratureSpec(c, math.inf, 1e-12, 1e-17, decay="airy"))
    assert abs(whole.value - left.value - right.value) <= (
        whole.err_est + left.err_est + right.err_est + 1e-17)


@pytest.mark.parametrize("tol", [1e-8, 1e-12])
def test_tail_truncation_sound(tol):
    xs = airy_cutoff(tol)
    a = integrate_1d(ai, QuadratureSpec(0.0, xs, 1e-13, tol * 1e-3))
    b = integrate_1d(ai, QuadratureSpec(0.0, 2 * xs, 1e-13, tol * 1e-3))
    assert abs(b.value - a.value) < tol
