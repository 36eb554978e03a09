import math

import mpmath as mp
import numpy as np
import pytest

from occtime.kernel import KernelParams, K_fredholm, k_array, k_closed, k_oracle

mp.mp.dps = 30


def _random_points(n, seed):
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.2, 3.0, n)
    p = rng.uniform(0.01, 3.0, n)
    F = np.exp(rng.uniform(math.log(0.1), math.log(10.0), n))
    G = np.exp(rng.uniform(math.log(0.1), math.log(10.0), n))
    return list(zip(s, p, F, G))


def test_closed_form_at_unit_point():
    expected = -(2 ** (-4 / 3)) * float(mp.airyai(3 * mp.mpf(2) ** (-1 / 3)))
    assert k_closed(KernelParams(1.0, 1.0, 1.0, 1.0)) == pytest.approx(expected, rel=1e-14)


def test_vanishes_at_p_zero():
    assert k_closed(KernelParams(1.0, 0.0, 1.3, 0.4)) == 0.0
    o = k_oracle(KernelParams(1.0, 0.0, 1.3, 0.4))
    assert abs(o.value) < 1e-10


@pytest.mark.parametrize("idx,pt", list(enumerate(_random_points(50, 7))))
def test_oracle_matches_closed_form(idx, pt):
    params = KernelParams(*map(float, pt))
    o = k_oracle(params)
    c = k_closed(params)
    assert o.converged
    assert abs(o.value - c) <= 1e-8 * abs(c)
    assert abs(o.reduced.value - c) <= 1e-8 * abs(c)


def test_oracle_spec_point():
    params = KernelParams(1.0, 0.5, 1.0, 2.0)
    assert abs(k_oracle(params).value - k_closed(params)) <= 1e-8


def test_exchange_symmetry():
    # s -> s+p with p -> -p turns k(F,G) into -k(G,F)
    for s, p, F, G in _random_points(20, 11):
        lhs = float(k_array(s + p, -p, F, G))
        rhs = -float(k_array(s, p, G, F))
        assert lhs == pytest.approx(rhs, rel=1e-13)


def test_sign_and_vectorisation():
    F = np.linspace(0.1, 5.0, 11)
    vals = k_array(1.0, 0.7, F, 2.0)
    assert np.all(vals < 0)
    for f, v in zip(F, vals):
        assert v == pytest.approx(k_closed(KernelParams(1.0, 0.7, float(f), 2.0)), rel=1e-14)


def test_scale_covariance():
    # (s, p, F, G) -> (lam^(2/3) s, lam^(2/3) p, lam F, lam G) divides k by lam
    lam = 1.7
    c = lam ** (2 / 3)
    for s, p, F, G in _random_points(10, 3):
        base = float(k_array(s, p, F, G))
        assert float(k_array(c * s, c * p, lam * F, lam * G)) == pytest.approx(base / lam, rel=1e-13)


def test_params_validation():
    with pytest.raises(ValueError):
        KernelParams(1.0, -0.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        KernelParams(0.0, 0.1, 1.0, 1.0)


def test_fredholm_against_mpmath():
    s, p, F, G = 1.0, 0.8, 0.7, 1.9

    def k(a, b):
        z = ((s + p) * a + s * b) / (mp.cbrt(a + b) * (a * b) ** (mp.mpf(2) / 3))
        return -p * (a * b) ** (-mp.mpf(1) / 6) * (a + b) ** (-mp.mpf(4) / 3) * mp.airyai(z)

    ref = -mp.quad(lambda H: k(F, H) * k(G, H), [0, 0.1, 1, 10, 100, mp.inf])
    r = K_fredholm(s, p, F, G)
    assert r.converged
    assert r.value == pytest.approx(float(ref), rel=1e-11)


def test_fredholm_symmetry_and_sign():
    for s, p, F, G in _random_points(20, 5):
        a = K_fredholm(s, p, F, G)
        b = K_fredholm(s, p, G, F)
        assert abs(a.value - b.value) <= 1e-10
        assert a.value <= 0


def test_fredholm_is_second_order_in_p():
    s, F, G = 1.0, 0.8, 1.5
    ratios = [K_fredholm(s, p, F, G).value / p**2 for p in (1e-2, 1e-3, 1e-4)]
    assert ratios[1] / ratios[2] == pytest.approx(1.0, abs=2e-3)
    assert abs(ratios[0] - ratios[1]) > abs(ratios[1] - ratios[2])
    assert K_fredholm(s, 0.0, F, G).value == 0.0


def test_fredholm_integrand_tail_is_cubic():
    s, p, F, G = 1.0, 0.6, 0.9, 1.7
    H = np.array([1e4, 1e5, 1e6])
    scaled = k_array(s, p, F, H) * k_array(s, p, G, H) * H**3
    assert scaled[2] == pytest.approx(scaled[1], rel=1e-3)
    assert abs(scaled[2] / scaled[1] - 1) < abs(scaled[1] / scaled[0] - 1)
