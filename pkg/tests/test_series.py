import math

import mpmath as mp
import numpy as np
import pytest

from occtime import series as S
from occtime.quadrature import QuadratureResult

from _shared import q1_at, series_fast

mp.mp.dps = 30

# Z(1) = int_1^inf (z-1) z^(-4/3) Ai(z^(2/3)) dz, mpmath at 30 digits
Z1_PIN = 0.0627150472424792322975
# epsilon from a fast-tier run of this package; regression pin
EPS_PIN = 0.00087207319927


def _exact(value):
    return QuadratureResult(value, 0.0, 0, True)


def test_z_pin_is_reproducible_with_mpmath():
    ref = mp.quad(lambda z: (z - 1) * z ** (-mp.mpf(4) / 3) * mp.airyai(z ** (mp.mpf(2) / 3)),
                  [1, 2, 5, 15, 40, mp.inf])
    assert float(ref) == pytest.approx(Z1_PIN, rel=1e-15)


def test_z_direct_and_table():
    v, e, ok = S.z_integral_direct([1.0])
    assert ok.all() and v[0] == pytest.approx(Z1_PIN, rel=1e-13)
    Z, noise = S.z_table()(np.array([1.0]))
    assert Z[0] == pytest.approx(Z1_PIN, rel=1e-12)
    assert abs(Z[0] - Z1_PIN) <= noise[0] + 1e-16 * Z1_PIN


def test_z_table_across_range():
    y = np.array([1e-3, 0.05, 0.4, 2.0, 7.5, 20.0, 45.0])
    Z, noise = S.z_table()(y)
    ref, _, _ = S.z_integral_direct(y)
    np.testing.assert_allclose(Z, ref, rtol=1e-11)
    assert S.z_table()(np.array([60.0]))[0][0] == 0.0


@pytest.mark.parametrize("y", [0.01, 0.3, 3.0])
def test_z_direct_against_mpmath(y):
    f = lambda z: (z - 1) * z ** (-mp.mpf(4) / 3) * mp.airyai(y * z ** (mp.mpf(2) / 3))  # noqa: E731
    ref = mp.quad(f, [1, 2, 10, 100, 1000, mp.inf])
    assert S.z_integral_direct([y])[0][0] == pytest.approx(float(ref), rel=1e-10)


def test_closed_integrals_against_mpmath():
    ci = S.closed_integrals()

    def m1(a):
        return 1 / (2 * mp.pi * mp.sqrt(3) * (a * a + a + 1))

    ref = mp.quad(lambda z: (z - 1) * z ** (-mp.mpf(4) / 3) * m1(z ** (mp.mpf(2) / 3)),
                  [1, 10, 100, mp.inf])
    assert ci["C1"].value == pytest.approx(float(ref), rel=1e-12)


def test_airy_moment_formulas_against_mpmath():
    for a in (0.5, 2.0, 3.0):
        m1 = mp.quad(lambda x: x * mp.airyai(x) * mp.airyai(a * x), [0, 3, 10, mp.inf])
        m4 = mp.quad(lambda x: x**4 * mp.airyai(x) * mp.airyai(a * x), [0, 3, 10, mp.inf])
        assert S._m1(a) == pytest.approx(float(m1), rel=1e-13)
        assert S._m4(a) == pytest.approx(float(m4), rel=1e-13)


def test_q0_closed_coefficients():
    q0 = S.q0_coefficients()
    assert q0[1].value == -0.5
    assert q0[2].value == pytest.approx(S.C2_EXACT, abs=1e-12)
    assert q0[3].value == pytest.approx(S.Q0_3_EXACT, abs=1e-12)
    assert q0[4].value == pytest.approx(S.Q0_4_EXACT, abs=1e-12)
    assert S.C2_EXACT == pytest.approx(0.413496672, abs=1e-9)
    # evaluated closed forms; the third-moment relation ties c3 to the published 0.370245007
    assert S.Q0_3_EXACT == pytest.approx(-0.3797549927, abs=1e-10)
    assert S.Q0_4_EXACT == pytest.approx(0.3607350220, abs=1e-10)


@pytest.mark.parametrize("s", [1.0, 2.0, 0.5])
def test_q0_direct_route_is_s_independent(s):
    closed = S.q0_coefficients()
    direct = S.q0_coefficients(s, route="direct")
    for n in (2, 3, 4):
        assert direct[n].converged
        assert abs(direct[n].value - closed[n].value) < 1e-10


def test_q0_rejects_bad_input():
    with pytest.raises(ValueError):
        S.q0_coefficients(0.0)
    with pytest.raises(ValueError):
        S.q0_coefficients(route="other")


def test_q1_prefactor():
    q1 = series_fast().q1
    assert q1.converged
    assert abs(q1.value - S.Q1_EXACT) < 1e-8
    assert abs(q1.value - S.Q1_EXACT) <= max(q1.err_est, 1e-14)
    assert S.Q1_EXACT == pytest.approx(1.25 - 3**2.5 / (4 * math.pi), rel=1e-15)


def test_q1_s_scaling():
    a, b = q1_at(1.0), q1_at(2.0)
    assert a.converged and b.converged
    assert abs(a.value - b.value) < 1e-8
    assert abs(b.value - S.Q1_EXACT) < 1e-8


def test_q2_cancellation_and_total():
    q2 = series_fast().q2
    assert abs(q2.residual) < 1e-8
    assert abs(q2.total.value + S.Q1_EXACT) < 1e-8
    assert q2.one_piece.value == -series_fast().q1.value
    assert q2.h_piece.value < 0 < q2.g_piece.value


def test_epsilon():
    eps = series_fast().eps
    assert eps.converged and eps.value > 0
    assert abs(eps.value - S.EPSILON_REFERENCE) < 1e-7
    assert eps.value == pytest.approx(EPS_PIN, abs=5e-12)


def test_assembled_table_matches_closed_forms():
    run = series_fast()
    closed = S.closed_form_series(run.eps.value)
    for n in range(6):
        assert abs(run.table.coeffs[n] - closed.coeffs[n]) <= max(run.table.err[n], 1e-14) + 1e-12
    assert run.table.check_signs() and not run.table.flags
    assert run.table.provenance[5] == "mixed"


def test_published_moments_to_nine_digits():
    m = S.moments(S.closed_form_series())
    assert m.raw[1] == 0.5
    for n, v in {2: 0.413496672, 3: 0.370245007, 4: 0.342587125, 5: 0.322726133}.items():
        assert round(m.raw[n], 9) == v
    assert m.central[2] == pytest.approx(S.C2_EXACT - 0.25, abs=1e-15)
    assert m.central[4] == pytest.approx(3**3.5 / (4 * math.pi) - 59 / 16 + S.EPSILON_REFERENCE,
                                         abs=1e-14)
    assert round(m.central[4], 9) == 0.034842117
    assert not m.check()


def test_odd_relations():
    m = series_fast().moments
    res = S.odd_relation_residuals(m)
    assert res[1] == 0.0
    assert abs(res[3]) <= m.raw_err[3] + 1.5 * m.raw_err[2] + 1e-14
    assert abs(res[5]) <= 1e-14


def test_shifted_series_is_even():
    for table in (series_fast().table, S.closed_form_series()):
        sh = S.shifted_series(table)
        assert sh[0] == 1.0
        for n in (1, 3, 5):
            assert abs(sh[n]) <= sum(table.err.values()) + 1e-14


def test_laplace_inversion():
    q = S.invert_laplace_series(S.closed_form_series())
    assert q[0] == 1.0 and q[1] == -0.5
    assert q[2] == pytest.approx(S.C2_EXACT / 2)
    assert q[5] == pytest.approx(-0.322726133 / 120, abs=1e-11)


def test_table_invariants():
    with pytest.raises(ValueError):
        S.SeriesTable({0: 1.0, 1: 0.5}, {}, {})
    bad = S.assemble_series({2: _exact(-0.4), 3: _exact(-0.38), 4: _exact(0.36)},
                            _exact(0.0095), _exact(-0.0095), _exact(0.00087))
    assert "coefficient signs do not alternate" in bad.flags


def test_tiers():
    assert S.get_tier("fast").rel_tol == 1e-9
    assert S.get_tier(S.TIERS["paper"]).name == "paper"
    with pytest.raises(ValueError):
        S.get_tier("slow")


def test_mean_occupation():
    assert S.mean_occupation(0.0, 0.0, 1.0) == pytest.approx(0.5, abs=1e-14)
    assert S.mean_occupation(0.0, 0.0, 3.0) == pytest.approx(1.5, abs=1e-13)
    assert S.mean_occupation(1e6, 0.0, 2.0) == pytest.approx(2.0, abs=1e-12)
    for x0, v0 in [(0.3, -0.5), (-1.0, 2.0), (0.0, 0.7)]:
        a = S.mean_occupation(x0, v0, 1.5)
        b = S.mean_occupation(-x0, -v0, 1.5)
        assert a + b == pytest.approx(1.5, abs=1e-12)
        assert 0.0 < a < 1.5
    with pytest.raises(ValueError):
        S.mean_occupation(0.0, 0.0, 0.0)


def test_mean_occupation_against_mpmath():
    x0, v0, t = 0.4, -1.1, 2.0
    ref = t / 2 + mp.quad(lambda u: mp.erf(mp.sqrt(3) / 2 * (x0 + v0 * u) / u**1.5), [0, 0.1, 1, t]) / 2
    assert S.mean_occupation(x0, v0, t) == pytest.approx(float(ref), abs=1e-11)
