"""Special functions used throughout the package.

Everything here is built from elementary functions only, so the error
budget of the quadrature layer is fully owned by this repository:

* Airy ``Ai`` and ``Ai'`` (real argument), with ``Ai''`` from the ODE,
* ``erf``,
* ``ln_gamma`` / ``gamma``,
* ``bessel_i`` (modified Bessel function of the first kind, real order),
* ``hyp2f1_quarter``, the single hypergeometric function 2F1(1/4, 1; 1/2; z)
  needed for the maximum-time reference statistics.

The array versions (``ai``, ``aip``, ``airy``, ``erf_array``) accept numpy
arrays and are what the integrands call. The scalar operations return
:class:`EvalResult` with an absolute error estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


@dataclass(frozen=True)
class EvalResult:
    value: float
    abs_err_est: float


AI0 = 0.35502805388781723926  # Ai(0) = 3^(-2/3) / Gamma(2/3)
AIP0 = -0.25881940379280679840  # Ai'(0) = -3^(-1/3) / Gamma(1/3)

_TINY = np.finfo(float).tiny
_EPS = np.finfo(float).eps
_REL_BOUND = 5e-14  # verified against mpmath in tests/test_specfun.py

# Taylor table for Ai on [_XLO, _XHI]; asymptotic expansions outside.
_XLO, _XHI = -10.0, 10.0
_STEP = 1.0 / 16.0
_NTAYLOR = 22


def _asym_coeffs(n):
    u = [1.0]
    for k in range(1, n):
        u.append(u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k))
    v = [1.0] + [-(6 * k + 1) / (6 * k - 1) * u[k] for k in range(1, n)]
    return np.array(u), np.array(v)


_U, _V = _asym_coeffs(40)


def _asym_series(coeffs, inv_zeta, alternate=True):
    """Sum sum_k (-1)^k c_k zeta^-k (or without the sign), truncated at the smallest term."""
    inv_zeta = np.asarray(inv_zeta, dtype=float)
    total = np.zeros_like(inv_zeta)
    term_prev = np.full_like(inv_zeta, np.inf)
    active = np.ones(inv_zeta.shape, dtype=bool)
    power = np.ones_like(inv_zeta)
    for k, c in enumerate(coeffs):
        term = c * power
        if alternate and k % 2:
            term = -term
        mag = np.abs(term)
        active &= mag < term_prev
        total = total + np.where(active, term, 0.0)
        term_prev = np.where(active, mag, term_prev)
        active &= mag > _EPS * np.abs(total)
        if not active.any():
            break
        power = power * inv_zeta
    return total


def _ai_asym_pos(x):
    """Ai, Ai' for x >= _XHI from the exponentially decaying expansion."""
    zeta = 2.0 / 3.0 * x**1.5
    inv = 1.0 / zeta
    e = np.exp(-zeta)
    pref = e / (2.0 * math.sqrt(math.pi))
    ai = pref * x**-0.25 * _asym_series(_U, inv)
    aip = -pref * x**0.25 * _asym_series(_V, inv)
    return ai, aip


def _ai_asym_neg(x):
    """Ai, Ai' for x <= _XLO (oscillatory region)."""
    z = -x
    zeta = 2.0 / 3.0 * z**1.5
    inv2 = 1.0 / zeta**2
    # even/odd parts of the series in 1/zeta, each alternating in pairs
    ue, uo = _U[0::2], _U[1::2]
    ve, vo = _V[0::2], _V[1::2]
    pe = _asym_series(ue, inv2)
    po = _asym_series(uo, inv2) / zeta
    qe = _asym_series(ve, inv2)
    qo = _asym_series(vo, inv2) / zeta
    phase = zeta - math.pi / 4.0
    c, s = np.cos(phase), np.sin(phase)
    rp = 1.0 / math.sqrt(math.pi)
    ai = rp * z**-0.25 * (c * pe + s * po)
    aip = rp * z**0.25 * (s * qe - c * qo)
    return ai, aip


def _taylor_coeffs(c, y0, y1, n=_NTAYLOR):
    """Taylor coefficients of the Airy-ODE solution about c with y(c)=y0, y'(c)=y1."""
    a = np.zeros(n)
    a[0], a[1] = y0, y1
    for k in range(n - 2):
        prev = a[k - 1] if k >= 1 else 0.0
        a[k + 2] = (c * a[k] + prev) / ((k + 2) * (k + 1))
    return a


def _step(c, y0, y1, h):
    a = _taylor_coeffs(c, y0, y1, 40)
    k = np.arange(40)
    y = np.sum(a * h**k)
    yp = np.sum(a[1:] * k[1:] * h ** (k[1:] - 1))
    return y, yp


def _build_table():
    nodes = np.arange(_XLO, _XHI + _STEP / 2, _STEP)
    n = len(nodes)
    y = np.empty(n)
    yp = np.empty(n)
    i0 = int(round(-_XLO / _STEP))
    # Ai is dominant when integrating towards smaller x, so the positive
    # half is built downwards from the asymptotic values at _XHI.
    ai_hi, aip_hi = _ai_asym_pos(np.array([_XHI]))
    y[-1], yp[-1] = ai_hi[0], aip_hi[0]
    for i in range(n - 1, i0, -1):
        y[i - 1], yp[i - 1] = _step(nodes[i], y[i], yp[i], -_STEP)
    # anchor the origin exactly, then march into the oscillatory half
    y[i0], yp[i0] = AI0, AIP0
    for i in range(i0, 0, -1):
        y[i - 1], yp[i - 1] = _step(nodes[i], y[i], yp[i], -_STEP)
    coeffs = np.array([_taylor_coeffs(c, a0, a1) for c, a0, a1 in zip(nodes, y, yp)])
    return nodes, coeffs


_NODES, _COEFFS = _build_table()
_DCOEFFS = _COEFFS[:, 1:] * np.arange(1, _NTAYLOR)


def _horner(coef, h):
    out = coef[:, -1].copy()
    for k in range(coef.shape[1] - 2, -1, -1):
        out *= h
        out += coef[:, k]
    return out


def airy(x):
    """Return ``(Ai(x), Ai'(x))`` for a real array ``x``."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("Airy function of a non-finite argument")
    shape = x.shape
    xf = x.ravel()
    ai = np.zeros_like(xf)
    aip = np.zeros_like(xf)

    mid = (xf >= _XLO) & (xf < _XHI)
    if mid.any():
        xm = xf[mid]
        idx = np.rint((xm - _XLO) / _STEP).astype(np.intp)
        h = xm - _NODES[idx]
        ai[mid] = _horner(_COEFFS[idx], h)
        aip[mid] = _horner(_DCOEFFS[idx], h)

    hi = xf >= _XHI
    if hi.any():
        xh = xf[hi]
        # exp(-zeta) underflows beyond x ~ 107.7; leave those entries at 0
        ok = 2.0 / 3.0 * xh**1.5 < 740.0
        a_hi = np.zeros_like(xh)
        ap_hi = np.zeros_like(xh)
        if ok.any():
            a_hi[ok], ap_hi[ok] = _ai_asym_pos(xh[ok])
        ai[hi], aip[hi] = a_hi, ap_hi

    lo = xf < _XLO
    if lo.any():
        ai[lo], aip[lo] = _ai_asym_neg(xf[lo])
    return ai.reshape(shape), aip.reshape(shape)


def ai(x):
    """Vectorised Ai(x)."""
    return airy(x)[0]


def aip(x):
    """Vectorised Ai'(x)."""
    return airy(x)[1]


def _err_est(value, envelope):
    if value == 0.0:
        return float(_TINY)
    return _REL_BOUND * max(abs(value), envelope) + float(_TINY)


def _check_finite(x):
    if not math.isfinite(x):
        raise DomainError(f"non-finite argument {x!r}")


def airy_ai(x: float) -> EvalResult:
    _check_finite(x)
    v = float(ai(np.array([x]))[0])
    # on the oscillatory side the error is relative to the envelope, not to Ai
    env = abs(x) ** -0.25 / math.sqrt(math.pi) if x < -1 else 0.0
    return EvalResult(v, _err_est(v, env))


def airy_ai_prime(x: float) -> EvalResult:
    _check_finite(x)
    v = float(aip(np.array([x]))[0])
    env = abs(x) ** 0.25 / math.sqrt(math.pi) if x < -1 else 0.0
    return EvalResult(v, _err_est(v, env))


def airy_ai_pp(x: float) -> EvalResult:
    """Ai''(x) = x Ai(x), straight from the Airy equation."""
    r = airy_ai(x)
    return EvalResult(x * r.value, abs(x) * r.abs_err_est)


# --------------------------------------------------------------------------
# error function

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


def erf_array(x):
    """Vectorised erf.

    Uses the all-positive series erf(x) = 2/sqrt(pi) exp(-x^2) sum 2^k x^(2k+1)/(2k+1)!!
    for |x| < 6, which has no cancellation; beyond that erf is 1 to double precision.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("erf of a non-finite argument")
    ax = np.abs(x)
    small = ax < 6.0
    xs = np.where(small, ax, 0.0)
    x2 = xs * xs
    term = xs.copy()
    total = xs.copy()
    for k in range(1, 200):
        term = term * 2.0 * x2 / (2 * k + 1)
        total += term
        if np.all(term <= _EPS * 0.25 * total):
            break
    val = np.where(small, _TWO_OVER_SQRT_PI * np.exp(-x2) * total, 1.0)
    val = np.minimum(val, 1.0)
    return np.copysign(val, x)


def erf(x: float) -> float:
    _check_finite(x)
    return float(erf_array(np.array([x]))[0])


# --------------------------------------------------------------------------
# gamma family

# B_2k / (2k (2k-1)) for the Stirling series
_STIRLING = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
]
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def ln_gamma(x: float) -> float:
    """log Gamma(x) for x > 0."""
    _check_finite(x)
    if x <= 0:
        raise DomainError(f"ln_gamma requires x > 0, got {x!r}")
    shift = 1.0
    while x < 15.0:
        shift *= x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    p = inv
    for c in _STIRLING:
        series += c * p
        p *= inv2
    return (x - 0.5) * math.log(x) - x + _HALF_LOG_2PI + series - math.log(shift)


def gamma(x: float) -> float:
    """Gamma(x) for real x away from the poles at 0, -1, -2, ..."""
    _check_finite(x)
    if x <= 0 and x == math.floor(x):
        raise DomainError(f"Gamma has a pole at {x!r}")
    if x > 0:
        return math.exp(ln_gamma(x))
    # reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
    return math.pi / (math.sin(math.pi * x) * math.exp(ln_gamma(1.0 - x)))


# --------------------------------------------------------------------------
# modified Bessel function I_nu


def bessel_i(nu: float = -0.25, x: float = 1.0) -> float:
    """I_nu(x) for x >= 0 and nu > -1."""
    _check_finite(x)
    _check_finite(nu)
    if x < 0:
        raise DomainError("bessel_i requires x >= 0")
    if nu <= -1:
        raise DomainError("bessel_i implemented for nu > -1 only")
    if x == 0:
        if nu == 0:
            return 1.0
        return 0.0 if nu > 0 else math.inf
    if x <= 30.0:
        # all terms positive for nu > -1
        half = 0.5 * x
        term = math.exp(nu * math.log(half) - ln_gamma(nu + 1.0))
        total = term
        q = half * half
        k = 0
        while True:
            k += 1
            term *= q / (k * (k + nu))
            total += term
            if term < _EPS * 0.25 * total:
                break
        return total
    # large argument: e^x / sqrt(2 pi x) * sum (-1)^k a_k(nu) / x^k
    mu = 4.0 * nu * nu
    term = 1.0
    total = 1.0
    last = math.inf
    for k in range(1, 60):
        term *= -(mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(term) >= last:
            break
        total += term
        last = abs(term)
        if last < _EPS * 0.25 * abs(total):
            break
    return math.exp(x) / math.sqrt(2.0 * math.pi * x) * total


# --------------------------------------------------------------------------
# 2F1(1/4, 1; 1/2; z)


def _hyp2f1_series(a, b, c, z):
    term = 1.0
    total = 1.0
    n = 0
    while True:
        term *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z
        n += 1
        total += term
        if abs(term) < _EPS * 0.25 * abs(total) or n > 5000:
            return total


def _hyp2f1_connect(a, b, c, z):
    # 1 - z connection formula; requires c - a - b not an integer
    t1 = gamma(c) * gamma(c - a - b) / (gamma(c - a) * gamma(c - b))
    t2 = gamma(c) * gamma(a + b - c) / (gamma(a) * gamma(b))
    f1 = _hyp2f1_series(a, b, a + b - c + 1.0, 1.0 - z)
    f2 = _hyp2f1_series(c - a, c - b, c - a - b + 1.0, 1.0 - z)
    return t1 * f1 + t2 * (1.0 - z) ** (c - a - b) * f2


def hyp2f1_quarter(z: float) -> float:
    """2F1(1/4, 1; 1/2; z) for z < 1.

    For z < -1/2 a Pfaff transformation on the first parameter maps the
    argument to w = z/(z-1) in (1/3, 1); for w > 1/2 (and for z > 1/2) the
    1 - w connection formula keeps every series short.
    """
    _check_finite(z)
    if z >= 1.0:
        raise DomainError("hyp2f1_quarter requires z < 1")
    if abs(z) <= 0.5:
        return _hyp2f1_series(0.25, 1.0, 0.5, z)
    if z > 0:
        return _hyp2f1_connect(0.25, 1.0, 0.5, z)
    # 2F1(a,b;c;z) = (1-z)^-a 2F1(a, c-b; c; z/(z-1))
    a, b, c = 0.25, -0.5, 0.5
    w = z / (z - 1.0)
    pref = (1.0 - z) ** -a
    if w <= 0.5:
        return pref * _hyp2f1_series(a, b, c, w)
    return pref * _hyp2f1_connect(a, b, c, w)
