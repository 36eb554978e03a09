"""Airy basis functions psi_{s,F}(+-v) and the identities they satisfy.

    psi_{s,F}(+-v) = F^(-1/6) Ai(+-F^(1/3) v + F^(-2/3) s)

The distributional identities (delta orthonormality, closure) are checked in
weak form against smooth test functions; pointwise checks of a delta make
no sense numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadrature import (QuadratureResult, QuadratureSpec, airy_cutoff, integrate_1d,
                         integrate_batch, integrate_nested)
from .specfun import ai, airy


@dataclass(frozen=True)
class BasisPoint:
    s: float
    F: float
    v: float
    sign: int = 1

    def __post_init__(self):
        if not (self.s > 0 and self.F > 0):
            raise ValueError("basis needs s > 0 and F > 0")
        if not math.isfinite(self.v):
            raise ValueError("v must be finite")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")


def psi_array(s, F, v, sign=1):
    """Vectorised psi_{s,F}(sign * v)."""
    F = np.asarray(F, dtype=float)
    return F ** (-1.0 / 6.0) * ai(sign * np.cbrt(F) * v + s * F ** (-2.0 / 3.0))


def psi(point: BasisPoint) -> float:
    return float(psi_array(point.s, point.F, point.v, point.sign))


def psi_vv(point: BasisPoint) -> float:
    """d^2/dv^2 psi_{s,F}(sign v) through the chain rule and Ai'' = z Ai."""
    s, F, v, sg = point.s, point.F, point.v, point.sign
    z = sg * F ** (1.0 / 3.0) * v + s * F ** (-2.0 / 3.0)
    return F ** (2.0 / 3.0) * F ** (-1.0 / 6.0) * z * float(ai(np.array(z)))


def ode_residual(point: BasisPoint) -> float:
    """(s + sign F v - d^2/dv^2) psi, which vanishes for every basis function."""
    return (point.s + point.sign * point.F * point.v) * psi(point) - psi_vv(point)


# --------------------------------------------------------------------------
# two-sided velocity overlaps

_V_TOL = 1e-16  # relative truncation target for the Airy-damped tails in v


def _tail_cutoff(z_damp, z_other):
    """Airy argument past which the damping factor, starting at Ai(z_damp),
    keeps the product below _V_TOL times its value at v = 0 even when the
    other factor has grown from Ai(z_other) to O(1)."""
    budget = max(z_damp, 0.0) ** 1.5 + max(z_other, 0.0) ** 1.5
    return (budget - 1.5 * math.log(_V_TOL)) ** (2.0 / 3.0)


def velocity_overlap(s1, F, s2, G, weight_v=True, rel_tol=1e-12, abs_tol=1e-15):
    """Integral over v of [v] psi_{s1,F}(-v) psi_{s2,G}(v) on the whole real line.

    Each half line is damped by one of the two factors, so the integral is
    split at v = 0 and each side truncated once the product has dropped
    1e-16 below its value at v = 0. ``abs_tol`` is relative to that value.
    """
    f13, g13 = F ** (1.0 / 3.0), G ** (1.0 / 3.0)
    z_f, z_g = s1 * F ** (-2.0 / 3.0), s2 * G ** (-2.0 / 3.0)
    v_neg = (_tail_cutoff(z_f, z_g) - z_f) / f13
    v_pos = (_tail_cutoff(z_g, z_f) - z_g) / g13
    scale = float(psi_array(s1, F, 0.0, -1) * psi_array(s2, G, 0.0, 1))
    atol = abs_tol * scale * min(v_neg, v_pos)

    def integrand(v):
        val = psi_array(s1, F, v, -1) * psi_array(s2, G, v, 1)
        return v * val if weight_v else val

    left = integrate_1d(integrand, QuadratureSpec(-v_neg, 0.0, rel_tol, atol, initial_panels=4))
    right = integrate_1d(integrand, QuadratureSpec(0.0, v_pos, rel_tol, atol, initial_panels=4))
    return QuadratureResult(left.value + right.value, left.err_est + right.err_est,
                            left.evaluations + right.evaluations,
                            left.converged and right.converged)


def cross_overlap(s, F, G, rel_tol=1e-12, abs_tol=1e-15) -> QuadratureResult:
    """Integral of v psi_{s,F}(-v) psi_{s,G}(v); zero for all F, G."""
    return velocity_overlap(s, F, s, G, True, rel_tol, abs_tol)


def _gaussian(G, G0, width):
    return np.exp(-0.5 * ((G - G0) / width) ** 2)


def smeared_delta(s, F, G0=1.0, width=0.15, rel_tol=1e-9, abs_tol=1e-12):
    """Weak form of the delta normalisation.

    Returns (integral, expected) where integral is
    int dG phi(G) int dv v psi_{s,F}(-v) psi_{s,G}(-v) for a Gaussian bump phi
    centred on G0, and expected is phi(F).
    """
    g_lo, g_hi = max(1e-3, G0 - 8 * width), G0 + 8 * width
    xs = airy_cutoff(_V_TOL)
    v_lo = -max(0.0, (xs - s * F ** (-2.0 / 3.0)) / F ** (1.0 / 3.0))
    # G-averaging of the oscillating factor decays like exp(-width^2 v^3 / (18 G))
    v_hi = (60.0 * 18.0 * g_hi / width**2) ** (1.0 / 3.0)

    def outer(v):
        return v * psi_array(s, F, v, -1)

    def inner(v, G):
        return _gaussian(G, G0, width) * psi_array(s, G, v, -1)

    specs = [QuadratureSpec(v_lo, v_hi, rel_tol, abs_tol, initial_panels=16),
             QuadratureSpec(g_lo, g_hi, rel_tol / 100, abs_tol / 100, initial_panels=4)]
    r = integrate_nested(inner, specs, [outer, None])
    return r, float(_gaussian(F, G0, width))


def closure_apply(s, v, center=1.5, width=0.3, f_max=None, rel_tol=1e-8, abs_tol=1e-11):
    """Apply the closure kernel to a narrow bump f and return (v T(v), f(v)).

    T(v) = int dF [psi_F(-v) Phi_-(F) - psi_F(v) Phi_+(F)],
    Phi_-+(F) = int dv' psi_F(-+v') f(v').
    The closure relation says v T(v) = f(v).
    """
    def bump(x):
        return np.exp(-(((x - center) / width) ** 2))

    lo, hi = center - 6 * width, center + 6 * width
    if f_max is None:
        # Phi_-(F) decays like exp(-F v' width^2 / 4) for the oscillating branch
        f_max = 4.0 * 40.0 / (max(lo, 0.3) * width**2)

    def outer(F):
        return np.ones_like(F)

    def inner(F, vp):
        return bump(vp) * (psi_array(s, F, v, -1) * psi_array(s, F, vp, -1)
                           - psi_array(s, F, v, 1) * psi_array(s, F, vp, 1))

    specs = [QuadratureSpec(0.0, f_max, rel_tol, abs_tol, initial_panels=32),
             QuadratureSpec(lo, hi, rel_tol / 100, abs_tol / 100, initial_panels=4)]
    r = integrate_nested(inner, specs)
    return QuadratureResult(v * r.value, abs(v) * r.err_est, r.evaluations,
                            r.converged, r.failed_level), float(bump(v))


# --------------------------------------------------------------------------
# F-integrals: int_0^inf dF F^(-3/2) psi_{s,F}(-v)


def exact_half_integral(s: float, v: float) -> float:
    """Closed form of int_0^inf dF F^(-3/2) psi_{s,F}(-v)."""
    if s <= 0:
        raise ValueError("s must be positive")
    e = math.exp(-math.sqrt(3.0 * s) * abs(v))
    return (2.0 - e) / (2.0 * s) if v > 0 else e / (2.0 * s)


def _airy_zeros(n):
    """First n zeros of Ai, asymptotic start polished by Newton."""
    k = np.arange(1, n + 1)
    t = 3.0 * math.pi * (4 * k - 1) / 8.0
    z = -(t ** (2.0 / 3.0)) * (1 + 5.0 / 48.0 * t**-2 - 5.0 / 36.0 * t**-4
                                + 77125.0 / 82944.0 * t**-6)
    for _ in range(4):
        a, ap = airy(z)
        z = z - a / ap
    return z


def _root_u(s, v, xi):
    """Positive root u of s/u^2 - v u = xi (v > 0); the map is strictly decreasing."""
    xi = np.asarray(xi, dtype=float)
    lo = np.full_like(xi, 1e-300)
    # upper bracket: h(u) <= s/u^2 - v u < xi once u exceeds both terms' scales
    hi = np.maximum(np.abs(xi) / v, 0.0) + (s / v) ** (1.0 / 3.0) + np.sqrt(s / np.maximum(np.abs(xi), 1e-300))
    u = np.where(xi > 0, np.sqrt(s / np.maximum(xi, 1e-300)), np.maximum(-xi / v, (s / v) ** (1 / 3)))
    u = np.clip(u, lo, hi)
    for _ in range(100):
        h = s / u**2 - v * u - xi
        lo = np.where(h > 0, u, lo)
        hi = np.where(h < 0, u, hi)
        dh = -2.0 * s / u**3 - v
        un = u - h / dh
        bad = (un <= lo) | (un >= hi)
        un = np.where(bad, 0.5 * (lo + hi), un)
        if np.all(np.abs(un - u) <= 4e-16 * u):
            u = un
            break
        u = un
    return u


def _wynn(partial):
    """Wynn epsilon extrapolation of a sequence of partial sums.

    Returns (limit, error estimate from the last two even-column entries).
    """
    n = len(partial)
    e = [list(partial)]
    prev = [0.0] * (n + 1)
    best = []
    cur = list(partial)
    k = 0
    while len(cur) > 1:
        nxt = []
        for i in range(len(cur) - 1):
            d = cur[i + 1] - cur[i]
            if d == 0:
                nxt.append(math.inf)
            else:
                nxt.append(prev[i + 1] + 1.0 / d)
        prev, cur = cur, nxt
        k += 1
        if k % 2 == 0 and cur:
            best.append(cur[-1])
        e.append(cur)
    best = [b for b in best if math.isfinite(b)]
    if len(best) < 2:
        return partial[-1], abs(partial[-1] - partial[-2])
    return best[-1], abs(best[-1] - best[-2])


def half_integral_quadrature(s: float, v: float, rel_tol=1e-12, abs_tol=1e-14,
                             n_half_periods=48) -> QuadratureResult:
    """Quadrature of int_0^inf dF F^(-3/2) psi_{s,F}(-v).

    v <= 0: with x = s F^(-2/3) the integrand is (3/2s) Ai(x + |v| sqrt(s/x)),
    Airy-damped at both ends.
    v > 0: with xi = s F^(-2/3) - F^(1/3) v as variable the integral becomes
    3 int Ai(xi) / (2s + v u(xi)^3) dxi over the real line (u = F^(1/3)); the
    oscillatory left tail is summed between zeros of Ai and the alternating
    partial sums are extrapolated with Wynn's epsilon algorithm.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    if v <= 0:
        av = -v
        r = integrate_1d(lambda x: ai(x + av * np.sqrt(s / x)),
                         QuadratureSpec(0.0, math.inf, rel_tol, abs_tol, decay="airy"))
        c = 1.5 / s
        return QuadratureResult(c * r.value, c * r.err_est, r.evaluations, r.converged)

    def w(xi):
        u = _root_u(s, v, xi)
        return 3.0 * ai(xi) / (2.0 * s + v * u**3)

    zeros = _airy_zeros(n_half_periods + 1)
    head = integrate_1d(w, QuadratureSpec(zeros[0], math.inf, rel_tol, abs_tol, decay="airy",
                                          initial_panels=4))

    def wb(x, rows):
        return w(x)

    vals, errs, conv = integrate_batch(wb, zeros[1:], zeros[:-1],
                                       QuadratureSpec(rel_tol=rel_tol, abs_tol=abs_tol * 1e-2))
    partial = head.value + np.cumsum(vals)
    limit, extrap_err = _wynn(list(partial))
    err = head.err_est + float(np.sum(errs)) + extrap_err
    evals = head.evaluations + 21 * len(vals)
    return QuadratureResult(float(limit), err, evals, bool(head.converged and conv.all()))


def identity_one_over_s(s: float, v: float, rel_tol=1e-12, abs_tol=1e-14) -> QuadratureResult:
    """int_0^inf dF F^(-3/2) [psi_{s,F}(-v) + psi_{s,F}(v)], which equals 1/s."""
    a = half_integral_quadrature(s, v, rel_tol, abs_tol)
    b = half_integral_quadrature(s, -v, rel_tol, abs_tol)
    return QuadratureResult(a.value + b.value, a.err_est + b.err_est,
                            a.evaluations + b.evaluations, a.converged and b.converged)


def check_orthonormality(s: float, F: float, G: float, tol: float = 1e-8) -> dict:
    """Report on the cross-orthogonality of the two basis branches.

    ``cross`` is int dv v psi_{s,F}(-v) psi_{s,G}(v), which must vanish.
    When F and G differ by less than 0.5 the weak-form delta normalisation
    is checked as well (``smeared`` / ``smeared_expected``).
    """
    cross = cross_overlap(s, F, G)
    report = {
        "s": s, "F": F, "G": G,
        "cross": cross.value, "cross_err": cross.err_est,
        "cross_ok": abs(cross.value) <= tol and cross.converged,
    }
    if abs(F - G) < 0.5:
        sm, expected = smeared_delta(s, F, G0=G)
        report.update(smeared=sm.value, smeared_expected=expected,
                      smeared_ok=abs(sm.value - expected) <= max(tol, 10 * sm.err_est))
    report["ok"] = report["cross_ok"] and report.get("smeared_ok", True)
    return report
