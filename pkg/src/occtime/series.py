"""Perturbative expansion of the Laplace-transformed generating function
Q~_p(0,0,s) = sum_n c_n p^n / s^(n+1) and the occupation-time moments.

All contributions are evaluated in the dimensionless variable x = s F^(-2/3);
the inner integration variables are Airy arguments:

    r = x (1+h)^(2/3),      w = x h^(2/3) (1+g)^(2/3),

so every level is an Airy-damped integral over [lower, inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .quadrature import (QuadratureError, QuadratureResult, QuadratureSpec, airy_cutoff, integrate_1d,
                         integrate_batch, integrate_nested)
from .specfun import ai, erf_array

SQRT3 = math.sqrt(3.0)

# closed forms of the published coefficients, used as references only
C2_EXACT = 3**1.5 / (4 * math.pi)
Q0_3_EXACT = 3**2.5 / (8 * math.pi) - 1.0
Q0_4_EXACT = 3**3.5 / (8 * math.pi) - 1.5
Q1_EXACT = 1.25 - 3**2.5 / (4 * math.pi)
EPSILON_REFERENCE = 0.0008720732


@dataclass(frozen=True)
class Tier:
    name: str
    rel_tol: float       # q0, q1, q2 outermost relative tolerance
    eps_rel_tol: float   # epsilon outermost relative tolerance


TIERS = {
    "fast": Tier("fast", 1e-9, 1e-6),
    "paper": Tier("paper", 1e-11, 1e-8),
}


def get_tier(tier: str | Tier) -> Tier:
    if isinstance(tier, Tier):
        return tier
    try:
        return TIERS[tier]
    except KeyError:
        raise ValueError(f"unknown tier {tier!r}; choose from {sorted(TIERS)}") from None


def _levels(rel_tol, abs_tol, depth):
    """Tolerances per nesting level, each 100x tighter than its parent."""
    return [(rel_tol * 100.0**-k, abs_tol * 100.0**-k) for k in range(depth)]


# --------------------------------------------------------------------------
# first-order coefficients


def _m1(a):
    """int_0^inf x Ai(x) Ai(a x) dx."""
    return 1.0 / (2 * math.pi * SQRT3 * (a * a + a + 1))


def _m4(a):
    """int_0^inf x^4 Ai(x) Ai(a x) dx."""
    return SQRT3 / math.pi * (a + 1) / (a * a + a + 1) ** 3


def closed_integrals(rel_tol=1e-13, abs_tol=1e-16) -> dict[str, QuadratureResult]:
    """z-integrals of the first-order term after the x-integral is done in closed form."""
    z23 = lambda z: np.cbrt(z) ** 2
    integrands = {
        "C1": lambda z: (z - 1) * z ** (-4 / 3) * _m1(z23(z)),
        "C2": lambda z: (2 * (z - 1) * z ** (-4 / 3)
                         - (4 / 3) * (z - 1) ** 2 * z ** (-7 / 3)) * _m1(z23(z)),
        "C3": lambda z: (z - 1) ** 3 * z ** (-4 / 3) * _m4(z23(z)),
    }
    spec = QuadratureSpec(1.0, math.inf, rel_tol, abs_tol, decay="algebraic",
                          exponent=5.0 / 3.0, initial_panels=4)
    return {k: integrate_1d(f, spec) for k, f in integrands.items()}


def _q0_direct(s, rel_tol):
    """Same coefficients by double quadrature at arbitrary s.

    Outer variable F, inner variable omega = x z^(2/3) with x = s F^(-2/3).
    Returns the three s-scaled integrals s^2 J1, s^2 J2, s^5 J3.
    """
    def z_of(F, om):
        x = s * F ** (-2 / 3)
        return (om / x) ** 1.5, 1.5 * np.sqrt(om) * x ** -1.5

    def f1(F, om):
        z, jac = z_of(F, om)
        return (z - 1) * z ** (-4 / 3) * ai(om) * jac

    def f2(F, om):
        z, jac = z_of(F, om)
        return (2 * (z - 1) * z ** (-4 / 3) - (4 / 3) * (z - 1) ** 2 * z ** (-7 / 3)) * ai(om) * jac

    def f3(F, om):
        z, jac = z_of(F, om)
        return (z - 1) ** 3 * z ** (-4 / 3) * ai(om) * jac

    out = {}
    (r0, a0), (r1, a1) = _levels(rel_tol, rel_tol * 1e-3, 2)
    for key, f, power, scale in (("J1", f1, -7 / 3, 2), ("J2", f2, -7 / 3, 2), ("J3", f3, -13 / 3, 5)):
        specs = [QuadratureSpec(0.0, math.inf, r0, a0, decay="algebraic", exponent=5 / 3,
                                scale=s**1.5, initial_panels=4),
                 QuadratureSpec(lambda F: s * F ** (-2 / 3), math.inf, r1, a1, decay="airy")]
        w0 = lambda F, power=power: F**power * ai(s * F ** (-2 / 3))
        r = integrate_nested(f, specs, [w0, None])
        c = s**scale
        out[key] = QuadratureResult(c * r.value, c * r.err_est, r.evaluations, r.converged,
                                    r.failed_level)
    return out


def q0_coefficients(s: float = 1.0, rel_tol: float = 1e-11, route: str = "closed") -> dict:
    """Coefficients of p^1..p^4 / s^(n+1) in the zeroth contribution.

    route="closed" integrates the x-variable analytically (s drops out);
    route="direct" performs the double quadrature at the given s.
    Returns {n: QuadratureResult}.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    if route == "closed":
        ci = closed_integrals(min(rel_tol, 1e-12))
        a, b, c = (1.5 * ci["C1"].value, 1.5 * ci["C2"].value, 1.5 * ci["C3"].value)
        ea, eb, ec = (1.5 * ci["C1"].err_est, 1.5 * ci["C2"].err_est, 1.5 * ci["C3"].err_est)
        ev = sum(r.evaluations for r in ci.values())
        ok = all(r.converged for r in ci.values())
    elif route == "direct":
        J = _q0_direct(s, rel_tol)
        a, b, c = J["J1"].value, J["J2"].value, J["J3"].value
        ea, eb, ec = J["J1"].err_est, J["J2"].err_est, J["J3"].err_est
        ev = sum(r.evaluations for r in J.values())
        ok = all(r.converged for r in J.values())
    else:
        raise ValueError("route must be 'closed' or 'direct'")
    return {
        1: QuadratureResult(-0.5, 0.0, 0, True),
        2: QuadratureResult(0.5 - a, ea, ev, ok),
        3: QuadratureResult(-0.5 + 1.5 * b, 1.5 * eb, ev, ok),
        4: QuadratureResult(0.5 - 0.5 * c, 0.5 * ec, ev, ok),
    }


# --------------------------------------------------------------------------
# triple integrals over (x, h, g)


def _triple(x_power, h_pow, h_den, g_pow, g_den, rel_tol, abs_tol, s=None, extra=None,
            extra_levels=0):
    """(3/2) int dx x^m Ai(x) int dh h^a (1+h)^-b Ai(x(1+h)^(2/3))
                 int dg g^c (1+g)^-d Ai(x h^(2/3) (1+g)^(2/3)) [extra(x, h, g)].

    With ``s`` given, the outer variable is F with x = s F^(-2/3) and the
    prefactor becomes s^(m+1) F^(-(2m+5)/3); only x_power = 2 is used that way.
    ``extra`` may return (values, noise).
    """
    if s is None:
        xmap = lambda u: u
        w0 = lambda u: 1.5 * u**x_power * ai(u)
        outer = QuadratureSpec(0.0, math.inf, rel_tol, abs_tol, decay="airy", initial_panels=4)
    else:
        xmap = lambda F: s * F ** (-2.0 / 3.0)
        w0 = lambda F: s ** (x_power + 1) * F ** (-(2 * x_power + 5) / 3.0) * ai(xmap(F))
        # below F_min the Airy factor is under the cutoff and the inner
        # ranges collapse
        f_min = (s / airy_cutoff(abs_tol)) ** 1.5
        outer = QuadratureSpec(f_min, math.inf, rel_tol, abs_tol, decay="algebraic",
                               exponent=5.0 / 3.0, scale=s**1.5, initial_panels=8)
    (r1, a1), (r2, a2) = _levels(rel_tol, abs_tol, 3)[1:]

    def h_of(u, r):
        x = xmap(u)
        return x, (r / x) ** 1.5 - 1.0

    def w1(u, r):
        x, h = h_of(u, r)
        return h**h_pow * (1 + h) ** (-h_den) * ai(r) * 1.5 * np.sqrt(r) * x**-1.5

    def f(u, r, w):
        x, h = h_of(u, r)
        Y = x * np.cbrt(h) ** 2
        g = (w / Y) ** 1.5 - 1.0
        val = g**g_pow * (1 + g) ** (-g_den) * ai(w) * 1.5 * np.sqrt(w) * Y**-1.5
        if extra is None:
            return val
        e, noise = extra(x, h, g)
        return val * e, (None if noise is None else np.abs(val) * noise)

    specs = [outer,
             QuadratureSpec(lambda u: xmap(u), math.inf, r1, a1, decay="airy"),
             QuadratureSpec(lambda u, r: xmap(u) * np.cbrt((r / xmap(u)) ** 1.5 - 1.0) ** 2,
                            math.inf, r2, a2, decay="airy")]
    return integrate_nested(f, specs, [w0, w1, None])


def q1_prefactor(rel_tol: float = 1e-9, s: float | None = None) -> QuadratureResult:
    """Prefactor of p^3/s^4 (1 - p/s) in the first iterate contribution."""
    return _triple(2, 5 / 3, 4 / 3, 1.0, 4 / 3, rel_tol, rel_tol * 1e-2, s=s)


@dataclass(frozen=True)
class Q2Result:
    one_piece: QuadratureResult
    h_piece: QuadratureResult
    g_piece: QuadratureResult

    @property
    def residual(self) -> float:
        return self.h_piece.value + self.g_piece.value

    @property
    def residual_err(self) -> float:
        return self.h_piece.err_est + self.g_piece.err_est

    @property
    def total(self) -> QuadratureResult:
        parts = (self.one_piece, self.h_piece, self.g_piece)
        return QuadratureResult(sum(p.value for p in parts), sum(p.err_est for p in parts),
                                sum(p.evaluations for p in parts), all(p.converged for p in parts))


def _scaled(r: QuadratureResult, c: float) -> QuadratureResult:
    return QuadratureResult(c * r.value, abs(c) * r.err_est, r.evaluations, r.converged,
                            r.failed_level)


def q2_prefactor(rel_tol: float = 1e-9, one_piece: QuadratureResult | None = None) -> Q2Result:
    """Prefactor of p^4/s^5 in the second iterate contribution, split into the
    pieces weighted by 1, 2/(1+h) and -2/(1+g). The first is the negated q1
    triple integral and is reused when supplied."""
    if one_piece is None:
        one_piece = _scaled(q1_prefactor(rel_tol), -1.0)
    h = _scaled(_triple(2, 5 / 3, 7 / 3, 1.0, 4 / 3, rel_tol, rel_tol * 1e-2), -2.0)
    g = _scaled(_triple(2, 5 / 3, 4 / 3, 1.0, 7 / 3, rel_tol, rel_tol * 1e-2), 2.0)
    return Q2Result(one_piece, h, g)


# --------------------------------------------------------------------------
# innermost z-integral for epsilon


def z_integral_direct(y, rel_tol=1e-13, abs_tol=1e-300):
    """Z(y) = int_1^inf (z-1) z^(-4/3) Ai(y z^(2/3)) dz for an array of y > 0."""
    y = np.atleast_1d(np.asarray(y, dtype=float))

    def f(om, rows):
        yy = y[rows, None]
        return (1.0 / yy - np.sqrt(yy) * om**-1.5) * ai(om)

    vals, errs, conv = integrate_batch(f, y, np.full_like(y, np.inf),
                                       QuadratureSpec(rel_tol=rel_tol, abs_tol=abs_tol,
                                                      decay="airy"))
    return 1.5 * vals, 1.5 * errs, conv


class ZTable:
    """Piecewise Chebyshev interpolant of Z(y).

    The stored function E(sigma) = y Z(y) exp(2/3 sigma^3), sigma = sqrt(y),
    is smooth and slowly varying, so a modest table reaches near machine
    precision. Beyond the table Z is below 1e-90 and returned as zero.
    """

    def __init__(self, sigma_max=7.0, pieces=28, degree=24):
        self.sigma_max = sigma_max
        self.pieces = pieces
        self.width = sigma_max / pieces
        k = np.arange(degree + 1)
        t = np.cos(np.pi * (k + 0.5) / (degree + 1))
        lo = np.arange(pieces)[:, None] * self.width
        sig = lo + 0.5 * self.width * (t[None, :] + 1.0)
        y = (sig**2).ravel()
        E, E_err = self._values(y)
        E = E.reshape(sig.shape)
        # interpolation coefficients via the discrete cosine orthogonality
        T = np.cos(np.outer(k, np.pi * (k + 0.5) / (degree + 1)))
        coef = (2.0 / (degree + 1)) * E @ T.T
        coef[:, 0] *= 0.5
        self.coef = coef
        self.noise = (np.abs(coef[:, -1]) + np.abs(coef[:, -2])
                      + E_err.reshape(sig.shape).max(axis=1) + 1e-16 * np.abs(E).max(axis=1))

    @staticmethod
    def _values(y):
        """E at the nodes, integrating in omega = y + u with the decay scaled out."""
        y = np.asarray(y, dtype=float)
        e = np.exp(2.0 / 3.0 * y**1.5)
        span = (y**1.5 + 60.0) ** (2.0 / 3.0) - y

        def f(om, rows):
            yy = y[rows, None]
            return (1.0 - (yy / om) ** 1.5) * ai(om) * e[rows, None]

        vals, errs, conv = integrate_batch(f, y, y + span,
                                           QuadratureSpec(rel_tol=1e-13, abs_tol=1e-17,
                                                          initial_panels=2))
        if not conv.all():
            raise QuadratureError("Z table node integral did not converge")
        return 1.5 * vals, 1.5 * errs

    def __call__(self, y):
        """Return (Z(y), noise) for y >= 0 (array)."""
        y = np.asarray(y, dtype=float)
        sig = np.sqrt(y)
        idx = np.minimum((sig / self.width).astype(np.intp), self.pieces - 1)
        t = 2.0 * (sig - idx * self.width) / self.width - 1.0
        c = self.coef[idx]
        b1 = np.zeros_like(t)
        b2 = np.zeros_like(t)
        for j in range(c.shape[-1] - 1, 0, -1):
            b1, b2 = 2.0 * t * b1 - b2 + c[..., j], b1
        E = t * b1 - b2 + c[..., 0]
        damp = np.exp(-2.0 / 3.0 * sig**3) / y
        inside = sig < self.sigma_max
        Z = np.where(inside, E * damp, 0.0)
        noise = np.where(inside, self.noise[idx] * damp, 0.0)
        return Z, noise


_Z_TABLE: ZTable | None = None


def z_table() -> ZTable:
    global _Z_TABLE
    if _Z_TABLE is None:
        _Z_TABLE = ZTable()
    return _Z_TABLE


def epsilon_constant(rel_tol: float = 1e-6) -> QuadratureResult:
    """The fourth-order constant from the second iterate of the inhomogeneous term.

    Three nested levels over (x, h, g); the z-integral is served by ZTable,
    whose interpolation error enters as per-node noise.
    """
    table = z_table()

    def extra(x, h, g):
        return table(x * np.cbrt(g * h) ** 2)

    return _triple(3, 7 / 3, 4 / 3, 5 / 3, 4 / 3, rel_tol, rel_tol * 1e-3,
                   extra=extra)


# --------------------------------------------------------------------------
# assembly


@dataclass
class SeriesTable:
    coeffs: dict[int, float]
    err: dict[int, float]
    provenance: dict[int, str]
    flags: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.coeffs.get(0) != 1.0 or self.coeffs.get(1) != -0.5:
            raise ValueError("c0 must be 1 and c1 must be -1/2")

    def check_signs(self) -> bool:
        return all((-1) ** n * c > 0 for n, c in self.coeffs.items())


@dataclass
class MomentTable:
    raw: dict[int, float]
    central: dict[int, float]
    raw_err: dict[int, float]
    central_err: dict[int, float]

    def check(self) -> list[str]:
        problems = []
        if self.raw[1] != 0.5:
            problems.append("first moment is not 1/2")
        for n, m in self.raw.items():
            if not 0 < m < 1:
                problems.append(f"raw[{n}] outside (0, 1)")
        for n in range(1, max(self.raw)):
            if not self.raw[n + 1] < self.raw[n]:
                problems.append(f"raw[{n + 1}] >= raw[{n}]")
        return problems


def _fifth_from_even(raw2, raw4):
    """Odd-moment relation: <T^5> = 5/2 <T^4> - 5/2 <T^2> + 1/2 (t = 1)."""
    return 2.5 * raw4 - 2.5 * raw2 + 0.5


def assemble_series(q0: dict, q1: QuadratureResult, q2: QuadratureResult,
                    eps: QuadratureResult, provenance: str = "quadrature") -> SeriesTable:
    """Combine the contributions into c_0..c_5; c_5 follows from the odd-moment
    relation rather than from a fifth-order calculation."""
    c = {0: 1.0, 1: -0.5}
    e = {0: 0.0, 1: 0.0}
    prov = {0: "closed_form", 1: "closed_form"}
    c[2], e[2] = q0[2].value, q0[2].err_est
    c[3], e[3] = q0[3].value + q1.value, q0[3].err_est + q1.err_est
    c[4] = q0[4].value - q1.value + q2.value + eps.value
    e[4] = q0[4].err_est + q1.err_est + q2.err_est + eps.err_est
    prov.update({2: provenance, 3: provenance, 4: provenance})
    raw5 = _fifth_from_even(c[2], c[4])
    c[5], e[5] = -raw5, 2.5 * (e[2] + e[4])
    prov[5] = "closed_form" if provenance == "closed_form" else "mixed"
    flags = []
    if not all(r.converged for r in (*q0.values(), q1, q2, eps)):
        flags.append("non-converged contribution")
    table = SeriesTable(c, e, prov, flags)
    if not table.check_signs():
        table.flags.append("coefficient signs do not alternate")
    return table


def closed_form_series(eps: float = EPSILON_REFERENCE) -> SeriesTable:
    """The series from the exact coefficients and a given value of epsilon."""
    c2 = C2_EXACT
    c3 = -(3**2.5 / (8 * math.pi) - 0.25)
    c4 = 7 * 3**2.5 / (8 * math.pi) - 4 + eps
    c5 = -(95 * 3**1.5 / (16 * math.pi) - 9.5 + 2.5 * eps)
    coeffs = {0: 1.0, 1: -0.5, 2: c2, 3: c3, 4: c4, 5: c5}
    return SeriesTable(coeffs, {n: 0.0 for n in coeffs}, {n: "closed_form" for n in coeffs})


def invert_laplace_series(table: SeriesTable) -> dict[int, float]:
    """c_n p^n / s^(n+1) -> c_n (pt)^n / n!: coefficients of (pt)^n in Q_p(0,0,t)."""
    return {n: c / math.factorial(n) for n, c in table.coeffs.items()}


def shifted_series(table: SeriesTable) -> dict[int, float]:
    """Coefficients of (pt)^n in exp(pt/2) Q_p(0,0,t); odd ones vanish."""
    q = invert_laplace_series(table)
    N = max(q)
    return {n: sum(q[k] * 0.5 ** (n - k) / math.factorial(n - k) for k in range(n + 1))
            for n in range(N + 1)}


def _central(raw: dict[int, float], n: int) -> float:
    full = {0: 1.0, **raw}
    return sum(math.comb(n, k) * full[k] * (-0.5) ** (n - k) for k in range(n + 1))


def moments(table: SeriesTable) -> MomentTable:
    """<T+^n>/t^n = (-1)^n c_n, and central moments about t/2."""
    raw = {n: (-1) ** n * table.coeffs[n] for n in range(1, 6)}
    raw_err = {n: table.err[n] for n in range(1, 6)}
    central = {n: _central(raw, n) for n in (2, 4)}
    central_err = {2: raw_err[2], 4: raw_err[4] + 2 * raw_err[3] + 1.5 * raw_err[2]}
    return MomentTable(raw, central, raw_err, central_err)


def odd_relation_residuals(m: MomentTable) -> dict[int, float]:
    """Residuals of the odd central-moment relations for n = 1, 3, 5."""
    r = m.raw
    return {
        1: r[1] - 0.5,
        3: r[3] - (1.5 * r[2] - 0.25),
        5: r[5] - _fifth_from_even(r[2], r[4]),
    }


@dataclass
class SeriesRun:
    q0: dict
    q1: QuadratureResult
    q2: Q2Result
    eps: QuadratureResult
    table: SeriesTable
    moments: MomentTable


def compute_series(tier: str | Tier = "fast", progress: Callable[[str], None] | None = None) -> SeriesRun:
    """End-to-end evaluation at s = 1."""
    t = get_tier(tier)
    say = progress or (lambda msg: None)
    say("q0")
    q0 = q0_coefficients(1.0, t.rel_tol)
    say("q1")
    q1 = q1_prefactor(t.rel_tol)
    say("q2")
    q2 = q2_prefactor(t.rel_tol, one_piece=_scaled(q1, -1.0))
    say("epsilon")
    eps = epsilon_constant(t.eps_rel_tol)
    table = assemble_series(q0, q1, q2.total, eps)
    return SeriesRun(q0, q1, q2, eps, table, moments(table))


# --------------------------------------------------------------------------


def mean_occupation(x0: float, v0: float, t: float, rel_tol=1e-12) -> float:
    """<T+>(x0, v0, t) = t/2 + 1/2 int_0^t du erf[sqrt(3)/2 (x0 + v0 u) / u^(3/2)].

    With u = t - t'. The argument blows up like u^(-3/2) at u -> 0, where erf
    saturates to sign(x0), so the integrand stays bounded; the endpoint is
    resolved by the substitution u = t q^2.
    """
    if not t > 0:
        raise ValueError("t must be positive")

    def f(q):
        u = t * q * q
        with np.errstate(divide="ignore", invalid="ignore"):
            arg = 0.5 * SQRT3 * (x0 + v0 * u) / u**1.5
        arg = np.where(u > 0, arg, math.copysign(50.0, x0) if x0 else 0.0)
        arg = np.nan_to_num(arg, nan=0.0, posinf=50.0, neginf=-50.0)
        return erf_array(arg) * 2.0 * t * q

    r = integrate_1d(f, QuadratureSpec(0.0, 1.0, rel_tol, 1e-15 * t, initial_panels=8))
    return 0.5 * t + 0.5 * r.value
