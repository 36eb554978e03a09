"""Reference statistics of T_m, the time of the maximum of x over [0, t] for a
particle started at rest at the origin. All moments are in units of t^n."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .quadrature import QuadratureResult, QuadratureSpec, integrate_1d
from .specfun import DomainError, bessel_i, gamma, hyp2f1_quarter, ln_gamma


def _check_order(n):
    if not isinstance(n, int) or isinstance(n, bool) or n < 0:
        raise DomainError(f"moment order must be a non-negative integer, got {n!r}")


def tm_moment(n: int) -> float:
    """<T_m^n>/t^n = Gamma(1/2) Gamma(1/4 + n) / (Gamma(1/2 + n) Gamma(1/4))."""
    _check_order(n)
    return math.exp(ln_gamma(0.5) - ln_gamma(0.5 + n) + ln_gamma(0.25 + n) - ln_gamma(0.25))


def tm_moment_exact(n: int) -> Fraction:
    """The same ratio as the rational (1/4)_n / (1/2)_n."""
    _check_order(n)
    r = Fraction(1)
    for k in range(n):
        r *= Fraction(1 + 4 * k, 4) / Fraction(1 + 2 * k, 2)
    return r


def tm_central_moment(n: int) -> float:
    """<(T_m - t/2)^n>/t^n; zero for odd n, closed form for even n."""
    _check_order(n)
    if n % 2:
        raise DomainError("closed form holds for even orders; odd central moments vanish")
    return math.exp((0.5 - n) * math.log(2.0) + ln_gamma(0.5) + ln_gamma(0.5 + n / 2)
                    - ln_gamma(0.25) - ln_gamma(0.75 + n / 2))


def tm_central_from_raw(n: int) -> Fraction:
    """Binomial expansion of the exact raw moments about 1/2."""
    return sum(math.comb(n, k) * tm_moment_exact(k) * Fraction(-1, 2) ** (n - k)
               for k in range(n + 1))


def tm_generating_function(p: float, t: float) -> float:
    """<exp(-p T_m)> = 2^(-1/2) Gamma(3/4) (pt)^(1/4) exp(-pt/2) I_{-1/4}(pt/2)."""
    if p < 0 or t <= 0:
        raise DomainError("need p >= 0 and t > 0")
    u = p * t
    if u == 0:
        return 1.0
    if u > 60:
        # exp(-u/2) I(u/2) without overflow: I(x) ~ e^x / sqrt(2 pi x) (1 + ...)
        x = 0.5 * u
        scaled = bessel_i(-0.25, x) * math.exp(-x) if x < 700 else _i_scaled_asym(x)
        return 2**-0.5 * gamma(0.75) * u**0.25 * scaled
    return 2**-0.5 * gamma(0.75) * u**0.25 * math.exp(-0.5 * u) * bessel_i(-0.25, 0.5 * u)


def _i_scaled_asym(x):
    mu = 0.25
    term = total = 1.0
    for k in range(1, 30):
        term *= -(mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        total += term
        if abs(term) < 1e-17:
            break
    return total / math.sqrt(2.0 * math.pi * x)


def tm_generating_function_laplace(p: float, s: float) -> float:
    """Laplace transform in t: s^-1 2F1(1/4, 1; 1/2; -p/s)."""
    if p < 0 or s <= 0:
        raise DomainError("need p >= 0 and s > 0")
    return hyp2f1_quarter(-p / s) / s


def tm_taylor_coefficients(order: int = 5) -> list[Fraction]:
    """Exact coefficients of (pt)^n in the time-domain generating function.

    With u = pt/2 the function is Gamma(3/4) e^(-u) sum_k (u/2)^(2k) / (k! Gamma(k + 3/4)),
    and Gamma(3/4)/Gamma(k + 3/4) = 1/(3/4)_k is rational.
    """
    # series in u first
    bess = [Fraction(0)] * (order + 1)
    poch = Fraction(1)
    for k in range(order // 2 + 1):
        if k:
            poch *= Fraction(3, 4) + k - 1
        bess[2 * k] = Fraction(1, 4**k * math.factorial(k)) / poch
    expo = [Fraction((-1) ** j, math.factorial(j)) for j in range(order + 1)]
    in_u = [sum(expo[j] * bess[n - j] for j in range(n + 1)) for n in range(order + 1)]
    return [c / 2**n for n, c in enumerate(in_u)]


def laplace_check(p: float = 0.5, s: float = 1.0, rel_tol=1e-12) -> tuple[QuadratureResult, float]:
    """Numerical Laplace transform of the time-domain form against the 2F1 form."""
    import numpy as np

    def f(t):
        return np.array([math.exp(-s * ti) * tm_generating_function(p, ti) if ti > 0 else 1.0
                         for ti in np.ravel(t)]).reshape(np.shape(t))

    T = 45.0 / s
    r = integrate_1d(f, QuadratureSpec(0.0, T, rel_tol, 1e-16, initial_panels=8))
    return r, tm_generating_function_laplace(p, s)


@dataclass(frozen=True)
class TmaxTable:
    raw: dict[int, float]
    central: dict[int, float]


def tmax_table(n_max: int = 5) -> TmaxTable:
    raw = {n: tm_moment(n) for n in range(1, n_max + 1)}
    central = {n: tm_central_moment(n) for n in range(2, n_max + 1, 2)}
    return TmaxTable(raw, central)
