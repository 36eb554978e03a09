"""Coupling kernel k(F, G) between the two half-space expansions and the
symmetric Fredholm kernel K(F, G) = -int_0^inf dH k(F, H) k(G, H)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .airy_basis import velocity_overlap
from .quadrature import QuadratureResult, QuadratureSpec, integrate_1d
from .specfun import ai, airy_ai


@dataclass(frozen=True)
class KernelParams:
    s: float
    p: float
    F: float
    G: float

    def __post_init__(self):
        if not (self.s > 0 and self.F > 0 and self.G > 0):
            raise ValueError("s, F and G must be strictly positive")
        if not self.p >= 0:
            raise ValueError("p must be non-negative")


def kernel_argument(s, p, F, G):
    return ((s + p) * F + s * G) / (np.cbrt(F + G) * (F * G) ** (2.0 / 3.0))


def k_array(s, p, F, G):
    """Vectorised closed form. Negative p is accepted here (used for the
    s <-> s+p exchange symmetry); KernelParams keeps p >= 0."""
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    z = kernel_argument(s, p, F, G)
    return -p * (F * G) ** (-1.0 / 6.0) * (F + G) ** (-4.0 / 3.0) * ai(z)


def k_closed(params: KernelParams) -> float:
    s, p, F, G = params.s, params.p, params.F, params.G
    if p == 0:
        return 0.0
    z = float(kernel_argument(s, p, F, G))
    return -p * (F * G) ** (-1.0 / 6.0) * (F + G) ** (-4.0 / 3.0) * airy_ai(z).value


@dataclass(frozen=True)
class KernelOracle:
    """Two quadrature routes to k: the v-weighted overlap and its reduction."""
    direct: QuadratureResult
    reduced: QuadratureResult

    @property
    def value(self) -> float:
        return self.direct.value

    @property
    def err_est(self) -> float:
        return max(self.direct.err_est, abs(self.direct.value - self.reduced.value))

    @property
    def converged(self) -> bool:
        return self.direct.converged and self.reduced.converged


def k_oracle(params: KernelParams, rel_tol=1e-12, abs_tol=1e-15) -> KernelOracle:
    """Brute-force k from its definition as a velocity integral.

    ``direct`` integrates v psi_{s,F}(-v) psi_{s+p,G}(v) over the real line;
    ``reduced`` uses the integration-by-parts form
    -p/(F+G) int psi_{s,F}(-v) psi_{s+p,G}(v) dv.
    """
    s, p, F, G = params.s, params.p, params.F, params.G
    direct = velocity_overlap(s, F, s + p, G, True, rel_tol, abs_tol)
    plain = velocity_overlap(s, F, s + p, G, False, rel_tol, abs_tol)
    c = -p / (F + G)
    reduced = QuadratureResult(c * plain.value, abs(c) * plain.err_est,
                               plain.evaluations, plain.converged)
    return KernelOracle(direct, reduced)


def K_fredholm(s: float, p: float, F: float, G: float,
               rel_tol=1e-12, abs_tol=1e-300) -> QuadratureResult:
    """-int_0^inf dH k(F,H) k(G,H).

    The integrand vanishes faster than any power as H -> 0 and decays like
    H^-3 at large H, where the Airy arguments tend to s F^(-2/3), s G^(-2/3).
    """
    KernelParams(s, p, F, G)
    if p == 0:
        return QuadratureResult(0.0, 0.0, 0, True)
    scale = math.sqrt(F * G)
    r = integrate_1d(lambda H: k_array(s, p, F, H) * k_array(s, p, G, H),
                     QuadratureSpec(0.0, math.inf, rel_tol, abs_tol, decay="algebraic",
                                    exponent=3.0, scale=scale, initial_panels=8))
    return QuadratureResult(-r.value, r.err_est, r.evaluations, r.converged, r.failed_level)
