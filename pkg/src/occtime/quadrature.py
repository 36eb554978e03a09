"""Adaptive Gauss-Kronrod quadrature, batched and nestable.

The workhorse is :func:`_adapt`, a globally adaptive G10/K21 bisection
scheme that integrates a *batch* of integrands at once: every batch member
has its own interval ``[a_i, b_i]``, but all members share one panel
partition of the normalised interval ``[0, 1]``. A nested integral is a
recursion of batched 1D integrals, where the integrand of level ``k`` is the
integral over level ``k+1`` evaluated for every node of level ``k`` in one
call. This keeps all the arithmetic inside numpy.

Error estimates follow QUADPACK (``qk21``). Inner-level error estimates are
treated as noise in the outer integrand and integrated with the (positive)
Kronrod weights, so the outer ``err_est`` covers both the outer rule error
and the propagated inner error.

Semi-infinite intervals are handled through the decay hint:

* ``"airy"``: truncation at ``x*`` with ``(2/3) x*^(3/2) = -ln(abs_tol/10)``,
* ``"algebraic"``: the map ``x = a + L (t^-beta - 1)``, ``t in (0, 1]``, with
  ``beta = 2/(exponent - 1)`` so an integrand decaying like ``x^-exponent``
  becomes smooth at ``t = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

# Kronrod 21-point nodes (positive half) and weights, QUADPACK qk21
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208931426364,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
# 10-point Gauss weights, attached to _XGK[1], _XGK[3], ..., _XGK[9]
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515979796209698694337200,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # ascending, 21 points on [-1, 1]
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(21)
_g_idx = [1, 3, 5, 7, 9]
for _i, _w in zip(_g_idx, _WG):
    GAUSS_WEIGHTS[_i] = _w
    GAUSS_WEIGHTS[20 - _i] = _w

_EPMACH = np.finfo(float).eps
_UFLOW = np.finfo(float).tiny
_MAX_ELEMENTS = 1 << 22  # cap on integrand evaluations per call


class QuadratureError(RuntimeError):
    """Integrand produced a non-finite value."""

    def __init__(self, message, abscissa=None, level=None):
        super().__init__(message)
        self.abscissa = abscissa
        self.level = level


@dataclass(frozen=True)
class QuadratureSpec:
    """One integration axis.

    ``a`` and ``b`` may be callables of the outer variables (outermost
    first) when this axis is used as an inner level of
    :func:`integrate_nested`. ``decay`` is one of ``"airy"``,
    ``"algebraic"`` or ``"none"``; ``exponent`` is the algebraic decay rate
    (integrand ~ x^-exponent) and ``scale`` the length scale of the map.
    """

    a: float | Callable = 0.0
    b: float | Callable = 1.0
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_subdivisions: int = 2000
    decay: str = "none"
    exponent: float = 0.0
    scale: float = 1.0
    initial_panels: int = 1

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.decay not in ("airy", "algebraic", "none"):
            raise ValueError(f"unknown decay hint {self.decay!r}")
        if self.decay == "algebraic" and not self.exponent > 1:
            raise ValueError("algebraic decay needs exponent > 1 for integrability")

    def tightened(self, factor: float = 100.0) -> "QuadratureSpec":
        return replace(self, rel_tol=self.rel_tol / factor, abs_tol=self.abs_tol / factor)


@dataclass
class QuadratureResult:
    value: float
    err_est: float
    evaluations: int
    converged: bool
    failed_level: int | None = None


def airy_cutoff(abs_tol: float) -> float:
    """Truncation point x* for an Ai(x)-damped integrand on [a, inf)."""
    return (1.5 * -math.log(abs_tol / 10.0)) ** (2.0 / 3.0)


@dataclass
class _Batch:
    value: np.ndarray
    err: np.ndarray
    converged: np.ndarray
    evaluations: int


def _rule(fun, a, width, lo, hi):
    """Apply K21/G10 on panels [lo, hi] of [0, 1] for all batch members.

    Returns arrays of shape (P, B): Kronrod value, error estimate, noise.
    """
    B = a.shape[0]
    P = lo.shape[0]
    half = 0.5 * (hi - lo)
    tau = (0.5 * (hi + lo))[:, None] + half[:, None] * NODES[None, :]  # (P, 21)
    K = np.empty((P, B))
    E = np.empty((P, B))
    N = np.zeros((P, B))
    rows = max(1, _MAX_ELEMENTS // (P * 21))
    for r0 in range(0, B, rows):
        r1 = min(B, r0 + rows)
        x = a[r0:r1, None] + width[r0:r1, None] * tau.ravel()[None, :]
        fv, nv = fun(x, slice(r0, r1))
        fv = np.asarray(fv, dtype=float).reshape(r1 - r0, P, 21)
        if not np.all(np.isfinite(fv)):
            i, p, j = np.argwhere(~np.isfinite(fv))[0]
            raise QuadratureError(
                "non-finite integrand value", abscissa=float(x[i, p * 21 + j]))
        hl = width[r0:r1, None] * half[None, :]  # (b, P)
        resk = fv @ KRONROD_WEIGHTS
        resg = fv @ GAUSS_WEIGHTS
        resabs = np.abs(fv) @ KRONROD_WEIGHTS
        reskh = 0.5 * resk
        resasc = np.abs(fv - reskh[..., None]) @ KRONROD_WEIGHTS
        ahl = np.abs(hl)
        err = np.abs((resk - resg) * hl)
        resasc = resasc * ahl
        resabs = resabs * ahl
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
        err = np.where((resasc != 0) & (err != 0), scaled, err)
        err = np.where(resabs > _UFLOW / (50 * _EPMACH), np.maximum(50 * _EPMACH * resabs, err), err)
        K[:, r0:r1] = (resk * hl).T
        E[:, r0:r1] = err.T
        if nv is not None:
            nv = np.asarray(nv, dtype=float).reshape(r1 - r0, P, 21)
            N[:, r0:r1] = ((nv @ KRONROD_WEIGHTS) * ahl).T
    return K, E, N


def _adapt(fun, a, b, rel_tol, abs_tol, max_panels, initial_panels=1):
    """Batched globally adaptive integration of fun over [a_i, b_i].

    ``fun(x, rows)`` receives abscissae of shape (len(rows), M) and returns
    ``(values, noise)`` with the same shape; ``noise`` may be None.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    width = b - a
    B = a.shape[0]
    edges = np.linspace(0.0, 1.0, initial_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    K, E, N = _rule(fun, a, width, lo, hi)
    evals = 21 * lo.size * B
    while True:
        total = K.sum(axis=0)
        rule_err = E.sum(axis=0)
        noise = N.sum(axis=0)
        tol = np.maximum(abs_tol, rel_tol * np.abs(total))
        bad = rule_err + noise > tol
        if not bad.any():
            break
        # splitting cannot reduce the propagated inner error
        reducible = bad & (rule_err > 0.1 * tol)
        if lo.size >= max_panels or not reducible.any():
            break
        score = (E[:, reducible] / tol[reducible]).max(axis=1)
        room = max_panels - lo.size
        cap = max(1, _MAX_ELEMENTS // (42 * B))
        order = np.argsort(-score, kind="stable")
        n_split = int(np.sum(score >= 0.25 * score[order[0]]))
        n_split = max(1, min(n_split, room, cap))
        pick = np.sort(order[:n_split])
        mid = 0.5 * (lo[pick] + hi[pick])
        new_lo = np.concatenate([lo[pick], mid])
        new_hi = np.concatenate([mid, hi[pick]])
        Kn, En, Nn = _rule(fun, a, width, new_lo, new_hi)
        evals += 21 * new_lo.size * B
        keep = np.ones(lo.size, dtype=bool)
        keep[pick] = False
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        K = np.concatenate([K[keep], Kn])
        E = np.concatenate([E[keep], En])
        N = np.concatenate([N[keep], Nn])
        srt = np.argsort(lo, kind="stable")
        lo, hi, K, E, N = lo[srt], hi[srt], K[srt], E[srt], N[srt]
    total = K.sum(axis=0)
    err = E.sum(axis=0) + N.sum(axis=0)
    tol = np.maximum(abs_tol, rel_tol * np.abs(total))
    return _Batch(total, err, err <= tol, evals)


def _resolve(bound, outer, B):
    if callable(bound):
        v = bound(*outer)
        return np.broadcast_to(np.asarray(v, dtype=float), (B,)).copy()
    return np.full(B, float(bound))


def _integrate_axis(fun, a, b, spec):
    """Batched integral over one axis with semi-infinite handling.

    ``fun(x, rows)`` as in :func:`_adapt`, with x in the original variable.
    """
    if np.any(np.isnan(a)) or np.any(np.isnan(b)):
        raise ValueError("NaN integration bound")
    a_inf = np.isneginf(a)
    if a_inf.any():
        if not a_inf.all() or np.any(np.isinf(b)):
            raise ValueError("doubly infinite or mixed bounds are not supported; split the axis")

        def reflected(x, rows):
            v, n = fun(-x, rows)
            return v, n

        return _integrate_axis(reflected, -b, np.full_like(b, np.inf), spec)
    b_inf = np.isposinf(b)
    if b_inf.any():
        if not b_inf.all():
            raise ValueError("mixed finite and infinite upper bounds")
        if spec.decay == "airy":
            b = np.maximum(a, airy_cutoff(spec.abs_tol))
        elif spec.decay == "algebraic":
            beta = 2.0 / (spec.exponent - 1.0)
            L = spec.scale

            def mapped(t, rows):
                x = a[rows, None] + L * (t ** -beta - 1.0)
                jac = L * beta * t ** (-beta - 1.0)
                v, n = fun(x, rows)
                return v * jac, None if n is None else n * jac

            return _adapt(mapped, np.zeros_like(a), np.ones_like(a), spec.rel_tol,
                          spec.abs_tol, spec.max_subdivisions, spec.initial_panels)
        else:
            raise ValueError("semi-infinite interval needs a decay hint")
    return _adapt(fun, a, b, spec.rel_tol, spec.abs_tol, spec.max_subdivisions,
                  spec.initial_panels)


def integrate_1d(f: Callable, spec: QuadratureSpec) -> QuadratureResult:
    """Integrate a vectorised scalar function over ``spec``'s interval."""
    a = np.array([float(spec.a)])
    b = np.array([float(spec.b)])

    def fun(x, rows):
        return f(x), None

    r = _integrate_axis(fun, a, b, spec)
    return QuadratureResult(float(r.value[0]), float(r.err[0]), r.evaluations,
                            bool(r.converged[0]), None if r.converged[0] else 0)


def integrate_batch(f: Callable, a, b, spec: QuadratureSpec):
    """Integrate ``f(x, rows)`` for many intervals at once.

    ``f`` receives abscissae of shape (n, M) for the batch rows ``rows`` and
    returns values of the same shape. Returns ``(values, errors, converged)``.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    a, b = np.broadcast_arrays(a, b)

    def fun(x, rows):
        return f(x, rows), None

    r = _integrate_axis(fun, a.copy(), b.copy(), spec)
    return r.value, r.err, r.converged


def integrate_nested(f: Callable, specs: Sequence[QuadratureSpec],
                     weights: Sequence[Callable | None] | None = None) -> QuadratureResult:
    """Iterated integral of ``f(x_1, ..., x_d)`` with ``specs`` outermost first.

    ``f`` must broadcast over its arguments; it may return ``(values, noise)``
    where ``noise`` bounds the error of ``values`` (e.g. from an
    interpolated inner factor). Inner bounds may depend on the outer variables
    through callables. ``weights[k](x_1, ..., x_{k+1})``, when given, multiplies
    the integrand of level ``k`` and is evaluated only on that level's nodes,
    which saves recomputing outer factors at every inner node.
    Each inner level must be at least as tight as the one enclosing it
    (``spec.tightened()`` gives the usual factor 100).
    """
    d = len(specs)
    if not 1 <= d <= 4:
        raise ValueError("nesting depth must be between 1 and 4")
    for outer, inner in zip(specs, specs[1:]):
        if inner.rel_tol > outer.rel_tol:
            raise ValueError("inner tolerances must be at least as tight as outer ones")
    weights = list(weights) if weights is not None else [None] * d
    if len(weights) != d:
        raise ValueError("need one weight entry per level")
    stats = {"evals": 0, "failed": None}

    def level(k, outer):
        B = outer[0].shape[0] if outer else 1
        spec = specs[k]
        a = _resolve(spec.a, outer, B)
        b = _resolve(spec.b, outer, B)

        def fun(x, rows):
            m = x.shape[1]
            sub = tuple(o[rows] for o in outer)
            cols = tuple(o[:, None] for o in sub)
            if k == d - 1:
                out = f(*cols, x)
                vals, noise = out if isinstance(out, tuple) else (out, None)
                stats["evals"] += x.size
            else:
                new_outer = tuple(np.repeat(o, m) for o in sub) + (x.ravel(),)
                try:
                    r = level(k + 1, new_outer)
                except QuadratureError as exc:
                    if exc.level is None:
                        exc.level = k + 1
                    raise
                vals, noise = r.value.reshape(x.shape), r.err.reshape(x.shape)
            if weights[k] is not None:
                w = np.broadcast_to(weights[k](*cols, x), x.shape)
                vals = vals * w
                noise = None if noise is None else noise * np.abs(w)
            return vals, noise

        try:
            r = _integrate_axis(fun, a, b, spec)
        except QuadratureError as exc:
            if exc.level is None:
                exc.level = k
            raise
        if not r.converged.all():
            if stats["failed"] is None or k < stats["failed"]:
                stats["failed"] = k
        return r

    r = level(0, ())
    failed = stats["failed"]
    return QuadratureResult(float(r.value[0]), float(r.err[0]), stats["evals"],
                            failed is None, failed)
