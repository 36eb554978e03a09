"""Command line interface: ``occtime {moments,epsilon,validate,mc,compare}``.

Exit codes: 0 pass, 1 validation failure, 2 non-convergence, 3 bad config.
Reports go to stdout or ``--out``; timing goes to stderr so that reports are
byte-identical across repeated runs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__

EXIT_OK, EXIT_FAIL, EXIT_NONCONV, EXIT_CONFIG = 0, 1, 2, 3
COLUMNS = ("name", "n", "value", "err", "provenance", "paper_anchor")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


@dataclass
class Row:
    name: str
    n: int | str
    value: float | str
    err: float | str = ""
    provenance: str = ""
    paper_anchor: str = ""
    status: str = ""


@dataclass
class Report:
    title: str
    rows: list[Row] = field(default_factory=list)
    failed: bool = False
    nonconverged: bool = False

    def add(self, *args, **kw):
        self.rows.append(Row(*args, **kw))

    def check(self, name, n, value, ok, err="", provenance="check", anchor=""):
        self.rows.append(Row(name, n, value, err, provenance, anchor, "pass" if ok else "FAIL"))
        if not ok:
            self.failed = True

    @property
    def exit_code(self):
        if self.nonconverged:
            return EXIT_NONCONV
        return EXIT_FAIL if self.failed else EXIT_OK


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


def render(report: Report, fmt: str) -> str:
    with_status = any(r.status for r in report.rows)
    cols = COLUMNS + (("status",) if with_status else ())
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in report.rows:
            w.writerow([_fmt(getattr(r, c)) for c in cols])
        return buf.getvalue()
    if fmt == "json":
        data = {"title": report.title,
                "rows": [{c: (getattr(r, c) if not isinstance(getattr(r, c), np.generic)
                              else getattr(r, c).item()) for c in cols} for r in report.rows],
                "exit_code": report.exit_code}
        return json.dumps(data, indent=2, sort_keys=False) + "\n"
    table = [[_fmt(getattr(r, c)) for c in cols] for r in report.rows]
    widths = [max(len(c), *(len(t[i]) for t in table)) if table else len(c) for i, c in enumerate(cols)]
    lines = [report.title, "  ".join(c.ljust(w) for c, w in zip(cols, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(t[i].ljust(widths[i]) for i in range(len(cols))).rstrip() for t in table]
    return "\n".join(lines) + "\n"


def emit(report: Report, args) -> int:
    text = render(report, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return report.exit_code


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


# --------------------------------------------------------------------------
# moments / epsilon


def _series_rows(report: Report, run):
    q0, q1, q2, eps = run.q0, run.q1, run.q2, run.eps
    report.add("q0_coefficient", 2, q0[2].value, q0[2].err_est, "quadrature", "3^(3/2)/(4pi)")
    report.add("q0_coefficient", 3, q0[3].value, q0[3].err_est, "quadrature", "3^(5/2)/(8pi) - 1")
    report.add("q0_coefficient", 4, q0[4].value, q0[4].err_est, "quadrature", "3^(7/2)/(8pi) - 3/2")
    report.add("q1_prefactor", 3, q1.value, q1.err_est, "quadrature", "5/4 - 3^(5/2)/(4pi)")
    report.add("q2_total", 4, q2.total.value, q2.total.err_est, "quadrature", "3^(5/2)/(4pi) - 5/4")
    report.add("q2_cancellation_residual", 4, q2.residual, q2.residual_err, "quadrature", "0")
    report.add("epsilon", 4, eps.value, eps.err_est, "quadrature", "0.0008720732")
    t = run.table
    for n in sorted(t.coeffs):
        report.add("series_coefficient", n, t.coeffs[n], t.err[n], t.provenance[n], "c_n")
    m = run.moments
    anchors = {1: "1/2", 2: "3^(3/2)/(4pi)", 3: "3^(5/2)/(8pi) - 1/4",
               4: "7 3^(5/2)/(8pi) - 4 + eps", 5: "95 3^(3/2)/(16pi) - 19/2 + 5/2 eps"}
    for n in sorted(m.raw):
        prov = "closed_form" if n == 1 else t.provenance[n]
        report.add("raw_moment", n, m.raw[n], "exact" if n == 1 else m.raw_err[n], prov, anchors[n])
    report.add("central_moment", 2, m.central[2], m.central_err[2], "quadrature", "3^(3/2)/(4pi) - 1/4")
    report.add("central_moment", 4, m.central[4], m.central_err[4], "quadrature",
               "3^(7/2)/(4pi) - 59/16 + eps")
    converged = all(r.converged for r in (*q0.values(), q1, q2.total, eps))
    report.nonconverged = not converged
    return report


def cmd_moments(args) -> int:
    from .series import compute_series

    t0 = time.perf_counter()
    run = compute_series(args.tier, progress=lambda s: _log(f"[moments] computing {s}"))
    report = _series_rows(Report(f"occupation-time moments (tier {args.tier})"), run)
    for msg in run.table.flags + run.moments.check():
        report.check("table_invariant", "", msg, False)
    _log(f"[moments] wall time {time.perf_counter() - t0:.1f} s")
    return emit(report, args)


def cmd_epsilon(args) -> int:
    from .series import epsilon_constant, get_tier

    t0 = time.perf_counter()
    tier = get_tier(args.tier)
    r = epsilon_constant(tier.eps_rel_tol)
    report = Report(f"epsilon (tier {args.tier})")
    report.add("epsilon", 4, r.value, r.err_est, "quadrature", "0.0008720732")
    report.add("evaluations", "", r.evaluations, "", "diagnostic", "")
    report.check("epsilon_positive", "", r.value, r.value > 0)
    report.nonconverged = not r.converged
    _log(f"[epsilon] wall time {time.perf_counter() - t0:.1f} s")
    return emit(report, args)


# --------------------------------------------------------------------------
# validate


VALIDATION_POINTS = [(0.5, 0.3), (0.5, -1.0), (1.0, 0.5), (1.0, -0.5), (1.0, 2.0),
                     (2.0, 1.3), (2.0, -0.2), (3.0, 0.05), (0.2, 4.0), (5.0, -2.5)]


def validate_basis(report: Report):
    from .airy_basis import (BasisPoint, check_orthonormality, closure_apply,
                             exact_half_integral, half_integral_quadrature,
                             identity_one_over_s, psi)

    for s, v in VALIDATION_POINTS:
        r = identity_one_over_s(s, v)
        report.check("identity_one_over_s", f"s={s} v={v}", r.value,
                     abs(r.value - 1 / s) <= 1e-8 and r.converged, r.err_est, "quadrature", "1/s")
        h = half_integral_quadrature(s, v)
        report.check("half_integral_closed_form", f"s={s} v={v}", h.value - exact_half_integral(s, v),
                     abs(h.value - exact_half_integral(s, v)) <= 1e-8, h.err_est, "quadrature",
                     "(2 - e^(-sqrt(3s)|v|))/2s | e^(-sqrt(3s)|v|)/2s")
    for F, G in [(0.5, 2.0), (1.0, 1.3), (3.0, 0.7)]:
        rep = check_orthonormality(1.0, F, G)
        report.check("cross_orthogonality", f"F={F} G={G}", rep["cross"], rep["cross_ok"],
                     rep["cross_err"], "quadrature", "0")
    for F in (0.9, 1.0, 1.1):
        rep = check_orthonormality(1.0, F, 1.0)
        report.check("smeared_delta", f"F={F}", rep["smeared"] - rep["smeared_expected"],
                     rep["smeared_ok"], "", "quadrature", "phi(F)")
    for v in (1.0, 1.25, 1.5, 1.75, 2.0):
        r, expected = closure_apply(1.0, v)
        report.check("closure", f"v={v}", r.value - expected, abs(r.value - expected) <= 1e-4,
                     r.err_est, "quadrature", "f(v)")
    worst = 0.0
    for lam in (0.5, 2.0, 7.0):
        for s, F, v in [(1.0, 1.0, 0.3), (0.4, 2.5, -1.2)]:
            a = psi(BasisPoint(lam ** (2 / 3) * s, lam * F, lam ** (-1 / 3) * v))
            b = lam ** (-1 / 6) * psi(BasisPoint(s, F, v))
            worst = max(worst, abs(a - b) / abs(b))
    report.check("scaling_covariance", "", worst, worst <= 1e-13, "", "pointwise", "lambda^(-1/6)")


def validate_kernel(report: Report):
    from .kernel import KernelParams, K_fredholm, k_array, k_closed, k_oracle

    rng = np.random.default_rng(12345)
    worst = 0.0
    for _ in range(50):
        s, p, F, G = np.exp(rng.uniform(-1.5, 1.5, 4))
        P = KernelParams(s, p, F, G)
        kc, o = k_closed(P), k_oracle(P)
        worst = max(worst, abs(o.direct.value / kc - 1), abs(o.reduced.value / kc - 1))
    report.check("kernel_oracle_match", 50, worst, worst <= 1e-8, "", "quadrature", "max rel")
    o = k_oracle(KernelParams(1.0, 0.0, 1.0, 2.0))
    report.check("kernel_p0", "", o.value, abs(o.value) <= 1e-10, o.err_est, "quadrature", "0")
    worst = 0.0
    for _ in range(20):
        s, p, F, G = np.exp(rng.uniform(-1, 1, 4))
        worst = max(worst, abs(k_array(s + p, -p, F, G) + k_array(s, p, G, F)))
    report.check("kernel_exchange_symmetry", 20, worst, worst <= 1e-15, "", "closed_form", "p -> -p")
    worst = 0.0
    sign_ok = True
    for _ in range(20):
        s, p, F, G = np.exp(rng.uniform(-1, 1, 4))
        a, b = K_fredholm(s, p, F, G), K_fredholm(s, p, G, F)
        worst = max(worst, abs(a.value - b.value))
        sign_ok &= a.value <= 0
    report.check("K_symmetry", 20, worst, worst <= 1e-10, "", "quadrature", "K(F,G) = K(G,F)")
    report.check("K_sign", 20, "", sign_ok, "", "quadrature", "K <= 0")
    ratios = [K_fredholm(1.0, p, 1.0, 2.0).value / p**2 for p in (1e-2, 1e-3, 1e-4)]
    dr = (ratios[2] - ratios[1]) / (ratios[1] - ratios[0])
    report.check("K_order_p2", "", ratios[2], abs(dr - 0.1) < 0.02, "", "quadrature", "K/p^2 finite")
    lam, P = 1.7, (0.8, 0.6, 1.3, 0.4)
    a = k_closed(KernelParams(lam ** (2 / 3) * P[0], lam ** (2 / 3) * P[1], lam * P[2], lam * P[3]))
    b = k_closed(KernelParams(*P)) / lam
    report.check("kernel_scale_covariance", "", a / b - 1, abs(a / b - 1) <= 1e-13, "", "closed_form",
                 "lambda^(-1)")


def validate_series(report: Report, tier: str):
    from .series import (C2_EXACT, Q0_3_EXACT, Q0_4_EXACT, Q1_EXACT, closed_form_series,
                         compute_series, odd_relation_residuals,
                         q0_coefficients, q1_prefactor, shifted_series)

    q0 = q0_coefficients()
    for n, exact in ((2, C2_EXACT), (3, Q0_3_EXACT), (4, Q0_4_EXACT)):
        report.check("q0_closed_integrals", n, q0[n].value - exact, abs(q0[n].value - exact) <= 1e-9,
                     q0[n].err_est, "quadrature", "closed x-integrals")
    d1, d2 = q0_coefficients(1.0, route="direct"), q0_coefficients(2.0, route="direct")
    worst = max(abs(d1[n].value - d2[n].value) for n in (2, 3, 4))
    report.check("s_scaling_q0", "", worst, worst <= 1e-8, "", "quadrature", "s=1 vs s=2")
    a, b = q1_prefactor(1e-9, s=1.0), q1_prefactor(1e-9, s=2.0)
    report.check("s_scaling_q1", "", a.value - b.value, abs(a.value - b.value) <= 1e-8,
                 a.err_est + b.err_est, "quadrature", "s=1 vs s=2")
    run = compute_series(tier)
    report.check("q1_prefactor", 3, run.q1.value - Q1_EXACT, abs(run.q1.value - Q1_EXACT) <= 1e-8,
                 run.q1.err_est, "quadrature", "5/4 - 3^(5/2)/(4pi)")
    report.check("q2_cancellation_residual", 4, run.q2.residual, abs(run.q2.residual) <= 1e-8,
                 run.q2.residual_err, "quadrature", "0")
    report.check("q2_total", 4, run.q2.total.value + Q1_EXACT,
                 abs(run.q2.total.value + Q1_EXACT) <= 1e-8, run.q2.total.err_est, "quadrature",
                 "3^(5/2)/(4pi) - 5/4")
    report.check("epsilon_positive", 4, run.eps.value, run.eps.value > 0, run.eps.err_est,
                 "quadrature", "eps > 0")
    res = odd_relation_residuals(run.moments)
    for n, r in res.items():
        tol = 10 * (run.table.err[min(n, 4)] + run.table.err[2]) + 1e-14
        report.check("odd_moment_relation", n, r, abs(r) <= tol, tol, "mixed", "odd central = 0")
    shifted = shifted_series(run.table)
    worst = max(abs(shifted[n]) for n in (1, 3, 5))
    tol = 10 * sum(run.table.err.values()) + 1e-14
    report.check("even_generating_function", "1,3,5", worst, worst <= tol, tol, "mixed",
                 "exp(pt/2) Q_p even")
    ref = closed_form_series(run.eps.value)
    worst = max(abs(ref.coeffs[n] - run.table.coeffs[n]) for n in ref.coeffs)
    report.check("closed_form_agreement", "0..5", worst, worst <= 1e-8, "", "mixed",
                 "exact coefficients")
    report.nonconverged |= not all(r.converged for r in (*run.q0.values(), run.q1, run.q2.total,
                                                          run.eps, a, b))


def cmd_validate(args) -> int:
    t0 = time.perf_counter()
    report = Report(f"validation suite: {args.suite}")
    suites = ["basis", "kernel", "series"] if args.suite == "all" else [args.suite]
    for s in suites:
        _log(f"[validate] suite {s}")
        if s == "basis":
            validate_basis(report)
        elif s == "kernel":
            validate_kernel(report)
        else:
            validate_series(report, args.tier)
    _log(f"[validate] wall time {time.perf_counter() - t0:.1f} s")
    return emit(report, args)


# --------------------------------------------------------------------------
# Monte Carlo


def _orders(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            out = list(range(int(lo), int(hi) + 1))
        else:
            out = [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad order list {text!r}") from None
    if not out or min(out) < 1 or max(out) > 5:
        raise argparse.ArgumentTypeError("orders must lie in 1..5")
    return out


def _mc_config(args):
    from .mc import McConfig

    try:
        return McConfig(trajectories=args.trajectories, steps=args.steps, horizon_t=args.t,
                        x0=args.x0, v0=args.v0, seed=args.seed, workers=args.workers,
                        tmax_process=args.tmax_process)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _z(value, err, target):
    return (value - target) / err if err > 0 else (0.0 if value == target else math.inf)


def cmd_mc(args) -> int:
    from . import mc
    from .series import closed_form_series, moments as series_moments
    from .tmax import tm_moment

    config = _mc_config(args)
    t0 = time.perf_counter()
    result = mc.run(config)
    _log(f"[mc] wall time {time.perf_counter() - t0:.1f} s")
    report = Report(f"Monte Carlo: {config.trajectories} trajectories, {config.steps} steps, "
                    f"seed {config.seed}")
    analytic = series_moments(closed_form_series())
    at_origin = config.x0 == 0 and config.v0 == 0
    for n in args.orders:
        key = f"tplus_raw_{n}"
        v, e = result.mean[key], result.std_err[key]
        report.add("tplus_raw", n, v, e, "monte_carlo", "")
        if at_origin:
            z = _z(v, e, analytic.raw[n])
            report.check("tplus_raw_z", n, z, abs(z) <= 4, "", "monte_carlo", f"{analytic.raw[n]:.9f}")
    for n in args.orders:
        key = f"tplus_central_{n}"
        report.add("tplus_central", n, result.mean[key], result.std_err[key], "monte_carlo", "")
        if at_origin and n % 2 == 1:
            z = _z(result.mean[key], result.std_err[key], 0.0)
            report.check("tplus_central_odd_z", n, z, abs(z) <= 4, "", "monte_carlo", "0")
    if at_origin:
        for n in args.orders:
            key = f"tmax_raw_{n}"
            v, e = result.mean[key], result.std_err[key]
            report.add("tmax_raw", n, v, e, "monte_carlo", "")
            if config.tmax_process == "bridge":
                z = _z(v, e, tm_moment(n))
                report.check("tmax_raw_z", n, z, abs(z) <= 4, "", "monte_carlo", f"{tm_moment(n):.9f}")
    return emit(report, args)


def cmd_compare(args) -> int:
    from . import mc
    from .series import closed_form_series, moments as series_moments
    from .tmax import tm_central_moment, tm_moment

    args.x0 = args.v0 = 0.0
    config = _mc_config(args)
    t0 = time.perf_counter()
    result = mc.run(config)
    _log(f"[compare] wall time {time.perf_counter() - t0:.1f} s")
    analytic = series_moments(closed_form_series())
    report = Report("T+ versus T_m")
    for n in range(1, 6):
        report.add("tplus_analytic", n, analytic.raw[n], "", "closed_form", "")
        report.add("tmax_analytic", n, tm_moment(n), "", "closed_form", "")
        report.add("tplus_mc", n, result.mean[f"tplus_raw_{n}"], result.std_err[f"tplus_raw_{n}"],
                   "monte_carlo", "")
        report.add("tmax_mc", n, result.mean[f"tmax_raw_{n}"], result.std_err[f"tmax_raw_{n}"],
                   "monte_carlo", "")
    for n in (2, 4):
        report.add("tplus_central_analytic", n, analytic.central[n], "", "closed_form", "")
        report.add("tmax_central_analytic", n, tm_central_moment(n), "", "closed_form", "")
    for n in range(2, 6):
        d, e = result.mean[f"diff_raw_{n}"], result.std_err[f"diff_raw_{n}"]
        report.check("ordering_tplus_below_tmax", n, d, analytic.raw[n] < tm_moment(n) and d < 0,
                     e, "monte_carlo", "<T+^n> < <T_m^n>")
    if args.hist:
        edges = np.linspace(0.0, 1.0, mc.HIST_BINS + 1)
        with open(args.hist, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("bin_lo", "bin_hi", "tplus_count", "tmax_count"))
            for i in range(mc.HIST_BINS):
                w.writerow((f"{edges[i]:.2f}", f"{edges[i + 1]:.2f}",
                            int(result.hist_tplus[i]), int(result.hist_tmax[i])))
    return emit(report, args)


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="occtime", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, tier=True):
        if tier:
            sp.add_argument("--tier", choices=("fast", "paper"), default="fast",
                            help="tolerance tier: fast (default, about a minute) or paper "
                                 "(tight tolerances, much longer)")
        sp.add_argument("--format", choices=("csv", "json", "pretty"), default="pretty")
        sp.add_argument("--out", help="write the report here instead of stdout")

    common(sub.add_parser("moments", help="series coefficients and moment table"))
    common(sub.add_parser("epsilon", help="the fourth-order constant epsilon"))
    v = sub.add_parser("validate", help="identity and consistency checks")
    v.add_argument("--suite", choices=("basis", "kernel", "series", "all"), default="all")
    common(v)

    def mc_args(sp, trajectories):
        sp.add_argument("--trajectories", type=int, default=trajectories)
        sp.add_argument("--steps", type=int, default=1000)
        sp.add_argument("--t", type=float, default=1.0, help="time horizon")
        sp.add_argument("--seed", type=int, default=20240601)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--tmax-process", choices=("bridge", "free"), default="bridge",
                        help="process on which T_m is measured (default: velocity pinned to "
                             "zero at both ends, which the closed-form T_m values describe)")
        common(sp, tier=False)

    m = sub.add_parser("mc", help="Monte Carlo moment estimates")
    mc_args(m, 100_000)
    m.add_argument("--x0", type=float, default=0.0)
    m.add_argument("--v0", type=float, default=0.0)
    m.add_argument("--orders", type=_orders, default=[1, 2, 3, 4, 5], help="e.g. 1..5 or 2,4")
    c = sub.add_parser("compare", help="T+ versus T_m table and histograms")
    mc_args(c, 1_000_000)
    c.add_argument("--hist", help="CSV path for the histograms of T+/t and T_m/t")
    return p


COMMANDS = {"moments": cmd_moments, "epsilon": cmd_epsilon, "validate": cmd_validate,
            "mc": cmd_mc, "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"occtime: bad configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"occtime: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # quadrature breakdown and the like
        from .quadrature import QuadratureError

        if isinstance(exc, QuadratureError):
            print(f"occtime: quadrature failed: {exc}", file=sys.stderr)
            return EXIT_NONCONV
        raise


if __name__ == "__main__":
    sys.exit(main())
