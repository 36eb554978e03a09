"""Monte Carlo for the randomly accelerated particle dx/dt = v, dv/dt = eta(t),
<eta(t) eta(t')> = 2 delta(t - t').

Steps use the exact Gaussian transition of (x, v), so positions and
velocities on the grid carry no discretisation error. Only the occupation
time and the time of the maximum are reconstructed between grid points.

Randomness is keyed by (seed, block index) with a fixed block size, and
block statistics are merged in block order, so results do not depend on the
number of worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

BLOCK_SIZE = 8192
HIST_BINS = 50
MAX_ORDER = 5


@dataclass(frozen=True)
class McConfig:
    trajectories: int = 100_000
    steps: int = 1000
    horizon_t: float = 1.0
    x0: float = 0.0
    v0: float = 0.0
    seed: int = 20240601
    workers: int = 1
    tmax_process: str = "bridge"

    def __post_init__(self):
        if self.tmax_process not in ("bridge", "free"):
            raise ValueError("tmax_process must be 'bridge' or 'free'")
        for name in ("trajectories", "steps", "workers"):
            val = getattr(self, name)
            if not isinstance(val, (int, np.integer)) or val < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not (self.horizon_t > 0 and math.isfinite(self.horizon_t)):
            raise ValueError("horizon_t must be positive")
        if not (math.isfinite(self.x0) and math.isfinite(self.v0)):
            raise ValueError("initial state must be finite")
        if self.steps < 100:
            raise ValueError("steps must be at least 100 (dt <= t/100)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def dt(self) -> float:
        return self.horizon_t / self.steps

    @property
    def n_blocks(self) -> int:
        return -(-self.trajectories // BLOCK_SIZE)


@dataclass(frozen=True)
class TrajectoryState:
    x: float
    v: float
    t_elapsed: float = 0.0
    t_plus: float = 0.0
    x_max: float = -math.inf
    t_at_max: float = 0.0


@dataclass(frozen=True)
class McEstimate:
    name: str
    moment_order: int
    value: float
    std_err: float
    n_samples: int


# --------------------------------------------------------------------------
# kernels


def _increments(v, dt, xi1, xi2):
    """Exact (dx, dv) over dt: Var dv = 2dt, Var dx = 2dt^3/3, Cov = dt^2."""
    sd = math.sqrt(2.0 * dt)
    dv = sd * xi1
    dx = v * dt + dt * sd * (0.5 * xi1 + xi2 / (2.0 * math.sqrt(3.0)))
    return dx, dv


def _positive_fraction(xa, xb):
    """Fraction of [a, b] with x > 0 for x linear between the endpoints.

    Equal to 1 or 0 without a sign change; a zero endpoint counts as half.
    """
    num = np.maximum(xa, 0.0) + np.maximum(xb, 0.0)
    den = np.abs(xa) + np.abs(xb)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.5)


def propagate_step(state: TrajectoryState, dt: float, noise: tuple[float, float]) -> TrajectoryState:
    """Advance one exact step and update the path functionals."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    dx, dv = _increments(state.v, dt, float(noise[0]), float(noise[1]))
    x1, v1 = state.x + dx, state.v + dv
    t1 = state.t_elapsed + dt
    t_plus = state.t_plus + dt * float(_positive_fraction(state.x, x1))
    x_max, t_max = state.x_max, state.t_at_max
    if state.t_elapsed == 0.0 and state.x > x_max:
        x_max, t_max = state.x, 0.0
    if x1 > x_max:
        x_max, t_max = x1, t1
    return TrajectoryState(x1, v1, t1, t_plus, x_max, t_max)


def occupation_functional(path: Sequence[TrajectoryState] | tuple[np.ndarray, np.ndarray]) -> float:
    """T+ for a path given on a time grid, with linear interpolation of
    sign changes between grid points."""
    if isinstance(path, tuple):
        t, x = (np.asarray(a, dtype=float) for a in path)
    else:
        t = np.array([s.t_elapsed for s in path])
        x = np.array([s.x for s in path])
    return float(np.sum(np.diff(t) * _positive_fraction(x[:-1], x[1:])))


def _refine_max_time(k, steps, dt, v_before, v_at, v_after):
    """Time of the maximum near grid index k from the zero of the linearly
    interpolated velocity on the adjacent interval."""
    with np.errstate(invalid="ignore", divide="ignore"):
        after = k * dt + dt * np.clip(v_at / (v_at - v_after), 0.0, 1.0)
        before = (k - 1) * dt + dt * np.clip(v_before / (v_before - v_at), 0.0, 1.0)
    t = np.where(v_at > 0, np.where(k < steps, after, k * dt),
                 np.where(k > 0, before, 0.0))
    return np.clip(t, 0.0, steps * dt)


def _walk(config: McConfig, block: int):
    """Yield (k, x_prev, x, v_prev, v) for every step of one block's paths."""
    n = min(BLOCK_SIZE, config.trajectories - block * BLOCK_SIZE)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.seed, block])))
    dt = config.dt
    sd = math.sqrt(2.0 * dt)
    cx = dt * sd * 0.5
    cy = dt * sd / (2.0 * math.sqrt(3.0))
    x = np.full(n, float(config.x0))
    v = np.full(n, float(config.v0))
    buf = np.empty((2, n))
    for k in range(1, config.steps + 1):
        rng.standard_normal(out=buf)
        xi1, xi2 = buf
        x_new = x + v * dt + cx * xi1 + cy * xi2
        v_new = v + sd * xi1
        yield k, x, x_new, v, v_new
        x, v = x_new, v_new


def _argmax_time(config, paths):
    """Time of the maximum of x over the grid path, refined at the velocity zero."""
    best = best_k = v_before = v_at = v_after = None
    for k, x_prev, x, v_prev, v in paths:
        if best is None:
            best = x_prev.copy()
            best_k = np.zeros(len(x), dtype=np.int64)
            v_before = v_at = v_after = v_prev.copy()
        v_after = np.where(best_k == k - 1, v, v_after)
        up = x > best
        if up.any():
            best = np.where(up, x, best)
            best_k = np.where(up, k, best_k)
            v_before = np.where(up, v_prev, v_before)
            v_at = np.where(up, v, v_at)
    return _refine_max_time(best_k, config.steps, config.dt, v_before, v_at, v_after)


def simulate_block(config: McConfig, block: int) -> tuple[np.ndarray, np.ndarray]:
    """T+/t and T_m/t for the trajectories of one block.

    By default T_m is the time of the maximum of x for the process whose
    velocity returns to zero at the horizon (the integrated Brownian bridge,
    for which the closed-form T_m statistics hold). It is built exactly from
    the free path, x_b(s) = x(s) - s^2 v(t) / 2t, v_b(s) = v(s) - s v(t) / t,
    so the block's random stream is replayed once v(t) is known. With
    ``tmax_process="free"`` T_m is taken on the free path itself.
    """
    dt, T = config.dt, config.steps * config.dt
    state = {"t_plus": 0.0, "v_end": None}

    def tallied(paths):
        for item in paths:
            state["t_plus"] = state["t_plus"] + _positive_fraction(item[1], item[2])
            state["v_end"] = item[4]
            yield item

    if config.tmax_process == "free":
        t_m = _argmax_time(config, tallied(_walk(config, block)))
    else:
        for _ in tallied(_walk(config, block)):
            pass
        a = state["v_end"] / T

        def bridged():
            for k, x_prev, x, v_prev, v in _walk(config, block):
                s0, s1 = (k - 1) * dt, k * dt
                yield (k, x_prev - 0.5 * a * s0 * s0, x - 0.5 * a * s1 * s1,
                       v_prev - a * s0, v - a * s1)

        t_m = _argmax_time(config, bridged())
    return state["t_plus"] * dt / config.horizon_t, t_m / config.horizon_t


# --------------------------------------------------------------------------
# statistics


def _statistics(y, m):
    """Per-trajectory quantities whose means are reported."""
    cols = {}
    for n in range(1, MAX_ORDER + 1):
        cols[f"tplus_raw_{n}"] = y**n
        cols[f"tplus_central_{n}"] = (y - 0.5) ** n
        cols[f"tmax_raw_{n}"] = m**n
        cols[f"tmax_central_{n}"] = (m - 0.5) ** n
        cols[f"diff_raw_{n}"] = y**n - m**n
    return cols


@dataclass
class _Moments:
    """Running mean and sum of squared deviations (Chan et al. merge)."""
    n: int = 0
    mean: dict = field(default_factory=dict)
    m2: dict = field(default_factory=dict)

    def merge(self, n_b, mean_b, m2_b):
        if self.n == 0:
            self.n, self.mean, self.m2 = n_b, dict(mean_b), dict(m2_b)
            return
        n = self.n + n_b
        for k in mean_b:
            d = mean_b[k] - self.mean[k]
            self.mean[k] = self.mean[k] + d * n_b / n
            self.m2[k] = self.m2[k] + m2_b[k] + d * d * self.n * n_b / n
        self.n = n


def _block_summary(args):
    config, block = args
    y, m = simulate_block(config, block)
    cols = _statistics(y, m)
    mean = {k: float(np.mean(c)) for k, c in cols.items()}
    m2 = {k: float(np.sum((c - mean[k]) ** 2)) for k, c in cols.items()}
    edges = np.linspace(0.0, 1.0, HIST_BINS + 1)
    hist_y = np.histogram(np.clip(y, 0, 1), edges)[0]
    hist_m = np.histogram(np.clip(m, 0, 1), edges)[0]
    return len(y), mean, m2, hist_y, hist_m


@dataclass
class McRun:
    config: McConfig
    n: int
    mean: dict[str, float]
    std_err: dict[str, float]
    hist_tplus: np.ndarray
    hist_tmax: np.ndarray

    def estimate(self, key: str, order: int) -> McEstimate:
        return McEstimate(key, order, self.mean[key], self.std_err[key], self.n)


def run(config: McConfig) -> McRun:
    tasks = [(config, b) for b in range(config.n_blocks)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_block_summary, tasks))
    else:
        results = [_block_summary(t) for t in tasks]
    acc = _Moments()
    hy = np.zeros(HIST_BINS, dtype=np.int64)
    hm = np.zeros(HIST_BINS, dtype=np.int64)
    for n_b, mean_b, m2_b, hy_b, hm_b in results:
        acc.merge(n_b, mean_b, m2_b)
        hy += hy_b
        hm += hm_b
    n = acc.n
    se = {k: math.sqrt(acc.m2[k] / (n - 1) / n) if n > 1 else math.inf for k in acc.m2}
    return McRun(config, n, acc.mean, se, hy, hm)


def _check_orders(orders):
    orders = sorted(set(orders))
    if not orders or orders[0] < 1 or orders[-1] > MAX_ORDER:
        raise ValueError(f"orders must lie in 1..{MAX_ORDER}")
    return orders


def estimate_moments(config: McConfig, orders: Iterable[int] = range(1, 6),
                     result: McRun | None = None) -> list[McEstimate]:
    """<(T+/t)^n> and <((T+ - t/2)/t)^n> with standard errors."""
    orders = _check_orders(orders)
    r = result or run(config)
    out = [r.estimate(f"tplus_raw_{n}", n) for n in orders]
    out += [r.estimate(f"tplus_central_{n}", n) for n in orders]
    return out


def estimate_tmax_moments(config: McConfig, orders: Iterable[int] = range(1, 6),
                          result: McRun | None = None) -> list[McEstimate]:
    if config.x0 != 0 or config.v0 != 0:
        raise ValueError("T_m reference values assume a start at rest at the origin")
    orders = _check_orders(orders)
    r = result or run(config)
    return [r.estimate(f"tmax_raw_{n}", n) for n in orders]


def convergence_study(config: McConfig, steps: Sequence[int] = (100, 1000, 10000),
                      orders: Iterable[int] = (2, 4)) -> dict[int, list[McEstimate]]:
    """Moment estimates for several grid resolutions with the same seed."""
    return {m: estimate_moments(replace(config, steps=m), orders) for m in steps}
