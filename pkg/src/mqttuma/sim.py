"""Seeded discrete-event M/M/1 simulator.

A FIFO single server driven by Poisson arrivals and exponential service.
Random numbers come from numpy's PCG64 generator; variates are drawn by
inverse CDF, ``-ln(1 - u) / rate``. With only two kinds of pending event
(next arrival, current departure) the event list is two slots, and when both
fall on the same instant the departure is handled first.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .queueing import CSV_COLUMNS, QueueMetrics, QueueParameters, metrics

DEFAULT_SEED = 42
METRIC_NAMES = ("rho", "Lq", "Wq", "W", "L", "idle")


@dataclass(frozen=True)
class SimConfig:
    lam: float
    mu: float
    arrivals_target: int = 1_000_000
    warmup_fraction: float = 0.1
    seed: int = DEFAULT_SEED
    # service time forced to zero (the mu -> infinity limit)
    instant_service: bool = False

    def __post_init__(self) -> None:
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lambda must be positive, got {self.lam!r}")
        if not self.instant_service and not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError(f"mu must be positive, got {self.mu!r}")
        if int(self.arrivals_target) != self.arrivals_target or self.arrivals_target < 1:
            raise ValueError("arrivals_target must be an integer >= 1")
        if not 0 <= self.warmup_fraction < 1:
            raise ValueError("warmup_fraction must be in [0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class SimResult:
    rho: float
    Lq: float
    Wq: float
    W: float
    L: float
    idle: float
    arrivals_observed: int
    seed: int
    lambda_empirical: float
    departures_at_horizon: int
    in_system_at_horizon: int
    horizon_ms: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def _variates(rng: np.random.Generator, n: int, rate: float) -> np.ndarray:
    return -np.log1p(-rng.random(n)) / rate


def simulate(config: SimConfig, trace: Optional[list] = None) -> SimResult:
    """Run one simulation. ``trace``, if given, receives ``(time, kind)`` events."""
    n = int(config.arrivals_target)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    arrivals = np.cumsum(_variates(rng, n, config.lam)).tolist()
    if config.instant_service:
        service = [0.0] * n
    else:
        service = _variates(rng, n, config.mu).tolist()

    first = min(int(n * config.warmup_fraction), n - 1)
    t_start = arrivals[first]
    horizon = arrivals[-1]

    waiting: deque[int] = deque()
    busy = 0
    dep_time = math.inf
    in_service = -1
    i = 0
    last_t = 0.0
    area_q = area_n = busy_time = 0.0
    sum_wq = sum_w = 0.0
    departures = 0
    in_system_at_horizon = 0
    inf = math.inf

    while i < n or busy:
        next_arr = arrivals[i] if i < n else inf
        t = dep_time if dep_time <= next_arr else next_arr

        lo = last_t if last_t > t_start else t_start
        hi = t if t < horizon else horizon
        if hi > lo:
            span = hi - lo
            q = len(waiting)
            area_q += q * span
            area_n += (q + busy) * span
            busy_time += busy * span
        last_t = t

        if dep_time <= next_arr:
            if trace is not None:
                trace.append((t, "departure"))
            if in_service >= first:
                sum_w += t - arrivals[in_service]
            if i < n:
                departures += 1
            if waiting:
                in_service = waiting.popleft()
                if in_service >= first:
                    sum_wq += t - arrivals[in_service]
                dep_time = t + service[in_service]
            else:
                busy, in_service, dep_time = 0, -1, inf
        else:
            if trace is not None:
                trace.append((t, "arrival"))
            if busy:
                waiting.append(i)
            else:
                busy, in_service = 1, i
                dep_time = t + service[i]
            i += 1
            if i == n:
                in_system_at_horizon = len(waiting) + busy

    counted = n - first
    window = horizon - t_start
    if window > 0:
        rho = busy_time / window
        idle = (window - busy_time) / window
        Lq, L = area_q / window, area_n / window
        lam_emp = counted / window
    else:
        rho, idle, Lq, L, lam_emp = 0.0, 1.0, 0.0, 0.0, 0.0
    return SimResult(
        rho=rho, Lq=Lq, Wq=sum_wq / counted, W=sum_w / counted, L=L, idle=idle,
        arrivals_observed=i, seed=config.seed, lambda_empirical=lam_emp,
        departures_at_horizon=departures, in_system_at_horizon=in_system_at_horizon,
        horizon_ms=horizon,
    )


@dataclass(frozen=True)
class MetricCheck:
    name: str
    simulated: float
    analytic: float
    rel_error: float
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    tolerance: float
    checks: tuple[MetricCheck, ...]
    result: SimResult
    analytic: QueueMetrics = field(repr=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def validate_against_analytic(config: SimConfig, tolerance: float = 0.05) -> ValidationReport:
    """Compare one simulation run with the closed-form metrics."""
    analytic = metrics(QueueParameters(config.lam, config.mu))
    result = simulate(config)
    checks = []
    for name in METRIC_NAMES:
        sim_v, ref = getattr(result, name), getattr(analytic, name)
        err = abs(sim_v - ref) / abs(ref) if ref else abs(sim_v)
        checks.append(MetricCheck(name, sim_v, ref, err, err <= tolerance))
    return ValidationReport(tolerance, tuple(checks), result, analytic)


SIM_CSV_COLUMNS = CSV_COLUMNS + ("seed", "arrivals")


def csv_row(config: SimConfig, result: SimResult) -> list[str]:
    values = [config.lam, 1 / config.lam, result.rho, result.Lq, result.Wq,
              result.W, result.L, result.idle]
    return [repr(float(v)) for v in values] + [str(result.seed), str(result.arrivals_observed)]
