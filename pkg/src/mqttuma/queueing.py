"""Closed-form M/M/1 metrics and inter-arrival sweeps.

Rates are per millisecond, times in milliseconds.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Optional, TextIO

DEFAULT_MU = 1 / 587
DEFAULT_INTER_ARRIVAL = (588.0, 640.0)
DEFAULT_POINTS = 66

CSV_COLUMNS = ("lambda", "inter_arrival_ms", "rho", "Lq", "Wq_ms", "W_ms", "L", "idle")


class UnstableQueue(ValueError):
    """Raised when utilization is 1 or more; no steady state exists."""


@dataclass(frozen=True)
class QueueParameters:
    lam: float
    mu: float

    def __post_init__(self) -> None:
        for name, v in (("lambda", self.lam), ("mu", self.mu)):
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a positive finite rate, got {v!r}")

    @property
    def rho(self) -> float:
        return self.lam / self.mu


@dataclass(frozen=True)
class QueueMetrics:
    rho: float
    Lq: float
    Wq: float
    W: float
    L: float
    idle: float

    def as_dict(self) -> dict[str, float]:
        return {
            "rho": self.rho, "Lq": self.Lq, "Wq": self.Wq,
            "W": self.W, "L": self.L, "idle": self.idle,
        }


def metrics(params: QueueParameters) -> QueueMetrics:
    lam, mu = params.lam, params.mu
    rho = lam / mu
    if rho >= 1:
        raise UnstableQueue(f"rho = {rho} >= 1 (lambda={lam}, mu={mu})")
    Lq = rho**2 / (1 - rho)
    Wq = Lq / lam
    W = Wq + 1 / mu
    L = lam * W
    return QueueMetrics(rho=rho, Lq=Lq, Wq=Wq, W=W, L=L, idle=1 - rho)


@dataclass(frozen=True)
class SweepRow:
    lam: float
    inter_arrival_ms: float
    metrics: QueueMetrics

    def csv_values(self) -> list[float]:
        m = self.metrics
        return [self.lam, self.inter_arrival_ms, m.rho, m.Lq, m.Wq, m.W, m.L, m.idle]


def inter_arrival_grid(lo: float, hi: float, points: int) -> list[float]:
    """Evenly spaced mean inter-arrival times, ``lo`` and ``hi`` included."""
    if points < 1:
        raise ValueError("points must be >= 1")
    if hi < lo:
        raise ValueError(f"inverted range: {lo} > {hi}")
    if points == 1:
        return [lo]
    step = (hi - lo) / (points - 1)
    return [lo + k * step for k in range(points - 1)] + [hi]


def sweep(
    mu: float = DEFAULT_MU,
    inter_arrival: tuple[float, float] = DEFAULT_INTER_ARRIVAL,
    points: int = DEFAULT_POINTS,
) -> list[SweepRow]:
    rows = []
    for t in inter_arrival_grid(*inter_arrival, points):
        lam = 1 / t
        rows.append(SweepRow(lam, t, metrics(QueueParameters(lam, mu))))
    return rows


def write_csv(rows: Iterable[SweepRow], out: Optional[TextIO] = None,
              extra: Optional[dict[str, object]] = None) -> str:
    """Write rows with the fixed column schema; returns the CSV text.

    ``extra`` columns are appended after the standard ones with the same
    value on every row.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    extra = extra or {}
    writer.writerow(list(CSV_COLUMNS) + list(extra))
    for row in rows:
        writer.writerow([repr(v) for v in row.csv_values()] + [str(v) for v in extra.values()])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
