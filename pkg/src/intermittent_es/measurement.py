"""Intermittent cost measurement.

The cost is visible for ``pulse`` seconds at the start of every
``period``: ``h_m(t, x) = h(x)`` if ``mod(t, period) in [0, pulse)`` and
exactly ``0.0`` otherwise.  Only the engine sees this schedule; the
controllers receive the measured value alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

from .checks import ConfigurationError
from .costs import CostField, eval_cost

RISING = "rising"
FALLING = "falling"


@dataclass(frozen=True)
class EdgeEvent:
    time: float
    kind: str


@dataclass(frozen=True)
class MeasurementSchedule:
    period: float = 1.0
    pulse: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.period) and self.period > 0):
            raise ConfigurationError(f"transmission period must be positive, got {self.period}")
        if not (0 < self.pulse <= self.period):
            raise ConfigurationError(
                f"pulse duration must satisfy 0 < eps <= T_s, got eps={self.pulse}, T_s={self.period}"
            )

    @property
    def continuous(self) -> bool:
        return self.pulse == self.period

    def phase(self, t: float) -> float:
        return t - self.period * math.floor(t / self.period)

    def edges(self, t0: float, t1: float) -> Iterator[EdgeEvent]:
        """Edges with ``t0 <= time <= t1`` in time order.

        Edge times are always formed as ``k*period`` and
        ``k*period + pulse`` so callers can compare them exactly.
        """
        k = math.floor(t0 / self.period) - 1
        while True:
            rise = k * self.period
            if rise > t1:
                return
            if rise >= t0:
                yield EdgeEvent(rise, RISING)
            if not self.continuous:
                fall = rise + self.pulse
                if t0 <= fall <= t1:
                    yield EdgeEvent(fall, FALLING)
            k += 1


def case_study_schedule(pulse: float = 0.1) -> MeasurementSchedule:
    return MeasurementSchedule(1.0, pulse)


def arva_min_schedule() -> MeasurementSchedule:
    """Shortest avalanche-beacon pulse: 70 ms every 1 s."""
    return MeasurementSchedule(1.0, 0.07)


def continuous_schedule(period: float = 1.0) -> MeasurementSchedule:
    return MeasurementSchedule(period, period)


PRESETS = {
    "case-study": case_study_schedule,
    "arva-min": arva_min_schedule,
    "continuous": continuous_schedule,
}


def is_transmitting(sched: MeasurementSchedule, t: float) -> bool:
    return sched.phase(t) < sched.pulse


def measure(sched: MeasurementSchedule, cost: CostField, t: float, x) -> float:
    if is_transmitting(sched, t):
        return eval_cost(cost, x)
    return 0.0


def next_edge(sched: MeasurementSchedule, t: float) -> EdgeEvent:
    """Earliest edge strictly after ``t``."""
    k = math.floor(t / sched.period)
    candidates = [EdgeEvent(k * sched.period, RISING), EdgeEvent((k + 1) * sched.period, RISING)]
    if not sched.continuous:
        candidates.append(EdgeEvent(k * sched.period + sched.pulse, FALLING))
    return min((e for e in candidates if e.time > t), key=lambda e: e.time)
