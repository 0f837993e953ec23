import numpy as np
import pytest

from intermittent_es.checks import ConfigurationError
from intermittent_es.costs import case_study_cost, eval_cost
from intermittent_es.measurement import (
    FALLING,
    RISING,
    MeasurementSchedule,
    arva_min_schedule,
    continuous_schedule,
    is_transmitting,
    measure,
    next_edge,
)

S = MeasurementSchedule(1.0, 0.17)


def test_measure_during_pulse():
    assert measure(S, case_study_cost(), 0.05, [-1.0]) == 19.0
    assert measure(S, case_study_cost(), 2.05, [0.5]) == eval_cost(case_study_cost(), [0.5])


def test_measure_during_break_is_exact_zero():
    v = measure(S, case_study_cost(), 0.5, [-1.0])
    assert v == 0.0 and isinstance(v, float)


@pytest.mark.parametrize("t,want", [(0.0, True), (0.17, False), (-0.9, True), (0.99, False), (3.0, True)])
def test_is_transmitting(t, want):
    assert is_transmitting(S, t) is want


@pytest.mark.parametrize("t,time,kind", [(0.05, 0.17, FALLING), (0.5, 1.0, RISING), (0.0, 0.17, FALLING)])
def test_next_edge(t, time, kind):
    e = next_edge(S, t)
    assert (e.time, e.kind) == (time, kind)


def test_next_edge_continuous():
    e = next_edge(continuous_schedule(1.0), 0.3)
    assert (e.time, e.kind) == (1.0, RISING)


def test_edges_alternate_and_increase():
    t = 0.0
    kinds, times = [], []
    for _ in range(20):
        e = next_edge(S, t)
        kinds.append(e.kind)
        times.append(e.time)
        t = e.time
    assert all(a != b for a, b in zip(kinds, kinds[1:]))
    assert all(b > a for a, b in zip(times, times[1:]))


def test_edges_listing():
    got = [(e.time, e.kind) for e in S.edges(0.0, 2.0)]
    assert got == [(0.0, RISING), (0.17, FALLING), (1.0, RISING), (1.17, FALLING), (2.0, RISING)]
    assert [e.kind for e in continuous_schedule().edges(0.0, 3.0)] == [RISING] * 4


@pytest.mark.parametrize("period,pulse", [(1.0, 0.0), (1.0, 1.5), (0.0, 0.0), (-1.0, 0.5), (1.0, -0.1)])
def test_invalid_schedules(period, pulse):
    with pytest.raises(ConfigurationError, match="0 < eps <= T_s|period"):
        MeasurementSchedule(period, pulse)


def test_presets():
    assert arva_min_schedule() == MeasurementSchedule(1.0, 0.07)
    assert continuous_schedule(2.0).continuous


def test_measure_matches_definition_on_many_points():
    rng = np.random.default_rng(0)
    cost = case_study_cost()
    ts = rng.uniform(-50, 50, 20000)
    xs = rng.uniform(-10, 10, 20000)
    for t, x in zip(ts, xs):
        want = eval_cost(cost, [x]) if np.mod(t, 1.0) < 0.17 else 0.0
        assert measure(S, cost, t, [x]) == want
