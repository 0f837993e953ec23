"""Event-aligned fixed-step simulation, run metrics and verifiers."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernel
from . import schemes as sch
from .checks import ConfigurationError
from .costs import CostField, QUADRATIC, eval_cost, grad
from .fields import CUSTOM as CUSTOM_FIELDS
from .measurement import MeasurementSchedule, continuous_schedule

RK4 = "rk4"
EULER = "euler"

PHASE_CODES = {sch.DITHERING: 0, sch.HOLDING: 1, sch.WAITING: 2, "none": 3}
PHASE_NAMES = {v: k for k, v in PHASE_CODES.items()}


@dataclass(frozen=True)
class EngineConfig:
    t0: float = 0.0
    t_end: float = 25.0
    steps_per_dither_period: int = 200
    method: str = RK4
    sample_stride: int = 1
    dt: Optional[float] = None
    blowup: Optional[float] = None

    def __post_init__(self):
        if not self.t_end > self.t0:
            raise ConfigurationError(f"t_end ({self.t_end}) must exceed t0 ({self.t0})")
        if self.steps_per_dither_period < 32:
            raise ConfigurationError("steps_per_dither_period must be >= 32")
        if self.method not in (RK4, EULER):
            raise ConfigurationError(f"unknown integration method {self.method!r}")
        if self.sample_stride < 1:
            raise ConfigurationError("sample_stride must be >= 1")
        if self.dt is not None and not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if self.blowup is not None and not self.blowup > 0:
            raise ConfigurationError("blowup radius must be positive")

    def replace(self, **changes) -> "EngineConfig":
        return dataclasses.replace(self, **changes)

    def step_size(self, scheme: sch.SchemeConfig, sched: MeasurementSchedule) -> float:
        if self.dt is not None:
            return self.dt
        return min(scheme.T / self.steps_per_dither_period, sched.period / 100.0)


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    h_m: np.ndarray
    tau: np.ndarray
    alpha: np.ndarray
    phase: np.ndarray
    g_held: np.ndarray
    meta: dict = field(default_factory=dict)
    estimates: list = field(default_factory=list)
    events: list = field(default_factory=list)
    aborted: bool = False
    abort_time: Optional[float] = None

    def __len__(self) -> int:
        return self.t.size

    @property
    def n(self) -> int:
        return self.x.shape[1]

    def phase_names(self) -> list[str]:
        return [PHASE_NAMES[int(p)] for p in self.phase]

    def window(self, t_lo: float, t_hi: float) -> np.ndarray:
        return (self.t >= t_lo) & (self.t <= t_hi)


@dataclass(frozen=True)
class RunMetrics:
    steady_state_error: float
    convergence_time: Optional[float]
    diverged: bool
    max_excursion: float

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


class _Recorder:
    def __init__(self, n: int):
        self.n = n
        self.chunks: list[tuple] = []

    def point(self, t, x, y, tau, alpha, phase, g):
        self.chunks.append((np.array([t]), np.atleast_2d(x).copy(), np.array([y]), np.array([tau]),
                            np.array([alpha]), np.array([phase]), np.atleast_2d(g).copy()))

    def block(self, t, x, y, tau, alpha, phase, g):
        k = t.size
        if k == 0:
            return
        self.chunks.append((t, x, y, tau, np.full(k, alpha), np.full(k, phase, dtype=np.int64),
                            np.repeat(np.atleast_2d(g), k, axis=0)))

    def build(self) -> tuple:
        cols = list(zip(*self.chunks))
        return tuple(np.concatenate(c) for c in cols)


def _kernel_for(cost: CostField, fields):
    """Pick the compiled kernel when everything is built in."""
    if cost.kind == QUADRATIC and fields.kind != CUSTOM_FIELDS:
        return (_kernel.compiled_kernel(), cost.kernel_params(),
                np.array([float(fields.code), fields.rho]))

    def cost_h(z, n, _p):
        return eval_cost(cost, z[:n])

    def cost_grad(z, n, _p, out):
        out[:] = grad(cost, z[:n])

    def fill(_p, y, out):
        out[:, :] = fields.values(y)

    return _kernel.python_kernel(cost_h, cost_grad, fill), np.zeros(1), np.zeros(1)


def _schedule_edges(sched: MeasurementSchedule, t0: float, t_end: float) -> list[float]:
    if sched.continuous:
        # h_m never switches; there is nothing to align to
        return []
    return [e.time for e in sched.edges(t0, t_end) if t0 < e.time < t_end]


def _left_limit_measured(sched, cost, t0, x0, transmitting) -> float:
    """``h_m`` just before ``t0``; a pulse starting exactly at ``t0`` counts as a switch."""
    if not transmitting:
        return 0.0
    if not sched.continuous and sched.phase(t0) == 0.0:
        return 0.0
    return eval_cost(cost, x0)


def simulate(scheme: sch.SchemeConfig, sched: MeasurementSchedule, cost: CostField,
             eng: EngineConfig, x0, breakpoints: Sequence[float] = ()) -> Trajectory:
    """Integrate one run of ``scheme`` on ``xdot = v``.

    Steps are shortened so that measurement edges, dither-period
    boundaries, hold switches and any extra ``breakpoints`` land exactly
    on step boundaries, and every such instant is recorded.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = x0.size
    if n != cost.n:
        raise ConfigurationError(f"x0 has dimension {n}, cost has {cost.n}")
    if scheme.fields.n != n:
        raise ConfigurationError(f"field family outputs dimension {scheme.fields.n}, state has {n}")
    if scheme.kind == sch.CLASSICAL_CONTINUOUS:
        sched = continuous_schedule(sched.period)

    kernel, cparams, fparams = _kernel_for(cost, scheme.fields)
    codes, ks, tables, lengths = scheme.dithers.kernel_arrays()
    l = len(scheme.dithers)
    dt_nom = eng.step_size(scheme, sched)
    x_star = np.asarray(cost.minimizer, dtype=float)
    blowup = eng.blowup if eng.blowup is not None else 1e3 * (1.0 + float(np.linalg.norm(x0 - x_star)))
    sqrt_omega = math.sqrt(scheme.omega)
    euler = eng.method == EULER
    freeze = scheme.kind == sch.FREEZE
    phased = scheme.kind in sch.PHASED
    T = scheme.T
    tol = 1e-9 * max(1.0, abs(eng.t0), abs(eng.t_end))

    boundaries = sorted(set(_schedule_edges(sched, eng.t0, eng.t_end))
                        | {float(b) for b in breakpoints if eng.t0 < b < eng.t_end})
    sched_edges = _schedule_edges(sched, eng.t0, eng.t_end) + [eng.t_end]

    state = sch.initial_state(scheme, x0)
    if not freeze:
        state.tau = eng.t0
    rec = _Recorder(n)
    estimates: list[sch.GradientEstimate] = []
    events: list[tuple[float, str]] = []
    pending: list[tuple[float, bool]] = []  # (time, is_deadline) of dither-period boundaries
    z = np.concatenate([x0, np.zeros(n)])
    t = eng.t0
    counter = 0
    aborted = False
    abort_time = None
    bi = 0
    ei = 0
    prev_measured = None

    while True:
        while ei < len(sched_edges) and sched_edges[ei] <= t + tol:
            ei += 1
        next_sched = sched_edges[ei] if ei < len(sched_edges) else eng.t_end
        transmitting = sched.phase(0.5 * (t + next_sched)) < sched.pulse
        x = z[:n]
        measured = eval_cost(cost, x) if transmitting else 0.0
        if prev_measured is None:
            prev_measured = _left_limit_measured(sched, cost, t, x, transmitting)

        if phased and prev_measured == 0.0 and measured != 0.0:
            state.x = x.copy()
            sch.on_rising_edge(state, scheme)
            z[n:] = 0.0
            pending = [(t + j * T, j == scheme.hold_periods) for j in range(1, scheme.hold_periods + 1)]
            events.append((t, "dithering"))
        while pending and pending[0][0] <= t + tol:
            _, is_deadline = pending.pop(0)
            state.x = x.copy()
            state.accumulator = z[n:].copy()
            state.dither_elapsed = state.periods_done * T + T
            sch.close_dither_period(state)
            z[n:] = 0.0
            if is_deadline:
                est = sch.on_dither_deadline(state, scheme, t)
                estimates.append(est)
                events.append((t, "holding"))

        # segment parameters
        mode = _kernel.MODE_DITHER
        amp = 1.0
        acc_gain = 0.0
        accumulate = False
        hold_v = np.zeros(n)
        phase_offset = 0.0
        frozen = False
        phase = "none" if scheme.kind == sch.REFERENCE else sch.DITHERING
        if scheme.kind == sch.REFERENCE:
            mode = _kernel.MODE_REFERENCE
        elif freeze:
            if measured == 0.0:
                mode = _kernel.MODE_IDLE
                frozen = True
            phase_offset = state.tau - t
        elif phased:
            phase = state.phase
            if state.phase == sch.WAITING:
                mode = _kernel.MODE_IDLE
            elif state.phase == sch.HOLDING:
                mode = _kernel.MODE_HOLD
                hold_v = scheme.rho2 * state.g_held
            else:
                accumulate = True
                acc_gain = 1.0 / (T * (state.alpha if scheme.kind == sch.ADAPTIVE_AMPLITUDE else 1.0))
                if scheme.kind == sch.ADAPTIVE_AMPLITUDE:
                    amp = state.alpha

        alpha_now = state.alpha
        g_now = state.g_held.copy()
        tau_now = state.tau
        rec.point(t, x, measured, tau_now, alpha_now, PHASE_CODES[phase], g_now)
        if t >= eng.t_end - tol:
            break

        while bi < len(boundaries) and boundaries[bi] <= t + tol:
            bi += 1
        t_next = next_sched
        if bi < len(boundaries):
            t_next = min(t_next, boundaries[bi])
        if pending and pending[0][0] < t_next - tol:
            t_next = pending[0][0]
        nsteps = max(1, int(math.ceil((t_next - t) / dt_nom - 1e-9)))

        z, rt, rz, ry, counter, aborted = kernel(
            mode, z, t, t_next, nsteps, euler, n, transmitting, freeze, accumulate,
            sqrt_omega, scheme.omega, phase_offset, amp, acc_gain, hold_v, scheme.rho,
            codes, ks, tables, lengths, cparams, fparams, l,
            eng.sample_stride, counter, x_star, blowup)
        if not freeze:
            rtau = rt.copy()
        elif frozen:
            rtau = np.full(rt.size, tau_now)
        else:
            rtau = rt + phase_offset
        rec.block(rt, rz[:, :n], ry, rtau, alpha_now, PHASE_CODES[phase], g_now)
        if aborted:
            abort_time = float(rt[-1])
            break
        if freeze and not frozen:
            state.tau = t_next + phase_offset
        elif not freeze:
            state.tau = t_next
        prev_measured = eval_cost(cost, z[:n]) if transmitting else 0.0
        t = t_next

    cols = rec.build()
    traj = Trajectory(*cols, meta={
        "scheme": scheme.kind, "omega": scheme.omega, "rho": scheme.rho,
        "fields": scheme.fields.name, "period": sched.period, "pulse": sched.pulse,
        "t0": eng.t0, "t_end": eng.t_end, "dt": dt_nom, "method": eng.method,
        "sample_stride": eng.sample_stride, "blowup": blowup, "x0": x0.tolist(),
        "x_star": x_star.tolist(),
    }, estimates=estimates, events=events, aborted=aborted, abort_time=abort_time)
    return traj


def metrics(traj: Trajectory, x_star, band: float, blowup: Optional[float] = None) -> RunMetrics:
    """Steady-state error, entry-and-stay convergence time and divergence flag."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    if not band > 0:
        raise ValueError("band must be positive")
    if blowup is None:
        blowup = traj.meta.get("blowup", math.inf)
    if not blowup > band:
        raise ValueError("blowup radius must exceed the band")
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    err = np.linalg.norm(traj.x - x_star, axis=1)
    t0 = traj.t[0]
    t_last = traj.t[-1]
    tail = traj.t >= t0 + 0.8 * (t_last - t0)
    diverged = bool(traj.aborted or not np.all(np.isfinite(err)) or np.nanmax(err) > blowup)
    convergence_time = None
    if not diverged and err[-1] <= band:
        outside = np.flatnonzero(err > band)
        convergence_time = float(t0 if outside.size == 0 else traj.t[outside[-1] + 1])
    return RunMetrics(
        steady_state_error=float(np.max(err[tail])),
        convergence_time=convergence_time,
        diverged=diverged,
        max_excursion=float(np.nanmax(err)) if np.any(np.isfinite(err)) else math.inf,
    )


def _pulse_start_taus(traj: Trajectory, sched: MeasurementSchedule, eng: EngineConfig) -> list[float]:
    if sched.continuous:
        return []
    starts = [e.time for e in sched.edges(eng.t0, eng.t_end) if e.kind == "rising" and eng.t0 < e.time < eng.t_end]
    idx = np.searchsorted(traj.t, starts)
    return [float(traj.tau[i]) for i, s in zip(idx, starts) if i < traj.t.size and traj.t[i] == s]


def verify_path_equivalence(freeze_cfg: sch.SchemeConfig, cost: CostField, sched: MeasurementSchedule,
                            eng: EngineConfig, x0) -> float:
    """Sup distance between the frozen path and the continuous path at ``s = tau(t)``.

    The continuous run is stepped on the same grid in ``s`` as the frozen
    run uses during pulses, so both share one discretisation.
    """
    if freeze_cfg.kind != sch.FREEZE:
        raise ConfigurationError("path equivalence compares a freeze scheme")
    eng1 = eng.replace(sample_stride=1)
    frozen = simulate(freeze_cfg, sched, cost, eng1, x0)
    if np.any(np.diff(frozen.tau) < 0):
        raise RuntimeError("auxiliary dither clock decreased")
    s0 = float(frozen.tau[0])
    s_end = float(frozen.tau[-1])
    if s_end <= s0:
        return 0.0
    cont_cfg = freeze_cfg.replace(kind=sch.CLASSICAL_CONTINUOUS)
    dt = eng.step_size(freeze_cfg, sched)
    cont_eng = eng1.replace(t0=s0, t_end=s_end, dt=dt)
    cont = simulate(cont_cfg, sched, cost, cont_eng, x0, breakpoints=_pulse_start_taus(frozen, sched, eng))
    dev = 0.0
    for m in range(frozen.n):
        xc = np.interp(frozen.tau, cont.t, cont.x[:, m])
        dev = max(dev, float(np.max(np.abs(frozen.x[:, m] - xc))))
    return dev


def verify_gradient_scaling(base: sch.SchemeConfig, cost: CostField, sched: MeasurementSchedule,
                            eng: EngineConfig, x0, omegas: Sequence[float]) -> list[tuple[float, float]]:
    """``(omega, ||g + rho grad h(x)||)`` at the first hold switch for each omega."""
    rows = []
    for omega in omegas:
        cfg = base.replace(omega=float(omega))
        run_eng = eng.replace(t_end=eng.t0 + 2.0 * sched.period, sample_stride=10**9)
        traj = simulate(cfg, sched, cost, run_eng, x0)
        if not traj.estimates:
            raise RuntimeError(f"no hold switch happened for omega={omega:g}")
        est = traj.estimates[0]
        err = float(np.linalg.norm(est.g + cfg.rho * grad(cost, est.x)))
        rows.append((float(omega), err))
    return rows
