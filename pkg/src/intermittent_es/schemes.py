"""Extremum-seeking control laws for the integrator plant ``xdot = v``.

Every law here receives the measured value ``h_m`` only.  The pulse
period and width are never passed in; phase changes of the
gradient-hold and adaptive-amplitude laws are driven by the engine
calling :func:`on_rising_edge` when the measured value switches from
zero to nonzero, and :func:`on_dither_deadline` a fixed number of
dither periods later.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .checks import ConfigurationError
from .costs import CostField, grad
from .fields import FieldFamily
from .signals import DitherBank, common_period, dither_value

CLASSICAL_CONTINUOUS = "classical-continuous"
CLASSICAL_INTERMITTENT = "classical-intermittent"
FREEZE = "freeze"
GRADIENT_HOLD = "gradient-hold"
ADAPTIVE_AMPLITUDE = "adaptive-amplitude"
REFERENCE = "reference"

KINDS = (CLASSICAL_CONTINUOUS, CLASSICAL_INTERMITTENT, FREEZE, GRADIENT_HOLD,
         ADAPTIVE_AMPLITUDE, REFERENCE)
PHASED = (GRADIENT_HOLD, ADAPTIVE_AMPLITUDE)

DITHERING = "dithering"
HOLDING = "holding"
WAITING = "waiting"
PHASES = (DITHERING, HOLDING, WAITING)

# slack when counting whole dither periods in eps' so that eps' == T survives rounding
_FLOOR_SLACK = 1e-9


@dataclass(frozen=True)
class SchemeConfig:
    kind: str
    omega: float
    rho: float
    fields: FieldFamily
    dithers: DitherBank
    rho2: float = 0.0
    eps_prime: float = 0.0
    a: float = 1e-5
    b: float = 0.1
    tau0: float = 0.0
    g_init_norm: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown scheme kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ConfigurationError(f"omega must be positive, got {self.omega}")
        if not self.rho > 0:
            raise ConfigurationError(f"rho must be positive, got {self.rho}")
        if self.fields.kind != "custom" and not math.isclose(self.fields.rho, self.rho, rel_tol=1e-12):
            raise ConfigurationError(f"field family rho={self.fields.rho} differs from scheme rho={self.rho}")
        if self.fields.l != len(self.dithers):
            raise ConfigurationError(
                f"{self.fields.l} vector fields but {len(self.dithers)} dithers"
            )
        if self.kind in PHASED:
            if not self.rho2 > 0:
                raise ConfigurationError(f"rho2 must be positive, got {self.rho2}")
            if not self.eps_prime > 0:
                raise ConfigurationError("eps_prime (lower estimate of the pulse width) must be positive")
            if self.hold_periods < 1:
                raise ConfigurationError(
                    f"omega={self.omega:g} leaves no complete dither period (T={self.T:g}s) "
                    f"inside eps'={self.eps_prime:g}s; need omega >= C/eps' = {self.C / self.eps_prime:g}"
                )
        if self.kind == ADAPTIVE_AMPLITUDE:
            if not (0 < self.a < self.b):
                raise ConfigurationError(f"adaptive amplitude needs 0 < a < b, got a={self.a}, b={self.b}")
            if self.g_init_norm is not None and self.g_init_norm < 0:
                raise ConfigurationError("g_init_norm must be nonnegative")

    @property
    def C(self) -> float:
        return common_period(self.dithers)

    @property
    def T(self) -> float:
        """Common dither period in seconds."""
        return self.C / self.omega

    @property
    def hold_periods(self) -> int:
        """Number of complete dither periods worked on per pulse."""
        if self.eps_prime <= 0:
            return 0
        return int(math.floor(self.eps_prime / self.T + _FLOOR_SLACK))

    @property
    def dither_window(self) -> float:
        return self.hold_periods * self.T

    @property
    def initial_g_norm(self) -> float:
        return self.b if self.g_init_norm is None else self.g_init_norm

    def replace(self, **changes) -> "SchemeConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class GradientEstimate:
    g: np.ndarray
    at_time: float
    window_T: float
    x: Optional[np.ndarray] = None


@dataclass
class SchemeState:
    x: np.ndarray
    tau: float = 0.0
    phase: str = DITHERING
    dither_elapsed: float = 0.0
    periods_done: int = 0
    accumulator: np.ndarray = None
    accumulator_prev: np.ndarray = None
    g_held: np.ndarray = None
    g_prev_norm: float = 0.0
    alpha: float = 1.0
    pulses_seen: int = 0

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float)).copy()
        n = self.x.size
        if self.accumulator is None:
            self.accumulator = np.zeros(n)
        if self.accumulator_prev is None:
            self.accumulator_prev = np.zeros(n)
        if self.g_held is None:
            self.g_held = np.zeros(n)


def initial_state(cfg: SchemeConfig, x0) -> SchemeState:
    state = SchemeState(x0, tau=cfg.tau0)
    if cfg.kind in PHASED:
        # start is deferred until a zero -> nonzero switch of h_m
        state.phase = WAITING
    return state


def dither_sum(cfg: SchemeConfig, phase_time: float, measured: float) -> np.ndarray:
    """``sum_i f_i(measured) u_i(k_i * omega * phase_time)``."""
    F = cfg.fields.values(measured)
    total = np.zeros(F.shape[1])
    for i, d in enumerate(cfg.dithers):
        total += F[i] * dither_value(d, float(d.k) * cfg.omega * phase_time)
    return total


def rhs_classical(cfg: SchemeConfig, t: float, x, measured: float) -> np.ndarray:
    """Dithered law fed with whatever was measured (``h(x)`` or ``0``)."""
    return math.sqrt(cfg.omega) * dither_sum(cfg, t, measured)


def rhs_freeze(cfg: SchemeConfig, state: SchemeState, measured: float):
    """Returns ``(xdot, taudot)``; both vanish while nothing is measured."""
    if measured == 0.0:
        return np.zeros_like(state.x), 0.0
    return math.sqrt(cfg.omega) * dither_sum(cfg, state.tau, measured), 1.0


def alpha(g_prev_norm: float, a: float, b: float) -> float:
    if g_prev_norm < 0:
        raise ValueError(f"norm must be nonnegative, got {g_prev_norm}")
    return math.sqrt((g_prev_norm + a) / (g_prev_norm + b))


def accumulation_gain(cfg: SchemeConfig, state: SchemeState) -> float:
    """Factor multiplying ``sum_i f_i u_i`` in the estimate integrand.

    ``sqrt(omega)/T``, times ``1/alpha`` for the adaptive law so that the
    estimate stays calibrated to ``-rho grad h`` while the dither
    amplitude shrinks.
    """
    gain = math.sqrt(cfg.omega) / cfg.T
    if cfg.kind == ADAPTIVE_AMPLITUDE:
        gain /= state.alpha
    return gain


def close_dither_period(state: SchemeState) -> None:
    state.accumulator_prev = state.accumulator.copy()
    state.accumulator = np.zeros_like(state.accumulator)
    state.periods_done += 1


def accumulate_g(state: SchemeState, cfg: SchemeConfig, t: float, measured: float, dt: float) -> np.ndarray:
    """Left-point update of the running estimate integral.

    Rolls the accumulator over when ``dither_elapsed`` crosses the next
    whole dither period; the period count is an integer, not a float sum.
    """
    if state.phase != DITHERING:
        raise ValueError("the estimate is only accumulated while dithering")
    if dt == 0:
        return state.accumulator
    state.accumulator = state.accumulator + dt * accumulation_gain(cfg, state) * dither_sum(cfg, t, measured)
    state.dither_elapsed += dt
    if state.dither_elapsed >= (state.periods_done + 1) * cfg.T * (1.0 - 1e-12):
        close_dither_period(state)
    return state.accumulator


def finalize_g(state: SchemeState, cfg: SchemeConfig, at_time: float = math.nan) -> GradientEstimate:
    """The estimate over the last complete dither period of this pulse."""
    if state.periods_done < 1:
        raise ValueError(
            f"no complete dither period yet (elapsed {state.dither_elapsed:g}s < T={cfg.T:g}s)"
        )
    return GradientEstimate(state.accumulator_prev.copy(), at_time, cfg.T, state.x.copy())


def rhs_gradient_hold(cfg: SchemeConfig, state: SchemeState, t: float, measured: float) -> np.ndarray:
    if state.phase == HOLDING:
        return cfg.rho2 * state.g_held
    if state.phase == WAITING:
        return np.zeros_like(state.x)
    return rhs_classical(cfg, t, state.x, measured)


def rhs_adaptive(cfg: SchemeConfig, state: SchemeState, t: float, measured: float) -> np.ndarray:
    if state.phase == DITHERING:
        return state.alpha * rhs_classical(cfg, t, state.x, measured)
    return rhs_gradient_hold(cfg, state, t, measured)


def rhs_reference(cfg: SchemeConfig, cost: CostField, x) -> np.ndarray:
    """The averaged law ``-rho grad h(x)``."""
    return -cfg.rho * grad(cost, x)


def on_rising_edge(state: SchemeState, cfg: SchemeConfig) -> SchemeState:
    if cfg.kind not in PHASED:
        return state
    if cfg.kind == ADAPTIVE_AMPLITUDE:
        if state.pulses_seen == 0:
            state.g_prev_norm = cfg.initial_g_norm
        else:
            state.g_prev_norm = float(np.linalg.norm(state.g_held))
        state.alpha = alpha(state.g_prev_norm, cfg.a, cfg.b)
    state.phase = DITHERING
    state.dither_elapsed = 0.0
    state.periods_done = 0
    state.accumulator = np.zeros_like(state.x)
    state.accumulator_prev = np.zeros_like(state.x)
    state.pulses_seen += 1
    return state


def on_dither_deadline(state: SchemeState, cfg: SchemeConfig, at_time: float = math.nan) -> GradientEstimate:
    if cfg.kind not in PHASED:
        raise ValueError(f"{cfg.kind} has no hold phase")
    estimate = finalize_g(state, cfg, at_time)
    state.g_held = estimate.g.copy()
    state.phase = HOLDING
    return estimate
