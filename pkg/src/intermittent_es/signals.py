"""Dither signals, their common period, and the gamma coefficients.

A dither is a bounded, 2*pi-periodic, zero-mean signal ``u`` applied as
``u(k * omega * t)``.  Frequency multipliers ``k`` are kept as exact
fractions so that the common period of a bank is computed without
floating-point drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Sequence, Union

import numpy as np

from .checks import ConfigurationError, Report

TWO_PI = 2.0 * math.pi

COSINE = "cos"
SINE = "sin"
CUSTOM = "custom"
_KIND_CODES = {COSINE: 0, SINE: 1, CUSTOM: 2}

RationalLike = Union[int, Fraction, str, float]


def as_fraction(value: RationalLike) -> Fraction:
    """Exact rational from an int, Fraction, ``"p/q"`` string or decimal float."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ConfigurationError(f"not a rational frequency multiplier: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ConfigurationError(f"frequency multiplier must be finite, got {value!r}")
        # repr gives the shortest decimal that round-trips, e.g. 0.5 -> "0.5"
        return Fraction(repr(value))
    try:
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"cannot parse frequency multiplier {value!r}") from exc


def wrap_phase(phase: float) -> float:
    return phase - TWO_PI * math.floor(phase / TWO_PI)


def _interp_periodic(samples, phase):
    m = samples.shape[0]
    p = phase - TWO_PI * math.floor(phase / TWO_PI)
    pos = p * m / TWO_PI
    i0 = int(math.floor(pos))
    frac = pos - i0
    i0 = i0 % m
    i1 = (i0 + 1) % m
    return samples[i0] * (1.0 - frac) + samples[i1] * frac


def eval_dither_code(code, row, length, phase):
    """Evaluate a dither given its integer kind code; numba-compatible."""
    if code == 0:
        return math.cos(phase)
    if code == 1:
        return math.sin(phase)
    return _interp_periodic(row[:length], phase)


@dataclass(frozen=True)
class DitherSignal:
    """One dither ``u`` with frequency multiplier ``k``.

    ``samples`` is only used for the ``"custom"`` kind: values tabulated
    on a uniform grid over ``[0, 2*pi)`` and linearly interpolated with
    wrap-around.
    """

    kind: str
    k: Fraction = Fraction(1)
    samples: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ConfigurationError(f"unknown dither kind {self.kind!r}")
        k = as_fraction(self.k)
        if k <= 0:
            raise ConfigurationError(f"frequency multiplier must be positive, got {k}")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))

    @classmethod
    def cosine(cls, k: RationalLike = 1) -> "DitherSignal":
        return cls(COSINE, as_fraction(k))

    @classmethod
    def sine(cls, k: RationalLike = 1) -> "DitherSignal":
        return cls(SINE, as_fraction(k))

    @classmethod
    def custom(cls, samples: Sequence[float], k: RationalLike = 1) -> "DitherSignal":
        return cls(CUSTOM, as_fraction(k), tuple(samples))

    @property
    def code(self) -> int:
        return _KIND_CODES[self.kind]

    def __call__(self, phase: float) -> float:
        return dither_value(self, phase)


def dither_value(d: DitherSignal, phase: float) -> float:
    """Return ``u(phase)``; the phase is reduced modulo 2*pi."""
    if d.kind == CUSTOM:
        if not d.samples:
            raise ConfigurationError("custom dither has an empty sample table")
        return float(_interp_periodic(np.asarray(d.samples), float(phase)))
    if d.kind == COSINE:
        return math.cos(wrap_phase(phase))
    return math.sin(wrap_phase(phase))


def dither_values(d: DitherSignal, phases: np.ndarray) -> np.ndarray:
    """Vectorised :func:`dither_value`."""
    phases = np.asarray(phases, dtype=float)
    if d.kind == COSINE:
        return np.cos(phases)
    if d.kind == SINE:
        return np.sin(phases)
    if not d.samples:
        raise ConfigurationError("custom dither has an empty sample table")
    s = np.asarray(d.samples)
    m = s.size
    p = np.mod(phases, TWO_PI)
    pos = p * m / TWO_PI
    i0 = np.floor(pos).astype(np.int64)
    frac = pos - i0
    i0 %= m
    return s[i0] * (1.0 - frac) + s[(i0 + 1) % m] * frac


def lcm_of_inverses(ks: Sequence[RationalLike]) -> Fraction:
    """Exact ``LCM(1/k_1, ..., 1/k_l)`` over the positive rationals.

    For reduced fractions ``n_i/d_i`` the least common multiple is
    ``lcm(n_i) / gcd(d_i)``.
    """
    inverses = []
    for k in ks:
        k = as_fraction(k)
        if k <= 0:
            raise ConfigurationError(f"frequency multiplier must be positive, got {k}")
        inverses.append(1 / k)
    if not inverses:
        raise ConfigurationError("need at least one dither")
    num = reduce(math.lcm, (q.numerator for q in inverses))
    den = reduce(math.gcd, (q.denominator for q in inverses))
    return Fraction(num, den)


@dataclass(frozen=True)
class DitherBank:
    dithers: tuple[DitherSignal, ...]

    def __post_init__(self):
        dithers = tuple(self.dithers)
        if len(dithers) < 2:
            raise ConfigurationError("a dither bank needs at least two dithers")
        object.__setattr__(self, "dithers", dithers)

    def __len__(self) -> int:
        return len(self.dithers)

    def __iter__(self):
        return iter(self.dithers)

    @property
    def ks(self) -> tuple[Fraction, ...]:
        return tuple(d.k for d in self.dithers)

    @property
    def common_period_C(self) -> float:
        return common_period(self)

    def period_multiple(self) -> Fraction:
        """``LCM(1/k_i)``, i.e. ``C / (2*pi)`` as an exact rational."""
        return lcm_of_inverses(self.ks)

    def values(self, phase: float) -> np.ndarray:
        """``[u_i(k_i * phase)]`` for a common (unscaled) phase."""
        return np.array([dither_value(d, float(d.k) * phase) for d in self.dithers])

    def kernel_arrays(self):
        """Integer kind codes, float multipliers and padded sample tables."""
        codes = np.array([d.code for d in self.dithers], dtype=np.int64)
        ks = np.array([float(d.k) for d in self.dithers])
        lengths = np.array([max(len(d.samples), 1) for d in self.dithers], dtype=np.int64)
        tables = np.zeros((len(self.dithers), int(lengths.max())))
        for i, d in enumerate(self.dithers):
            if d.kind == CUSTOM:
                if not d.samples:
                    raise ConfigurationError("custom dither has an empty sample table")
                tables[i, : len(d.samples)] = d.samples
        return codes, ks, tables, lengths


def cos_sin_bank(n_axes: int = 1) -> DitherBank:
    """The case-study bank ``u_1 = cos, u_2 = sin`` with ``k = 1``.

    For ``n_axes > 1`` axis ``m`` (1-based) gets its own cos/sin pair at
    ``k = m`` so that cross-axis gamma terms vanish.
    """
    dithers = []
    for m in range(1, n_axes + 1):
        dithers += [DitherSignal.cosine(m), DitherSignal.sine(m)]
    return DitherBank(tuple(dithers))


def common_period(bank: DitherBank) -> float:
    """``C = 2*pi*LCM(1/k_1, ..., 1/k_l)`` in radians."""
    return TWO_PI * float(bank.period_multiple())


@dataclass(frozen=True)
class GammaMatrix:
    entries: np.ndarray

    def __getitem__(self, idx):
        return self.entries[idx]

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def _nested_trapezoid(bank: DitherBank, omega: float, n_points: int) -> np.ndarray:
    C = common_period(bank)
    T = C / omega
    theta = np.linspace(0.0, T, n_points + 1)
    h = T / n_points
    u = np.array([dither_values(d, float(d.k) * omega * theta) for d in bank.dithers])
    inner = np.zeros_like(u)
    inner[:, 1:] = np.cumsum(0.5 * h * (u[:, 1:] + u[:, :-1]), axis=1)
    # outer[i, j] = int_0^T u_j(theta) * inner_i(theta) dtheta
    prod = u[None, :, :] * inner[:, None, :]
    outer = h * (prod.sum(axis=2) - 0.5 * (prod[:, :, 0] + prod[:, :, -1]))
    return (omega / T) * outer


def gamma_matrix(bank: DitherBank, omega: float, quad_points_per_period: int = 512) -> GammaMatrix:
    """Gamma coefficients by nested composite-trapezoid quadrature.

    ``gamma[i, j] = (omega/T) int_0^T int_0^theta u_j(k_j w theta) u_i(k_i w tau) dtau dtheta``
    with ``T = C/omega``.  The grid resolves the fastest dither with
    ``quad_points_per_period`` points; one Richardson step on the grid
    halving removes the leading ``h**2`` term of the cumulative inner rule.
    """
    if not omega > 0:
        raise ConfigurationError(f"omega must be positive, got {omega}")
    if quad_points_per_period < 64:
        raise ConfigurationError("quad_points_per_period must be >= 64")
    L = bank.period_multiple()
    # periods of the fastest dither contained in C; k_i * L is an integer
    cycles = max(int(d.k * L) for d in bank.dithers)
    n = quad_points_per_period * cycles
    coarse = _nested_trapezoid(bank, omega, n)
    fine = _nested_trapezoid(bank, omega, 2 * n)
    return GammaMatrix((4.0 * fine - coarse) / 3.0)


def validate_dither(d: DitherSignal, n_points: int = 4096) -> Report:
    """Check the three dither requirements: bound, periodicity, zero mean."""
    report = Report(f"dither {d.kind} (k={d.k})")
    if d.kind == CUSTOM and not d.samples:
        report.add("nonempty", False, "empty sample table")
        return report
    if d.kind == CUSTOM:
        grid = np.linspace(0.0, TWO_PI, 16 * len(d.samples) + 1)
    else:
        grid = np.linspace(0.0, TWO_PI, n_points + 1)
    vals = dither_values(d, grid)
    peak = float(np.max(np.abs(vals)))
    report.add("bounded", peak <= 1.0 + 1e-12, f"max|u| = {peak:.6g}")

    shifted = dither_values(d, grid + TWO_PI)
    if d.kind == CUSTOM:
        # the table is wrapped, so compare the value reached at 2*pi with u(0)
        gap = abs(float(vals[-1]) - float(vals[0]))
    else:
        gap = float(np.max(np.abs(shifted - vals)))
    report.add("periodic", gap <= 1e-9, f"max|u(t+2pi)-u(t)| = {gap:.3g}")

    h = grid[1] - grid[0]
    integral = float(h * (vals.sum() - 0.5 * (vals[0] + vals[-1])))
    tol = 1e-6 if d.kind == CUSTOM else 1e-9
    report.add("zero-mean", abs(integral) <= tol, f"|int u| = {abs(integral):.3g} (tol {tol:g})")
    return report
