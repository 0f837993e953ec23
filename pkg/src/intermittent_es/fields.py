"""Vector-field families ``f_i(y)`` driven by the measured cost ``y``.

Two built-in families are provided for a scalar state, both with two
fields:

* ``affine``: ``f_1(y) = 2*rho*y``, ``f_2(y) = 1``
* ``trig``:   ``f_1(y) = sqrt(2*rho)*cos(y)``, ``f_2(y) = -sqrt(2*rho)*sin(y)``

For ``n > 1`` the pair is replicated per axis.  Axis ``m`` (1-based) is
paired with dithers at ``k = m`` (see :func:`signals.cos_sin_bank`),
whose bracket coefficient is ``1/(2m)``; its fields are scaled by
``sqrt(m)`` so every axis contributes ``-rho`` to the bracket sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .checks import ConfigurationError, Report
from .signals import GammaMatrix

AFFINE = "affine"
TRIG = "trig"
CUSTOM = "custom"
_CODES = {AFFINE: 0, TRIG: 1}


def builtin_fields_into(code, rho, y, out):
    """Fill ``out[l, n]`` with built-in field values; numba-compatible."""
    n = out.shape[1]
    out[:, :] = 0.0
    for m in range(n):
        scale = math.sqrt(m + 1.0)
        if code == 0:
            out[2 * m, m] = scale * 2.0 * rho * y
            out[2 * m + 1, m] = scale
        else:
            amp = scale * math.sqrt(2.0 * rho)
            out[2 * m, m] = amp * math.cos(y)
            out[2 * m + 1, m] = -amp * math.sin(y)


@dataclass(frozen=True, eq=False)
class FieldFamily:
    kind: str
    rho: float = 0.25
    n: int = 1
    maps: tuple[Callable[[float], np.ndarray], ...] = ()
    derivatives: Optional[tuple[Callable[[float], np.ndarray], ...]] = None
    name: str = field(default="")

    def __post_init__(self):
        if self.kind not in (AFFINE, TRIG, CUSTOM):
            raise ConfigurationError(f"unknown field family {self.kind!r}")
        if self.kind != CUSTOM and not self.rho > 0:
            raise ConfigurationError(f"rho must be positive, got {self.rho}")
        if self.n < 1:
            raise ConfigurationError("output dimension must be >= 1")
        if self.kind == CUSTOM:
            if len(self.maps) < 2:
                raise ConfigurationError("a custom family needs at least two maps")
            if self.derivatives is not None and len(self.derivatives) != len(self.maps):
                raise ConfigurationError("one derivative per map is required")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    @classmethod
    def affine(cls, rho: float, n: int = 1) -> "FieldFamily":
        return cls(AFFINE, float(rho), n)

    @classmethod
    def trig(cls, rho: float, n: int = 1) -> "FieldFamily":
        return cls(TRIG, float(rho), n)

    @classmethod
    def custom(cls, maps: Sequence[Callable], derivatives: Optional[Sequence[Callable]] = None,
               n: int = 1, rho: float = 0.0, name: str = "custom") -> "FieldFamily":
        return cls(CUSTOM, float(rho), n, tuple(maps),
                   None if derivatives is None else tuple(derivatives), name)

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.maps) if self.kind == CUSTOM else 2 * self.n

    @property
    def code(self) -> int:
        return _CODES[self.kind]

    def values(self, y: float) -> np.ndarray:
        """All fields at ``y`` as an ``(l, n)`` array."""
        if self.kind == CUSTOM:
            return np.array([np.atleast_1d(np.asarray(f(y), dtype=float)) for f in self.maps])
        out = np.empty((self.l, self.n))
        builtin_fields_into(self.code, self.rho, float(y), out)
        return out

    def jacobians(self, y: float) -> np.ndarray:
        """``d f_i / d y`` for every field, shape ``(l, n)``."""
        if self.kind == CUSTOM:
            if self.derivatives is not None:
                return np.array([np.atleast_1d(np.asarray(d(y), dtype=float)) for d in self.derivatives])
            step = 1e-6
            return (self.values(y + step) - self.values(y - step)) / (2.0 * step)
        out = np.zeros((self.l, self.n))
        for m in range(self.n):
            scale = math.sqrt(m + 1.0)
            if self.kind == AFFINE:
                out[2 * m, m] = scale * 2.0 * self.rho
            else:
                amp = scale * math.sqrt(2.0 * self.rho)
                out[2 * m, m] = -amp * math.sin(y)
                out[2 * m + 1, m] = -amp * math.cos(y)
        return out


def field_value(fam: FieldFamily, i: int, y: float) -> np.ndarray:
    """``f_i(y)`` with a 1-based field index."""
    if not 1 <= i <= fam.l:
        raise IndexError(f"field index {i} outside 1..{fam.l}")
    return fam.values(y)[i - 1]


def bracket_sum(fam: FieldFamily, gamma: GammaMatrix, y: float) -> np.ndarray:
    """``sum_{i<j} (Df_j f_i^T - Df_i f_j^T) gamma_ij`` at ``y``."""
    F = fam.values(y)
    D = fam.jacobians(y)
    total = np.zeros((fam.n, fam.n))
    for i in range(fam.l):
        for j in range(i + 1, fam.l):
            total += (np.outer(D[j], F[i]) - np.outer(D[i], F[j])) * gamma[i, j]
    return total


def assumption4_residual(fam: FieldFamily, gamma: GammaMatrix, rho: float,
                         y_samples: Sequence[float]) -> float:
    """Largest Frobenius norm of ``bracket_sum + rho*I`` over the samples.

    Zero means the averaged system is exactly ``xdot = -rho grad h``.
    """
    if gamma.size != fam.l:
        raise ConfigurationError(f"gamma is {gamma.size}x{gamma.size} but the family has {fam.l} fields")
    eye = np.eye(fam.n)
    worst = 0.0
    for y in y_samples:
        worst = max(worst, float(np.linalg.norm(bracket_sum(fam, gamma, float(y)) + rho * eye)))
    return worst


def residual_report(fam: FieldFamily, gamma: GammaMatrix, rho: float,
                    y_samples: Sequence[float], tol: float = 1e-8) -> Report:
    ys = np.asarray(list(y_samples), dtype=float)
    res = assumption4_residual(fam, gamma, rho, ys)
    report = Report(f"bracket-sum residual for {fam.name} (rho={rho:g})")
    report.add("residual", res < tol,
               f"max ||R(y)||_F = {res:.3g} over {ys.size} samples in [{ys.min():g}, {ys.max():g}]")
    report.data["y_samples"] = ys
    return report


PRESETS = {AFFINE: FieldFamily.affine, TRIG: FieldFamily.trig}
