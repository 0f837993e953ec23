"""Cost functions ``h(x)`` with gradients and a monotonicity validator."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .checks import ConfigurationError, Report

QUADRATIC = "quadratic"
CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class CostField:
    """A C^2 cost with a known minimizer.

    Build with :meth:`quadratic` (``(x-x*)^T Q (x-x*) + c``) or
    :meth:`custom` (arbitrary callable, optional analytic gradient).
    """

    kind: str
    minimizer: np.ndarray
    curvature: Optional[np.ndarray] = None
    offset: float = 0.0
    evaluator: Optional[Callable[[np.ndarray], float]] = None
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = field(default="")

    @property
    def n(self) -> int:
        return self.minimizer.shape[0]

    @classmethod
    def quadratic(cls, minimizer, curvature=None, offset: float = 0.0, name: str = "") -> "CostField":
        x_star = np.atleast_1d(np.asarray(minimizer, dtype=float)).copy()
        n = x_star.shape[0]
        Q = np.eye(n) if curvature is None else np.atleast_2d(np.asarray(curvature, dtype=float)).copy()
        if Q.shape != (n, n):
            raise ConfigurationError(f"curvature must be {n}x{n}, got {Q.shape}")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12):
            raise ConfigurationError("curvature matrix must be symmetric")
        if np.linalg.eigvalsh(Q).min() <= 0:
            raise ConfigurationError("curvature matrix must be positive definite")
        if offset <= 0:
            # the freeze scheme reads h_m == 0 as "no measurement"
            warnings.warn(
                f"quadratic cost with offset {offset} <= 0 can reach h = 0; "
                "the freeze and gradient-hold schemes need h(x) != 0",
                stacklevel=2,
            )
        x_star.setflags(write=False)
        Q.setflags(write=False)
        return cls(QUADRATIC, x_star, Q, float(offset), name=name or "quadratic")

    @classmethod
    def custom(cls, evaluator, minimizer, gradient=None, name: str = "custom") -> "CostField":
        x_star = np.atleast_1d(np.asarray(minimizer, dtype=float)).copy()
        x_star.setflags(write=False)
        return cls(CUSTOM, x_star, evaluator=evaluator, gradient=gradient, name=name)

    def __call__(self, x) -> float:
        return eval_cost(self, x)

    def kernel_params(self) -> np.ndarray:
        """Flat parameter vector ``[x*, Q.ravel(), c]`` for compiled kernels."""
        return np.concatenate([self.minimizer, self.curvature.ravel(), [self.offset]])


def case_study_cost() -> CostField:
    """``h(x) = (x - 2)^2 + 10`` on the real line."""
    return CostField.quadratic([2.0], [[1.0]], 10.0, name="case-study")


PRESETS = {"case-study": case_study_cost}


def _as_state(cost: CostField, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (cost.n,):
        raise ValueError(f"state has shape {x.shape}, cost expects ({cost.n},)")
    return x


def eval_cost(cost: CostField, x) -> float:
    x = _as_state(cost, x)
    if cost.kind == QUADRATIC:
        d = x - cost.minimizer
        return float(d @ cost.curvature @ d + cost.offset)
    return float(cost.evaluator(x))


def finite_difference_grad(fn: Callable[[np.ndarray], float], x: np.ndarray) -> np.ndarray:
    step = 1e-6 * (1.0 + np.linalg.norm(x))
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (fn(x + e) - fn(x - e)) / (2.0 * step)
    return g


def grad(cost: CostField, x) -> np.ndarray:
    x = _as_state(cost, x)
    if cost.kind == QUADRATIC:
        return 2.0 * cost.curvature @ (x - cost.minimizer)
    if cost.gradient is not None:
        return np.atleast_1d(np.asarray(cost.gradient(x), dtype=float))
    return finite_difference_grad(lambda z: float(cost.evaluator(z)), x)


def ball_samples(center: np.ndarray, radius: float, count: int) -> np.ndarray:
    """Deterministic points in a closed ball, excluding the centre.

    Unscrambled Halton points on ``[-1, 1]^n`` are kept when they fall in
    the unit ball, then scaled by ``radius``.
    """
    center = np.asarray(center, dtype=float)
    n = center.size
    sampler = qmc.Halton(d=n, scramble=False)
    out = []
    while len(out) < count:
        pts = 2.0 * sampler.random(max(64, 4 * count)) - 1.0
        norms = np.linalg.norm(pts, axis=1)
        keep = pts[(norms <= 1.0) & (norms > 0.0)]
        out.extend(keep[: count - len(out)])
    return center + radius * np.asarray(out)


def validate_monotone(cost: CostField, samples: int = 1000, radius: float = 10.0) -> Report:
    """Check ``grad h(x) . (x - x*) > 0`` on quasi-random points around ``x*``."""
    if samples < 100:
        raise ValueError("samples must be >= 100")
    if not radius > 0:
        raise ValueError("radius must be positive")
    pts = ball_samples(cost.minimizer, radius, samples)
    values = np.array([grad(cost, p) @ (p - cost.minimizer) for p in pts])
    bad = np.flatnonzero(~(values > 0))
    report = Report(f"monotone descent of {cost.name}")
    detail = f"{bad.size}/{samples} violations within radius {radius:g}"
    if bad.size:
        detail += f", first at x={pts[bad[0]].tolist()}"
    report.add("strict-monotone", bad.size == 0, detail)
    report.data["violations"] = pts[bad]
    return report
