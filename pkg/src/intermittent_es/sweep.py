"""Cartesian parameter sweeps over a base run configuration."""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from . import config as cfgmod
from .checks import ConfigurationError
from .engine import RunMetrics, metrics, simulate

THREADS_ENV = "ES_THREADS"


@dataclass(frozen=True)
class SweepRow:
    params: dict
    metrics: RunMetrics
    samples: int


def parse_grid(items: Sequence[str]) -> list[tuple[str, list]]:
    """``["scheme.omega=1,2", "measurement.eps=0.1"]`` -> ``[(key, values), ...]``.

    Keys are checked against the config schema here, before anything runs.
    """
    grid = []
    seen = set()
    for item in items:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not raw.strip():
            raise ConfigurationError(f"grid entry {item!r} is not of the form key=v1,v2,...")
        cfgmod.check_key(key)
        if key in seen:
            raise ConfigurationError(f"grid key {key!r} given twice")
        seen.add(key)
        grid.append((key, [cfgmod.parse_value(v.strip()) for v in raw.split(",")]))
    return grid


def thread_count(cells: int) -> int:
    raw = os.environ.get(THREADS_ENV)
    limit = os.cpu_count() or 1
    if raw:
        try:
            limit = int(raw)
        except ValueError as exc:
            raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
        if limit < 1:
            raise ConfigurationError(f"{THREADS_ENV} must be >= 1, got {limit}")
    return max(1, min(limit, cells))


def build_cells(base: dict, grid: Sequence[tuple[str, list]], text: str = "",
                source: str = "<config>") -> list[tuple[dict, cfgmod.RunSpec]]:
    """Every grid cell as ``(params, RunSpec)``, in lexicographic grid order.

    All cells are validated up front so a bad value fails before any run.
    """
    keys = [k for k, _ in grid]
    cells = []
    for combo in itertools.product(*(values for _, values in grid)):
        doc = base
        for key, value in zip(keys, combo):
            doc = cfgmod.with_override(doc, key, value)
        params = dict(zip(keys, combo))
        try:
            spec = cfgmod.build_spec(doc, text, source)
        except ConfigurationError as exc:
            label = ", ".join(f"{k}={v}" for k, v in params.items())
            raise ConfigurationError(f"grid cell ({label}): {exc}") from exc
        cells.append((params, spec))
    return cells


def run_cell(spec: cfgmod.RunSpec) -> SweepRow:
    traj = simulate(spec.scheme, spec.sched, spec.cost, spec.eng, spec.x0)
    return SweepRow({}, metrics(traj, spec.cost.minimizer, spec.band), len(traj))


def sweep(base: dict, grid: Sequence[tuple[str, list]], text: str = "", source: str = "<config>",
          threads: Optional[int] = None) -> list[SweepRow]:
    """Run every cell; a divergent cell is flagged in its row and the sweep goes on."""
    cells = build_cells(base, grid, text, source)
    workers = threads or thread_count(len(cells))
    if workers == 1:
        results = [run_cell(spec) for _, spec in cells]
    else:
        # the compiled kernel releases the GIL, so threads run in parallel
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_cell, [spec for _, spec in cells]))
    return [SweepRow(params, r.metrics, r.samples) for (params, _), r in zip(cells, results)]


def rows_to_table(grid: Sequence[tuple[str, list]], rows: Sequence[SweepRow]) -> tuple[list[str], list[list[str]]]:
    keys = [k for k, _ in grid]
    header = keys + ["steady_state_error", "convergence_time", "diverged", "max_excursion", "samples"]
    table = []
    for row in rows:
        m = row.metrics
        cells = [_fmt(row.params[k]) for k in keys]
        cells += [cfgmod.format_float(m.steady_state_error),
                  "" if m.convergence_time is None else cfgmod.format_float(m.convergence_time),
                  "true" if m.diverged else "false",
                  cfgmod.format_float(m.max_excursion), str(row.samples)]
        table.append(cells)
    return header, table


def _fmt(value) -> str:
    if isinstance(value, float):
        return cfgmod.format_float(value)
    if isinstance(value, list):
        return " ".join(_fmt(v) for v in value)
    return str(value)
