"""Command-line front end: ``run``, ``sweep`` and ``verify``.

Exit codes: 0 success, 1 configuration or usage error, 2 divergence.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import config as cfgmod
from . import sweep as sweepmod
from . import verify as verifymod
from .checks import ConfigurationError
from .engine import Trajectory, metrics, simulate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def trajectory_rows(traj: Trajectory) -> tuple[list[str], list[list[str]]]:
    n = traj.n
    header = ["t"] + [f"x_{i + 1}" for i in range(n)] + ["h_m", "tau", "alpha", "phase"] + \
        [f"g_{i + 1}" for i in range(n)]
    f = cfgmod.format_float
    names = traj.phase_names()
    rows = []
    for k in range(len(traj)):
        rows.append([f(traj.t[k])] + [f(v) for v in traj.x[k]]
                    + [f(traj.h_m[k]), f(traj.tau[k]), f(traj.alpha[k]), names[k]]
                    + [f(v) for v in traj.g_held[k]])
    return header, rows


def csv_text(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def write_text(path, text: str) -> None:
    Path(path).write_text(text)


def _envelope(t: np.ndarray, y: np.ndarray, buckets: int) -> tuple[np.ndarray, np.ndarray]:
    """Min/max per time bucket so fast oscillations keep their visual envelope."""
    if t.size <= 2 * buckets:
        return t, y
    edges = np.linspace(0, t.size, buckets + 1).astype(int)
    ts, ys = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        seg = y[a:b]
        i, j = sorted((int(np.argmin(seg)), int(np.argmax(seg))))
        ts += [t[a + i], t[a + j]]
        ys += [seg[i], seg[j]]
    return np.array(ts), np.array(ys)


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def svg_plot(traj: Trajectory, x_star, title: str, width: int = 720, height: int = 360) -> str:
    """Line plot of every state component against time with a dashed ``x*`` rule."""
    left, right, top, bottom = 60, 20, 30, 40
    pw, ph = width - left - right, height - top - bottom
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    t = traj.t
    finite = np.isfinite(traj.x)
    ys = np.concatenate([traj.x[finite], x_star])
    t_lo, t_hi = float(t[0]), float(t[-1]) if t[-1] > t[0] else float(t[0]) + 1.0
    y_lo, y_hi = float(ys.min()), float(ys.max())
    pad = 0.05 * (y_hi - y_lo or 1.0)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(tv):
        return left + (tv - t_lo) / (t_hi - t_lo) * pw

    def py(yv):
        return top + (y_hi - yv) / (y_hi - y_lo) * ph

    colors = ["#1f5fbf", "#d9730d", "#2a9d3f", "#9b2fae"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{_escape(title)}</text>',
           f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>']
    for tv in _ticks(t_lo, t_hi):
        out.append(f'<line x1="{px(tv):.2f}" y1="{top + ph}" x2="{px(tv):.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(tv):.2f}" y="{top + ph + 18}" text-anchor="middle">{tv:g}</text>')
    for yv in _ticks(y_lo, y_hi):
        out.append(f'<line x1="{left - 5}" y1="{py(yv):.2f}" x2="{left}" y2="{py(yv):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py(yv) + 4:.2f}" text-anchor="end">{yv:g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 6}" text-anchor="middle">time [s]</text>')
    out.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {top + ph / 2:.1f})">x</text>')
    for m, xs in enumerate(x_star):
        out.append(f'<line x1="{left}" y1="{py(xs):.2f}" x2="{left + pw}" y2="{py(xs):.2f}" '
                   f'stroke="#e08a00" stroke-dasharray="6 4"/>')
    for m in range(traj.n):
        ok = np.isfinite(traj.x[:, m])
        tt, yy = _envelope(t[ok], traj.x[ok, m], pw * 2)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(tt, yy))
        out.append(f'<polyline fill="none" stroke="{colors[m % len(colors)]}" stroke-width="1" points="{pts}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def cmd_run(args) -> int:
    data, text, source = cfgmod.resolve(args.config)
    spec = cfgmod.build_spec(data, text, source)
    traj = simulate(spec.scheme, spec.sched, spec.cost, spec.eng, spec.x0)
    m = metrics(traj, spec.cost.minimizer, spec.band)
    write_text(args.out, csv_text(*trajectory_rows(traj)))
    if args.plot:
        write_text(args.plot, svg_plot(traj, spec.cost.minimizer, spec.name))
    ct = "none" if m.convergence_time is None else f"{m.convergence_time:.6g} s"
    print(f"{spec.name}: {len(traj)} samples, steady-state error {m.steady_state_error:.6g}, "
          f"convergence time {ct}, max excursion {m.max_excursion:.6g}")
    if m.diverged:
        at = f" at t={traj.abort_time:.6g}" if traj.abort_time is not None else ""
        print(f"{spec.name}: diverged{at}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_sweep(args) -> int:
    data, text, source = cfgmod.resolve(args.config)
    grid = sweepmod.parse_grid(args.grid or [])
    rows = sweepmod.sweep(data, grid, text, source)
    header, table = sweepmod.rows_to_table(grid, rows)
    write_text(args.out, csv_text(header, table))
    flagged = sum(r.metrics.diverged for r in rows)
    print(f"{len(rows)} runs, {flagged} diverged")
    return EXIT_OK


def cmd_verify(args) -> int:
    reports = verifymod.run_suite(args.suite)
    for r in reports:
        print(r.format())
    failed = sum(len(r.failures()) for r in reports)
    total = sum(len(r.checks) for r in reports)
    print(f"{total - failed}/{total} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="intermittent-es",
        description="Lie-bracket extremum seeking with intermittent measurements.",
        epilog="exit codes: 0 success, 1 configuration/usage error, 2 divergence",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="simulate one configuration",
                         description="Simulate one run and write its trajectory as CSV.",
                         epilog="config keys:\n" + cfgmod.schema_text(),
                         formatter_class=argparse.RawDescriptionHelpFormatter)
    run.add_argument("config", help="TOML config file or bundled preset name ("
                     + ", ".join(cfgmod.preset_names()) + ")")
    run.add_argument("--out", required=True, help="CSV output path")
    run.add_argument("--plot", help="optional SVG plot path")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="run a Cartesian parameter grid")
    sw.add_argument("config", help="base TOML config file or bundled preset name")
    sw.add_argument("--grid", nargs="*", metavar="KEY=V1,V2", help="e.g. scheme.omega=62.83,6289.38")
    sw.add_argument("--out", required=True, help="CSV output path")
    sw.set_defaults(func=cmd_sweep)

    ver = sub.add_parser("verify", help="run verification suites")
    ver.add_argument("--suite", default="all", help="one of " + ", ".join(list(verifymod.SUITES) + ["all"]))
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
