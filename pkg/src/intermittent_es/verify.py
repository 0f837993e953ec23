"""Verification suites: oracle checks and empirical invariants.

Each suite returns a :class:`~intermittent_es.checks.Report`.  The CLI
``verify`` subcommand prints them and exits nonzero on any failure.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from . import schemes as sch
from .checks import ConfigurationError, Report
from .costs import case_study_cost, eval_cost, validate_monotone
from .engine import EngineConfig, metrics, simulate, verify_gradient_scaling, verify_path_equivalence
from .fields import FieldFamily, residual_report
from .measurement import MeasurementSchedule, continuous_schedule
from .signals import (DitherBank, DitherSignal, common_period, cos_sin_bank, gamma_matrix,
                      validate_dither)

OMEGA_SLOW = 20.0 * math.pi
OMEGA_FAST = 2002.0 * math.pi
RHO = 0.25


def case_study_scheme(kind: str = sch.CLASSICAL_INTERMITTENT, omega: float = OMEGA_SLOW,
                      fields: str = "affine", **extra) -> sch.SchemeConfig:
    fam = FieldFamily.affine(RHO) if fields == "affine" else FieldFamily.trig(RHO)
    return sch.SchemeConfig(kind, omega, RHO, fam, cos_sin_bank(1), **extra)


def dithers_suite() -> Report:
    report = Report("dithers: bound, periodicity, zero mean")
    cases = [
        ("cos", DitherSignal.cosine(1), True),
        ("sin", DitherSignal.sine(1), True),
        ("cos k=2/3", DitherSignal.cosine("2/3"), True),
        ("custom 0.5*sin", DitherSignal.custom(0.5 * np.sin(np.linspace(0, 2 * np.pi, 256, endpoint=False))), True),
        ("custom constant", DitherSignal.custom(np.ones(64)), False),
    ]
    for label, d, expect in cases:
        r = validate_dither(d)
        detail = "; ".join(f"{c.name}={'ok' if c.passed else 'fail'}" for c in r.checks)
        report.add(f"{label} {'accepted' if expect else 'rejected'}", r.passed == expect, detail)
    return report


def gamma_suite() -> Report:
    report = Report("gamma: bracket coefficients and common period")
    cs = DitherBank((DitherSignal.cosine(1), DitherSignal.sine(1)))
    sc = DitherBank((DitherSignal.sine(1), DitherSignal.cosine(1)))
    c2 = DitherBank((DitherSignal.cosine(1), DitherSignal.sine(2)))
    g = gamma_matrix(cs, OMEGA_SLOW)[0, 1]
    report.add("gamma12 cos/sin k=[1,1]", abs(g - 0.5) < 1e-8, f"{g:.12f} vs 0.5")
    g = gamma_matrix(sc, OMEGA_SLOW)[0, 1]
    report.add("gamma12 sin/cos k=[1,1]", abs(g + 0.5) < 1e-8, f"{g:.12f} vs -0.5")
    g = gamma_matrix(c2, OMEGA_SLOW)[0, 1]
    report.add("gamma12 cos/sin k=[1,2]", abs(g) < 1e-8, f"{g:.3e} vs 0")
    worst_w = worst_a = 0.0
    for bank in (cs, c2, cos_sin_bank(2), DitherBank((DitherSignal.cosine("2/3"), DitherSignal.sine(1)))):
        a = gamma_matrix(bank, OMEGA_SLOW).entries
        b = gamma_matrix(bank, OMEGA_FAST).entries
        worst_w = max(worst_w, float(np.max(np.abs(a - b))))
        worst_a = max(worst_a, float(np.max(np.abs(a + a.T))))
    report.add("omega invariance", worst_w < 1e-8, f"max |gamma(20pi) - gamma(2002pi)| = {worst_w:.2e}")
    report.add("antisymmetry", worst_a < 1e-8, f"max |gamma + gamma^T| = {worst_a:.2e}")
    for ks, want in (([1, 1], 2 * math.pi), ([1, 2], 2 * math.pi), (["2/3", 1], 6 * math.pi)):
        bank = DitherBank(tuple(DitherSignal.cosine(k) for k in ks))
        got = common_period(bank)
        report.add(f"C for k={ks}", math.isclose(got, want, rel_tol=1e-15), f"{got:.15g} vs {want:.15g}")
    return report


def assumption4_suite() -> Report:
    report = Report("bracket-sum residual and cost monotonicity")
    ys = np.linspace(-50.0, 50.0, 201)
    for fam in (FieldFamily.affine(RHO), FieldFamily.trig(RHO), FieldFamily.affine(RHO, 2), FieldFamily.trig(RHO, 2)):
        bank = cos_sin_bank(fam.n)
        sub = residual_report(fam, gamma_matrix(bank, OMEGA_SLOW), RHO, ys)
        c = sub["residual"]
        report.add(f"{fam.name} n={fam.n} residual < 1e-8", c.passed, c.detail)
    mono = validate_monotone(case_study_cost())
    report.add("case-study cost strictly monotone", mono.passed, mono.checks[0].detail)
    return report


def path_equivalence_suite() -> Report:
    report = Report("freeze path equals the continuous path under s = tau(t)")
    cost = case_study_cost()
    cfg = case_study_scheme(sch.FREEZE)
    sched = MeasurementSchedule(1.0, 0.17)
    x0 = [-1.0]
    for spp, tol in ((256, 1e-6), (32, 1e-3)):
        eng = EngineConfig(t_end=10.0, steps_per_dither_period=spp)
        dev = verify_path_equivalence(cfg, cost, sched, eng, x0)
        report.add(f"dt = T/{spp}", dev < tol, f"sup deviation {dev:.3e} < {tol:g}")
    dev = verify_path_equivalence(cfg, cost, continuous_schedule(1.0), EngineConfig(t_end=10.0), x0)
    report.add("eps = T_s", dev == 0.0, f"sup deviation {dev!r}")
    return report


def gradient_scaling_suite() -> Report:
    report = Report("gradient estimate error shrinks like omega^-1/2")
    omegas = [20 * math.pi, 80 * math.pi, 320 * math.pi, 1280 * math.pi]
    base = case_study_scheme(sch.GRADIENT_HOLD, rho2=1.5 * RHO, eps_prime=0.1)
    rows = verify_gradient_scaling(base, case_study_cost(), MeasurementSchedule(1.0, 0.17),
                                   EngineConfig(), [-1.0], omegas)
    errs = [e for _, e in rows]
    ratios = [b / a for a, b in zip(errs, errs[1:])]
    report.add("strictly decreasing", all(b < a for a, b in zip(errs, errs[1:])),
               ", ".join(f"{w / math.pi:g}pi: {e:.3e}" for w, e in rows))
    report.add("ratios <= 0.75", all(r <= 0.75 for r in ratios), ", ".join(f"{r:.3f}" for r in ratios))
    report.data["rows"] = rows
    return report


def reference_oracle_suite() -> Report:
    report = Report("reference gradient flow against 2 - 3 exp(-t/2)")
    cfg = case_study_scheme(sch.REFERENCE)
    traj = simulate(cfg, continuous_schedule(1.0), case_study_cost(), EngineConfig(t_end=10.0, dt=1e-3), [-1.0])
    exact = 2.0 - 3.0 * np.exp(-0.5 * traj.t)
    dev = float(np.max(np.abs(traj.x[:, 0] - exact)))
    report.add("sup |x - oracle| on [0, 10]", dev < 1e-6, f"{dev:.3e} < 1e-6")
    i = int(np.searchsorted(traj.t, 2.0))
    report.add("x(2)", abs(traj.x[i, 0] - 0.89636) < 1e-5, f"{traj.x[i, 0]:.8f} vs 2 - 3/e = 0.89636")
    return report


def per_period_decrease(omega: float = OMEGA_FAST, eps: float = 0.17, t_end: float = 20.0,
                        threshold: float = 0.5) -> tuple[int, int, list[float]]:
    """Count full dither periods inside pulses where ``|x - x*|`` did not shrink.

    Returns ``(checked, violations, violation_times)``; only periods that
    start farther than ``threshold`` from the minimizer are checked.
    """
    cfg = case_study_scheme(sch.CLASSICAL_INTERMITTENT, omega)
    sched = MeasurementSchedule(1.0, eps)
    T = cfg.T
    full = int(math.floor(eps / T + 1e-9))
    marks = [k * sched.period + j * T for k in range(int(math.ceil(t_end))) for j in range(full + 1)]
    marks = [m for m in marks if 0.0 < m < t_end]
    cost = case_study_cost()
    traj = simulate(cfg, sched, cost, EngineConfig(t_end=t_end, sample_stride=10**9), [-1.0], breakpoints=marks)
    at = {float(t): float(x) for t, x in zip(traj.t, traj.x[:, 0])}
    x_star = float(cost.minimizer[0])
    checked = 0
    bad = []
    for k in range(int(math.ceil(t_end))):
        for j in range(full):
            t0 = k * sched.period + j * T
            t1 = k * sched.period + (j + 1) * T
            if t0 not in at or t1 not in at:
                continue
            d0 = abs(at[t0] - x_star)
            if d0 <= threshold:
                continue
            checked += 1
            if not abs(at[t1] - x_star) < d0:
                bad.append(t0)
    return checked, len(bad), bad


def break_drift(omega: float = OMEGA_SLOW, eps: float = 0.1, fields: str = "affine",
                t_end: float = 20.0) -> tuple[float, float]:
    """``(max drift during breaks, M_S / sqrt(omega))`` for the classical scheme."""
    cfg = case_study_scheme(sch.CLASSICAL_INTERMITTENT, omega, fields)
    sched = MeasurementSchedule(1.0, eps)
    traj = simulate(cfg, sched, case_study_cost(), EngineConfig(t_end=t_end), [-1.0])
    f0 = cfg.fields.values(0.0)
    bound = float(sum(np.linalg.norm(row) for row in f0)) * cfg.C / math.sqrt(omega)
    worst = 0.0
    for k in range(int(math.floor(t_end))):
        start = k * sched.period + sched.pulse
        stop = (k + 1) * sched.period
        win = (traj.t >= start) & (traj.t < stop)
        if not np.any(win):
            continue
        x_start = traj.x[np.argmax(win)]
        worst = max(worst, float(np.max(np.linalg.norm(traj.x[win] - x_start, axis=1))))
    return worst, bound


def freeze_bracket(band: float = 0.8, eps: float = 0.17, t_end: float = 80.0) -> tuple[Optional[float], Optional[float], float]:
    """``(t1, t2, upper)``: continuous and freeze entry times and ``(T_s/eps) t1 + T_s``."""
    cost = case_study_cost()
    cont = simulate(case_study_scheme(sch.CLASSICAL_CONTINUOUS), continuous_schedule(1.0), cost,
                    EngineConfig(t_end=t_end), [-1.0])
    sched = MeasurementSchedule(1.0, eps)
    frz = simulate(case_study_scheme(sch.FREEZE), sched, cost, EngineConfig(t_end=t_end), [-1.0])
    t1 = metrics(cont, cost.minimizer, band).convergence_time
    t2 = metrics(frz, cost.minimizer, band).convergence_time
    upper = math.nan if t1 is None else sched.period / sched.pulse * t1 + sched.period
    return t1, t2, upper


def alpha_profile(fields: str = "trig", t_end: float = 30.0) -> tuple[float, float, bool]:
    """``(min alpha, max alpha, constant within each transmission period)``."""
    cfg = case_study_scheme(sch.ADAPTIVE_AMPLITUDE, fields=fields, rho2=5 * RHO, eps_prime=0.1)
    traj = simulate(cfg, MeasurementSchedule(1.0, 0.17), case_study_cost(), EngineConfig(t_end=t_end), [-1.0])
    constant = True
    for k in range(int(t_end)):
        win = (traj.t > k) & (traj.t < k + 1)
        if np.any(win) and np.ptp(traj.alpha[win]) != 0.0:
            constant = False
    return float(traj.alpha.min()), float(traj.alpha.max()), constant


def scheme_invariants_suite() -> Report:
    report = Report("scheme invariants: per-period decrease, break drift, freeze bracket, alpha")
    checked, bad, times = per_period_decrease()
    report.add("per-period decrease at 2002pi", checked > 0 and bad == 0,
               f"{checked} full periods checked with |x - x*| > 0.5, {bad} without decrease"
               + (f" (first at t={times[0]:.4f})" if times else ""))
    for omega, fields in ((OMEGA_SLOW, "affine"), (OMEGA_SLOW, "trig"), (OMEGA_FAST, "affine")):
        worst, bound = break_drift(omega, fields=fields, t_end=20.0 if omega == OMEGA_SLOW else 5.0)
        report.add(f"break drift {fields} {omega / math.pi:g}pi", worst <= bound,
                   f"max drift {worst:.4f} <= M_S/sqrt(omega) = {bound:.4f}")
    t1, t2, upper = freeze_bracket()
    ok = t1 is not None and t2 is not None and t1 <= t2 <= upper
    report.add("freeze entry time bracket (band 0.8)", ok, f"t1={t1}, t2={t2}, upper={upper:.4g}")
    lo, hi, constant = alpha_profile()
    report.add("alpha in (0, 1), constant per period", 0 < lo and hi < 1 and constant,
               f"alpha in [{lo:.4g}, {hi:.4g}], constant={constant}")
    return report


SUITES: dict[str, Callable[[], Report]] = {
    "dithers": dithers_suite,
    "gamma": gamma_suite,
    "assumption4": assumption4_suite,
    "path-equivalence": path_equivalence_suite,
    "gradient-scaling": gradient_scaling_suite,
    "reference-oracle": reference_oracle_suite,
    "scheme-invariants": scheme_invariants_suite,
}


def run_suite(name: str) -> list[Report]:
    if name == "all":
        return [fn() for fn in SUITES.values()]
    if name not in SUITES:
        raise ConfigurationError(f"unknown suite {name!r}; expected one of {', '.join(list(SUITES) + ['all'])}")
    return [SUITES[name]()]
