"""Fixed-step segment integrator shared by every scheme.

The engine splits a run into segments on which the right-hand side is
smooth (no measurement edge, dither deadline or phase change inside), and
calls :func:`integrate_segment` for each.  The kernel source is plain
Python: built-in costs and fields get a numba-compiled copy, user-supplied
callables run the same code uncompiled.

State layout: ``z = [x (n), accumulator (n)]``.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from .signals import TWO_PI, eval_dither_code

MODE_IDLE = 0
MODE_DITHER = 1
MODE_HOLD = 2
MODE_REFERENCE = 3

_jit = numba.njit(cache=True, nogil=True)
# small helpers are inlined; out-of-line calls with array views cost more than the math
_inline = numba.njit(cache=True, nogil=True, inline="always")



@_inline
def _interp_row(tables, i, length, phase):
    p = phase - TWO_PI * math.floor(phase / TWO_PI)
    pos = p * length / TWO_PI
    i0 = int(math.floor(pos))
    frac = pos - i0
    i0 = i0 % length
    i1 = (i0 + 1) % length
    return tables[i, i0] * (1.0 - frac) + tables[i, i1] * frac


@_inline
def _dither_jit(code, tables, i, length, phase):
    if code == 0:
        return math.cos(phase)
    if code == 1:
        return math.sin(phase)
    return _interp_row(tables, i, length, phase)


@_inline
def quadratic_cost(z, n, p):
    """``h`` at ``z[:n]`` with ``p = [x*, Q.ravel(), c]``."""
    total = 0.0
    for i in range(n):
        di = z[i] - p[i]
        for j in range(n):
            total += di * p[n + i * n + j] * (z[j] - p[j])
    return total + p[n + n * n]


@_inline
def quadratic_grad(z, n, p, out):
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += 2.0 * p[n + i * n + j] * (z[j] - p[j])
        out[i] = s


@_inline
def builtin_fields(p, y, out):
    """Nonzero entries of the built-in families; ``out`` must start zeroed."""
    rho = p[1]
    n = out.shape[1]
    if p[0] == 0.0:
        a = 2.0 * rho * y
        for m in range(n):
            scale = math.sqrt(m + 1.0)
            out[2 * m, m] = scale * a
            out[2 * m + 1, m] = scale
    else:
        c = math.sqrt(2.0 * rho) * math.cos(y)
        s = -math.sqrt(2.0 * rho) * math.sin(y)
        for m in range(n):
            scale = math.sqrt(m + 1.0)
            out[2 * m, m] = scale * c
            out[2 * m + 1, m] = scale * s


def _build(cost_h, cost_grad, fill_fields, dither, compile_it):
    def integrate_segment(mode, z0, t0, t1, nsteps, euler, n, transmitting, freeze, accumulate,
                          sqrt_omega, omega, phase_offset, amp, acc_gain, hold_v, rho,
                          codes, ks, tables, lengths, cparams, fparams, l,
                          stride, counter, x_star, blowup):
        """Advance ``z0`` from ``t0`` to ``t1`` in ``nsteps`` equal steps.

        Records every ``stride``-th global step strictly inside the
        segment.  Stops early, recording the offending step, when the
        state leaves the ball of radius ``blowup`` around ``x_star`` or
        stops being finite.

        The right-hand side is written out inside the stage loop rather
        than called: array arguments passed to a helper four times per
        step cost more in reference counting than the arithmetic.
        """
        dim = 2 * n
        z = z0.copy()
        nstages = 1 if euler else 4
        k = np.zeros((4, dim))
        zs = np.zeros(dim)
        F = np.zeros((l, n))
        S = np.zeros(n)
        U = np.zeros(codes.shape[0])
        u_time = math.nan
        cap = nsteps // stride + 2
        rec_t = np.empty(cap)
        rec_z = np.empty((cap, dim))
        rec_y = np.empty(cap)
        nrec = 0
        aborted = False
        dt = (t1 - t0) / nsteps
        for j in range(nsteps):
            t = t0 + j * dt
            for st in range(nstages):
                # stage state and time
                if st == 0:
                    c = 0.0
                    for m in range(dim):
                        zs[m] = z[m]
                else:
                    c = 1.0 if st == 3 else 0.5
                    for m in range(dim):
                        zs[m] = z[m] + c * dt * k[st - 1, m]
                ts = t0 + (j + 1) * dt if st == 3 else t + c * dt
                for m in range(dim):
                    k[st, m] = 0.0
                if mode == MODE_HOLD:
                    for m in range(n):
                        k[st, m] = hold_v[m]
                elif mode == MODE_REFERENCE:
                    cost_grad(zs, n, cparams, S)
                    for m in range(n):
                        k[st, m] = -rho * S[m]
                elif mode == MODE_DITHER:
                    y = 0.0
                    if transmitting:
                        y = cost_h(zs, n, cparams)
                    if not (freeze and y == 0.0):
                        fill_fields(fparams, y, F)
                        for m in range(n):
                            S[m] = 0.0
                        s = ts + phase_offset
                        if s != u_time:
                            # the two midpoint stages share one time
                            for i in range(codes.shape[0]):
                                U[i] = dither(codes[i], tables, i, lengths[i], ks[i] * omega * s)
                            u_time = s
                        for i in range(codes.shape[0]):
                            for m in range(n):
                                S[m] += F[i, m] * U[i]
                        for m in range(n):
                            k[st, m] = sqrt_omega * amp * S[m]
                            if accumulate:
                                k[st, n + m] = sqrt_omega * acc_gain * S[m]
            if euler:
                for m in range(dim):
                    z[m] += dt * k[0, m]
            else:
                for m in range(dim):
                    z[m] += dt * (k[0, m] + 2.0 * k[1, m] + 2.0 * k[2, m] + k[3, m]) / 6.0
            counter += 1
            dist = 0.0
            finite = True
            for m in range(n):
                if not math.isfinite(z[m]):
                    finite = False
                dist += (z[m] - x_star[m]) ** 2
            dist = math.sqrt(dist)
            bad = (not finite) or dist > blowup
            if bad or (j + 1 < nsteps and counter % stride == 0):
                rec_t[nrec] = t0 + (j + 1) * dt
                for m in range(dim):
                    rec_z[nrec, m] = z[m]
                if transmitting and finite:
                    rec_y[nrec] = cost_h(z, n, cparams)
                else:
                    rec_y[nrec] = 0.0
                nrec += 1
            if bad:
                aborted = True
                break
        return z, rec_t[:nrec], rec_z[:nrec], rec_y[:nrec], counter, aborted

    if compile_it:
        integrate_segment = _jit(integrate_segment)
    return integrate_segment


_COMPILED = None


def compiled_kernel():
    """Kernel for the quadratic cost and the built-in field families."""
    global _COMPILED
    if _COMPILED is None:
        _COMPILED = _build(quadratic_cost, quadratic_grad, builtin_fields, _dither_jit, True)
    return _COMPILED


def python_kernel(cost_h, cost_grad, fill_fields):
    """Uncompiled kernel around arbitrary Python callables.

    ``cost_h(z, n, params) -> float`` and ``cost_grad(z, n, params, out)``
    read the state from ``z[:n]``; ``fill_fields(params, y, out)`` writes
    an ``(l, n)`` array.
    """
    def dither(code, tables, i, length, phase):
        return eval_dither_code(code, tables[i], length, phase)

    return _build(cost_h, cost_grad, fill_fields, dither, False)
