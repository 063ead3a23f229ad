"""Compiled hot-loop kernels for the closed-loop systems.

The generic simulator accepts arbitrary Python callables; these kernels are a
fast path for the common case of a quadratic cost plus a harmonic dither.
A single flow evaluator is shared across the four controller variants (branch
on an integer kind code) so numba compiles each kernel exactly once.
"""

from __future__ import annotations

import numpy as np
from numba import njit

KIND_TARGET = 0
KIND_LIE_ES = 1
KIND_CLASSICAL_ES = 2
KIND_CLASSICAL_AVG = 3

# pars layout: [k, amp, taudot]
#   target/averaged: amp and taudot unused
#   lie ES:          amp = epsilon, taudot = epsilon**-2
#   classical ES:    amp = a,       taudot = omega


@njit(cache=True)
def eval_dither(tau, period, amps, freqs, phases, out):
    n, nh = amps.shape
    base = 2.0 * np.pi * tau / period
    for i in range(n):
        acc = 0.0
        for h in range(nh):
            acc += amps[i, h] * np.sin(freqs[i, h] * base + phases[i, h])
        out[i] = acc


@njit(cache=True)
def eval_flow(kind, pars, Q, ustar, period, amps, freqs, phases, state, out):
    n = Q.shape[0]
    k = pars[0]
    for i in range(n):
        out[i] = -k * (state[n + i] - state[3 * n + i])
    uhat = np.empty(n)
    for i in range(n):
        uhat[i] = state[i] - state[2 * n + i]
    if kind == KIND_TARGET or kind == KIND_CLASSICAL_AVG:
        for i in range(n):
            acc = 0.0
            for m in range(n):
                acc += Q[i, m] * (uhat[m] - ustar[m])
            out[n + i] = acc - state[n + i]
    else:
        amp = pars[1]
        v = np.empty(n)
        eval_dither(state[4 * n], period, amps, freqs, phases, v)
        d = np.empty(n)
        for i in range(n):
            d[i] = uhat[i] + amp * v[i] - ustar[i]
        val = 0.0
        for i in range(n):
            acc = 0.0
            for m in range(n):
                acc += Q[i, m] * d[m]
            val += 0.5 * d[i] * acc
        c = val / amp
        for i in range(n):
            out[n + i] = c * v[i] - state[n + i]
    if kind == KIND_CLASSICAL_AVG:
        for i in range(2 * n):
            out[2 * n + i] = 0.0
    else:
        for i in range(2 * n):
            out[2 * n + i] = out[i]
    if kind == KIND_LIE_ES or kind == KIND_CLASSICAL_ES:
        out[4 * n] = pars[2]


@njit(cache=True)
def rk4_step(kind, pars, Q, ustar, period, amps, freqs, phases, state, h, out):
    m = state.size
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    work = np.empty(m)
    eval_flow(kind, pars, Q, ustar, period, amps, freqs, phases, state, k1)
    for i in range(m):
        work[i] = state[i] + 0.5 * h * k1[i]
    eval_flow(kind, pars, Q, ustar, period, amps, freqs, phases, work, k2)
    for i in range(m):
        work[i] = state[i] + 0.5 * h * k2[i]
    eval_flow(kind, pars, Q, ustar, period, amps, freqs, phases, work, k3)
    for i in range(m):
        work[i] = state[i] + h * k3[i]
    eval_flow(kind, pars, Q, ustar, period, amps, freqs, phases, work, k4)
    for i in range(m):
        out[i] = state[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


ADVANCE_HORIZON = 0
ADVANCE_CROSSED = 1
ADVANCE_NONFINITE = 2


@njit(cache=True)
def advance(kind, pars, Q, ustar, period, amps, freqs, phases,
            state, t0, h, t_end, rho, record_every, rec_t, rec_x, next_out):
    """Integrate the flow until the trigger enters D or t reaches t_end.

    ``state`` is advanced in place.  Every ``record_every``-th accepted step
    is written to ``rec_t``/``rec_x``.  On a crossing the pre-step state and
    time are kept (``next_out`` holds the offending post-step state) so the
    caller can bisect.  Returns (n_recorded, t, status).
    """
    m = state.size
    n = Q.shape[0]
    nrec = 0
    t = t0
    steps = 0
    eps_t = 1e-12 * (1.0 if t_end < 1.0 else t_end)
    while t < t_end - eps_t:
        hh = h
        if t + hh > t_end:
            hh = t_end - t
        rk4_step(kind, pars, Q, ustar, period, amps, freqs, phases, state, hh, next_out)
        racc = 0.0
        for i in range(2 * n):
            racc += next_out[2 * n + i] * next_out[2 * n + i]
        if racc - rho >= 0.0:
            return nrec, t, ADVANCE_CROSSED
        for i in range(m):
            state[i] = next_out[i]
        t += hh
        steps += 1
        if steps % record_every == 0:
            ok = True
            for i in range(m):
                if not np.isfinite(state[i]):
                    ok = False
            if not ok:
                return nrec, t, ADVANCE_NONFINITE
            rec_t[nrec] = t
            for i in range(m):
                rec_x[nrec, i] = state[i]
            nrec += 1
    # snap to the horizon so the caller's termination check (which uses a
    # tighter relative tolerance) sees the horizon as reached
    return nrec, t_end, ADVANCE_HORIZON


@njit(cache=True)
def closeness_directed(ta, Xa, tb, Xb):
    """Worst-case, over samples of arc a, of the best partner match in arc b.

    The per-sample score of a candidate partner is max(|t - s|, ||x - y||);
    the search window expands around the nearest-time sample until the time
    gap alone exceeds the best score found so far.
    """
    na = ta.size
    nb = tb.size
    dim = Xa.shape[1]
    worst = 0.0
    for i in range(na):
        t = ta[i]
        lo = np.searchsorted(tb, t)
        best = 1e300
        left = lo - 1
        right = lo
        while True:
            moved = False
            if right < nb and tb[right] - t < best:
                acc = 0.0
                for c in range(dim):
                    dd = Xa[i, c] - Xb[right, c]
                    acc += dd * dd
                cand = np.sqrt(acc)
                dt = tb[right] - t
                if dt < 0.0:
                    dt = -dt
                if dt > cand:
                    cand = dt
                if cand < best:
                    best = cand
                right += 1
                moved = True
            if left >= 0 and t - tb[left] < best:
                acc = 0.0
                for c in range(dim):
                    dd = Xa[i, c] - Xb[left, c]
                    acc += dd * dd
                cand = np.sqrt(acc)
                dt = t - tb[left]
                if dt > cand:
                    cand = dt
                if cand < best:
                    best = cand
                left -= 1
                moved = True
            if not moved:
                break
        if best > worst:
            worst = best
    return worst
