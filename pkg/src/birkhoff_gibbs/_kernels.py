"""Compiled inner loops.

Every kernel that takes a batch treats rows independently, so a row's
result never depends on which other rows share the call. That is what makes
Monte Carlo output independent of how samples are split across workers.

Index convention: position ``i`` in a coefficient row holds mode ``i - N``.
Divisor tables are indexed ``recip[n, j1, j3]`` with ``j2 = n + j3 - j1``.
"""

import math

import numba as nb
import numpy as np

_JIT = dict(nogil=True, cache=True)

OK = 0
BLOWUP = 1
MAX_STEPS = 2


@nb.njit(**_JIT)
def field_row(u, recip, sigma, out):
    m = u.shape[0]
    for n in range(m):
        acc = 0.0j
        for a in range(m):
            ua = u[a]
            if ua == 0:
                continue
            lo = max(0, a - n)
            hi = min(m, a - n + m)
            for c in range(lo, hi):
                r = recip[n, a, c]
                if r != 0.0:
                    acc += r * ua * u[n + c - a] * np.conj(u[c])
        out[n] = sigma * acc


@nb.njit(**_JIT)
def field_batch(states, recip, sigma):
    out = np.empty_like(states)
    for k in range(states.shape[0]):
        field_row(states[k], recip, sigma, out[k])
    return out


@nb.njit(**_JIT)
def fn_row(u, recip, sigma):
    # quadruple sum in (n1, n2, m1) order; m2 = n1 + n2 - m1
    m = u.shape[0]
    acc = 0.0j
    for n1 in range(m):
        for n2 in range(m):
            p = u[n1] * u[n2]
            if p == 0:
                continue
            for m1 in range(m):
                m2 = n1 + n2 - m1
                if m2 < 0 or m2 >= m:
                    continue
                r = recip[m2, n1, m1]
                if r != 0.0:
                    acc += r * p * np.conj(u[m1]) * np.conj(u[m2])
    # sigma / (2i) = -0.5j * sigma
    return -0.5j * sigma * acc


@nb.njit(**_JIT)
def self_conv_row(u, w):
    m = u.shape[0]
    for k in range(2 * m - 1):
        w[k] = 0.0
    for a in range(m):
        for b in range(m):
            w[a + b] += u[a] * u[b]


@nb.njit(**_JIT)
def l4_row(u):
    w = np.empty(2 * u.shape[0] - 1, dtype=np.complex128)
    self_conv_row(u, w)
    s = 0.0
    for k in range(w.shape[0]):
        s += w[k].real * w[k].real + w[k].imag * w[k].imag
    return s


@nb.njit(**_JIT)
def l4_batch(states):
    out = np.empty(states.shape[0])
    for k in range(states.shape[0]):
        out[k] = l4_row(states[k])
    return out


@nb.njit(**_JIT)
def grad_l4_row(u, out):
    # out[n] = 2 sum_m (u*u)(n + m) conj(u[m]); in index space w[i_n + i_m]
    m = u.shape[0]
    w = np.empty(2 * m - 1, dtype=np.complex128)
    self_conv_row(u, w)
    for n in range(m):
        acc = 0.0j
        for c in range(m):
            acc += w[n + c] * np.conj(u[c])
        out[n] = 2.0 * acc


@nb.njit(**_JIT)
def gn_row(u, recip, omega, sigma):
    m = u.shape[0]
    dot = np.empty(m, dtype=np.complex128)
    grad = np.empty(m, dtype=np.complex128)
    field_row(u, recip, sigma, dot)
    grad_l4_row(u, grad)
    g = 0.0
    for n in range(m):
        dh = omega[n] * u[n] + 0.5 * sigma * grad[n]
        g += dh.real * dot[n].real + dh.imag * dot[n].imag
    return 2.0 * g


@nb.njit(**_JIT)
def gn_batch(states, recip, omega, sigma):
    out = np.empty(states.shape[0])
    for k in range(states.shape[0]):
        out[k] = gn_row(states[k], recip, omega, sigma)
    return out


@nb.njit(**_JIT)
def _l2(v):
    s = 0.0
    for i in range(v.shape[0]):
        s += v[i].real * v[i].real + v[i].imag * v[i].imag
    return math.sqrt(s)


@nb.njit(**_JIT)
def _hs(v, weights):
    s = 0.0
    for i in range(v.shape[0]):
        s += weights[i] * (v[i].real * v[i].real + v[i].imag * v[i].imag)
    return math.sqrt(s)


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                -92097 / 339200, 187 / 2100, 1 / 40])


@nb.njit(**_JIT)
def _rk45_row(u0, t, recip, sigma, dt0, rtol, max_steps, blowup, hs_w, A, B5, B4):
    m = u0.shape[0]
    y = u0.copy()
    k = np.zeros((7, m), dtype=np.complex128)
    tmp = np.empty(m, dtype=np.complex128)
    ynew = np.empty(m, dtype=np.complex128)
    direction = 1.0 if t >= 0 else -1.0
    remaining = abs(t)
    h = min(dt0, remaining)
    steps = 0
    peak = _hs(y, hs_w)
    if remaining == 0.0:
        return y, 0, OK, peak
    field_row(y, recip, sigma, k[0])
    while remaining > 0.0:
        if steps >= max_steps:
            return y, steps, MAX_STEPS, peak
        if h > remaining:
            h = remaining
        hd = h * direction
        for s in range(1, 7):
            for i in range(m):
                acc = y[i]
                for r in range(s):
                    acc += hd * A[s, r] * k[r, i]
                tmp[i] = acc
            field_row(tmp, recip, sigma, k[s])
        err2 = 0.0
        for i in range(m):
            # stage 7 evaluates at the fifth-order solution (FSAL)
            ynew[i] = tmp[i]
            e = 0.0j
            for r in range(7):
                e += (B5[r] - B4[r]) * k[r, i]
            e *= hd
            err2 += e.real * e.real + e.imag * e.imag
        scale = rtol * max(_l2(y), 1e-300)
        err = math.sqrt(err2) / scale
        steps += 1
        if err <= 1.0:
            remaining -= h
            if remaining < 1e-15 * abs(t):
                remaining = 0.0
            for i in range(m):
                y[i] = ynew[i]
                k[0, i] = k[6, i]
            nrm = _hs(y, hs_w)
            if nrm > peak:
                peak = nrm
            if not math.isfinite(nrm) or nrm > blowup:
                return y, steps, BLOWUP, peak
            fac = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
        else:
            fac = max(0.2, 0.9 * err ** -0.2)
        h *= fac
    return y, steps, OK, peak


@nb.njit(**_JIT)
def _rk4_row(u0, t, recip, sigma, dt, max_steps, blowup, hs_w):
    m = u0.shape[0]
    y = u0.copy()
    peak = _hs(y, hs_w)
    nsteps = int(math.ceil(abs(t) / dt - 1e-12)) if t != 0.0 else 0
    if nsteps > max_steps:
        return y, 0, MAX_STEPS, peak
    if nsteps == 0:
        return y, 0, OK, peak
    h = t / nsteps
    k1 = np.empty(m, dtype=np.complex128)
    k2 = np.empty(m, dtype=np.complex128)
    k3 = np.empty(m, dtype=np.complex128)
    k4 = np.empty(m, dtype=np.complex128)
    tmp = np.empty(m, dtype=np.complex128)
    for step in range(nsteps):
        field_row(y, recip, sigma, k1)
        for i in range(m):
            tmp[i] = y[i] + 0.5 * h * k1[i]
        field_row(tmp, recip, sigma, k2)
        for i in range(m):
            tmp[i] = y[i] + 0.5 * h * k2[i]
        field_row(tmp, recip, sigma, k3)
        for i in range(m):
            tmp[i] = y[i] + h * k3[i]
        field_row(tmp, recip, sigma, k4)
        for i in range(m):
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        nrm = _hs(y, hs_w)
        if nrm > peak:
            peak = nrm
        if not math.isfinite(nrm) or nrm > blowup:
            return y, step + 1, BLOWUP, peak
    return y, nsteps, OK, peak


@nb.njit(**_JIT)
def flow_batch(states, t, recip, sigma, adaptive, dt, rtol, max_steps, blowup,
               hs_w, A, B5, B4):
    b = states.shape[0]
    out = np.empty_like(states)
    steps = np.zeros(b, dtype=np.int64)
    status = np.zeros(b, dtype=np.int64)
    peak = np.zeros(b)
    for r in range(b):
        u = states[r]
        if adaptive:
            mass = _l2(u) ** 2
            dt0 = min(dt, 1.0 / (1.0 + mass * mass))
            y, s, st, pk = _rk45_row(u, t, recip, sigma, dt0, rtol, max_steps,
                                     blowup, hs_w, A, B5, B4)
        else:
            y, s, st, pk = _rk4_row(u, t, recip, sigma, dt, max_steps, blowup, hs_w)
        out[r] = y
        steps[r] = s
        status[r] = st
        peak[r] = pk
    return out, steps, status, peak


@nb.njit(**_JIT)
def box_muller(raw, n_normals):
    """Map rows of raw 64-bit words to standard normals, two per word pair."""
    b = raw.shape[0]
    out = np.empty((b, n_normals))
    inv = 1.0 / 9007199254740992.0  # 2**-53
    for r in range(b):
        for p in range(n_normals // 2):
            u1 = ((raw[r, 2 * p] >> np.uint64(11)) + 0.5) * inv
            u2 = ((raw[r, 2 * p + 1] >> np.uint64(11)) + 0.5) * inv
            rad = math.sqrt(-2.0 * math.log(u1))
            ang = 2.0 * math.pi * u2
            out[r, 2 * p] = rad * math.cos(ang)
            out[r, 2 * p + 1] = rad * math.sin(ang)
    return out
