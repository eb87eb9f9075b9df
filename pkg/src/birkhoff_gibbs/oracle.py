"""Brute-force reference computations for tests.

Nothing here reuses the production kernels: sums are enumerated directly,
derivatives are finite differences. Sizes are capped on purpose.
"""

from __future__ import annotations

import itertools
import math
import warnings
from typing import NamedTuple

import numpy as np

WICK_MAX = 6
RESONANT_MAX_N = 16
JACOBIAN_MAX_N = 4


class PairingSum(NamedTuple):
    value: float
    n_pairings: int


def wick_enumeration(ns, ms, alpha: float) -> PairingSum:
    """``E[prod u(n_j) conj(u(m_j))]`` under the Gaussian measure, by summing over S_l."""
    ns, ms = list(ns), list(ms)
    if len(ns) != len(ms):
        raise ValueError("ns and ms must have equal length")
    if len(ns) > WICK_MAX:
        raise ValueError(f"at most {WICK_MAX} pairs supported")
    total, count = 0.0, 0
    for perm in itertools.permutations(range(len(ns))):
        if all(ms[j] == ns[perm[j]] for j in range(len(ns))):
            count += 1
            total += math.prod(1.0 / (1.0 + abs(n) ** (2 * alpha)) for n in ns)
    return PairingSum(total, count)


def _modes(u):
    u = np.asarray(u, dtype=complex)
    n = (u.size - 1) // 2
    return n, {k: u[k + n] for k in range(-n, n + 1)}


def resonant_sum(u, params=None) -> float:
    """Sum of ``u(j1) u(j2) conj(u(j3) u(j4))`` over resonant quadruples.

    A quadruple with ``j1 + j2 = j3 + j4`` is resonant when ``{j1, j2} = {j3, j4}``.
    """
    n, c = _modes(u)
    if n > RESONANT_MAX_N:
        raise ValueError(f"resonant_sum enumerates O(N^3) terms; N <= {RESONANT_MAX_N}")
    total = 0j
    for j1 in range(-n, n + 1):
        for j2 in range(-n, n + 1):
            for j3 in range(-n, n + 1):
                j4 = j1 + j2 - j3
                if abs(j4) > n:
                    continue
                if sorted((j1, j2)) == sorted((j3, j4)):
                    total += c[j1] * c[j2] * np.conj(c[j3]) * np.conj(c[j4])
    return float(total.real)


def quartic_sum(u, select=None) -> complex:
    """``sum u(n1) u(n2) conj(u(m1) u(m2))`` over ``n1 + n2 = m1 + m2``.

    ``select(n1, n2, m1, m2)`` may restrict the quadruples.
    """
    n, c = _modes(u)
    total = 0j
    rng = range(-n, n + 1)
    for n1, n2, m1 in itertools.product(rng, rng, rng):
        m2 = n1 + n2 - m1
        if abs(m2) > n or (select is not None and not select(n1, n2, m1, m2)):
            continue
        total += c[n1] * c[n2] * np.conj(c[m1]) * np.conj(c[m2])
    return total


def generator_value(u, alpha: float, sigma: int) -> complex:
    """F_N by enumeration, with exact rational divisors when ``alpha = 1``."""
    n, c = _modes(u)
    total = 0j
    rng = range(-n, n + 1)
    for n1, n2, m1 in itertools.product(rng, rng, rng):
        m2 = n1 + n2 - m1
        if abs(m2) > n:
            continue
        phi = (abs(n1) ** (2 * alpha) + abs(n2) ** (2 * alpha)
               - abs(m1) ** (2 * alpha) - abs(m2) ** (2 * alpha))
        if sorted((n1, n2)) == sorted((m1, m2)):
            continue
        total += sigma / (2j * phi) * c[n1] * c[n2] * np.conj(c[m1]) * np.conj(c[m2])
    return total


def fd_gradient(f, u, h: float | None = None) -> np.ndarray:
    """Wirtinger gradient ``(df/dRe + i df/dIm) / 2`` by central differences."""
    u = np.asarray(u, dtype=complex)
    if h is None:
        h = 1e-5 * (1.0 + np.linalg.norm(u))
    if h <= 0:
        raise ValueError("h must be positive")
    out = np.zeros_like(u)
    for k in range(u.size):
        parts = []
        for direction in (1.0, 1j):
            e = np.zeros_like(u)
            e[k] = direction * h
            fp, fm = f(u + e), f(u - e)
            if not (np.isfinite(fp) and np.isfinite(fm)):
                coord = 2 * k + (direction == 1j)
                raise ArithmeticError(f"non-finite difference at real coordinate {coord}")
            parts.append((fp - fm) / (2 * h))
        out[k] = 0.5 * (parts[0] + 1j * parts[1])
    return out


def jacobian_matrix(t, u, params, cfg=None, h: float | None = None) -> np.ndarray:
    """Real ``2(2N+1)`` square Jacobian of ``u -> flow_t(u)`` by central differences."""
    from .flow import IntegratorConfig, flow_states
    if cfg is None:
        cfg = IntegratorConfig(method="rk4_fixed", dt=1e-3)
    u = np.asarray(u, dtype=complex)
    m = u.size
    if (m - 1) // 2 > JACOBIAN_MAX_N:
        raise ValueError(f"dense Jacobian limited to N <= {JACOBIAN_MAX_N}")
    if h is None:
        h = 1e-5 * (1.0 + np.linalg.norm(u))
    x = np.concatenate([u.real, u.imag])
    probes = []
    for k in range(2 * m):
        for sgn in (1.0, -1.0):
            xp = x.copy()
            xp[k] += sgn * h
            probes.append(xp[:m] + 1j * xp[m:])
    out, *_ = flow_states(np.array(probes), t, params, cfg)
    real = np.concatenate([out.real, out.imag], axis=1)
    return ((real[0::2] - real[1::2]) / (2 * h)).T


def jacobian_det(t, u, params, cfg=None, h: float | None = None) -> float:
    """Volume factor of the time-``t`` flow at ``u``."""
    det = float(np.linalg.det(jacobian_matrix(t, u, params, cfg, h)))
    if not 1e-3 <= abs(det) <= 1e3:
        warnings.warn(f"ill-conditioned Jacobian determinant {det:.3e}")
    return det
