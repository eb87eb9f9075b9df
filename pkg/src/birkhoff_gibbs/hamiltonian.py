"""Energies, the normal-form generator F_N, its vector field, and brackets.

Conventions. Phase space is ``C^{2N+1}`` with Wirtinger derivative
``d/d conj(u(n)) = (d/dRe + i d/dIm) / 2``. A real Hamiltonian ``G``
generates ``du/dt = i dG/d conj(u)``, and ``{G, F}`` is the derivative of
``G`` along the flow of ``F``. Under this convention the generator

    F_N = sum_{nonresonant n1+n2=m1+m2} sigma / (2i Phi) u(n1) u(n2) conj(u(m1) u(m2))

has vector field ``sum sigma/Phi u(j1) u(j2) conj(u(j3))`` and satisfies
``{kinetic, F_N} = -sigma/2 * (nonresonant quartic sum)``, which is the sign
that removes the nonresonant quartic terms from the energy.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import _kernels
from .core import (FourierState, ModelParams, as_coeffs, frequencies, l4_quartic,
                   mass, n_of, reciprocal_divisors)

IMAG_TOL = 1e-10


class EnergyBreakdown(NamedTuple):
    kinetic: float
    quartic: float
    total: float


class HomologicalCheck(NamedTuple):
    lhs: float
    rhs_exact: float
    rhs_paper: float

    @property
    def residual(self) -> float:
        scale = max(abs(self.rhs_exact), abs(self.lhs), 1e-300)
        return abs(self.lhs - self.rhs_exact) / scale


class ImaginaryResidualError(ArithmeticError):
    """F_N came out with a non-negligible imaginary part."""


def _checked(u, params: ModelParams) -> np.ndarray:
    c = as_coeffs(u)
    if n_of(c) != params.n_trunc:
        raise ValueError(f"state has N={n_of(c)} but params.n_trunc={params.n_trunc}")
    return np.ascontiguousarray(c)


def kinetic(u, alpha: float) -> float | np.ndarray:
    c = as_coeffs(u)
    om = frequencies(n_of(c), alpha)
    return np.sum(om * (c.real ** 2 + c.imag ** 2), axis=-1)


def energy(u, params: ModelParams) -> EnergyBreakdown:
    c = _checked(u, params)
    k = float(kinetic(c, params.alpha))
    q = float(l4_quartic(c))
    return EnergyBreakdown(k, q, k + 0.5 * params.sigma * q)


def hamiltonian(u, params: ModelParams) -> float | np.ndarray:
    """Total energy, vectorised over leading axes."""
    c = as_coeffs(u)
    return kinetic(c, params.alpha) + 0.5 * params.sigma * l4_quartic(c)


def f_n_complex(u, params: ModelParams) -> complex:
    c = _checked(u, params)
    return complex(_kernels.fn_row(c, reciprocal_divisors(params.n_trunc, params.alpha),
                                   float(params.sigma)))


def f_n_value(u, params: ModelParams, tol: float = IMAG_TOL) -> float:
    """The generator F_N(u).

    The quadruple sum is real by symmetry; an imaginary part larger than
    ``tol`` relative to the modulus raises ImaginaryResidualError.
    """
    z = f_n_complex(u, params)
    if abs(z.imag) > tol * max(abs(z), 1e-300) and abs(z.imag) > 1e-300:
        raise ImaginaryResidualError(f"Im F_N = {z.imag:.3e} (|F_N| = {abs(z):.3e})")
    return z.real


def f_n_imag_residual(u, params: ModelParams) -> float:
    z = f_n_complex(u, params)
    return abs(z.imag) / max(abs(z), 1e-300) if z != 0 else 0.0


def vector_field(u, params: ModelParams) -> np.ndarray:
    """``du/dt`` of the truncated normal-form flow; batches along leading axes."""
    c = as_coeffs(u)
    if n_of(c) != params.n_trunc:
        raise ValueError(f"state has N={n_of(c)} but params.n_trunc={params.n_trunc}")
    table = reciprocal_divisors(params.n_trunc, params.alpha)
    flat = np.ascontiguousarray(c.reshape(-1, c.shape[-1]))
    return _kernels.field_batch(flat, table, float(params.sigma)).reshape(c.shape)


def vector_field_naive(u, params: ModelParams) -> np.ndarray:
    """Direct triple loop over ``(j1, j2, j3)``; slow, for cross-checking."""
    c = _checked(u, params)
    n_max = params.n_trunc
    om = frequencies(n_max, params.alpha)
    out = np.zeros_like(c)
    for j1 in range(-n_max, n_max + 1):
        for j2 in range(-n_max, n_max + 1):
            for j3 in range(-n_max, n_max + 1):
                n = j1 + j2 - j3
                if abs(n) > n_max or j1 == j3 or j2 == j3:
                    continue
                phi = om[j1 + n_max] + om[j2 + n_max] - om[j3 + n_max] - om[n + n_max]
                out[n + n_max] += (params.sigma / phi * c[j1 + n_max] * c[j2 + n_max]
                                   * np.conj(c[j3 + n_max]))
    return out


def f_n_gradient(u, params: ModelParams) -> np.ndarray:
    """``dF_N/d conj(u)``, i.e. the vector field undone by the factor ``i``."""
    return -1j * vector_field(u, params)


def grad_l4(u) -> np.ndarray:
    """``d/d conj(u(n))`` of the quartic norm: ``2 sum u(n1) u(n2) conj(u(m1))``."""
    c = np.ascontiguousarray(as_coeffs(u))
    if c.ndim == 1:
        out = np.empty_like(c)
        _kernels.grad_l4_row(c, out)
        return out
    flat = c.reshape(-1, c.shape[-1])
    out = np.empty_like(flat)
    for k in range(flat.shape[0]):
        _kernels.grad_l4_row(flat[k], out[k])
    return out.reshape(c.shape)


def energy_gradient(u, params: ModelParams) -> np.ndarray:
    c = as_coeffs(u)
    om = frequencies(n_of(c), params.alpha)
    return om * c + 0.5 * params.sigma * grad_l4(c)


def g_n_observable(u, params: ModelParams) -> float | np.ndarray:
    """``d/dt H[flow_t(u)]`` at ``t = 0`` by the chain rule.

    Works on a single state or a batch (leading axes).
    """
    c = as_coeffs(u)
    if n_of(c) != params.n_trunc:
        raise ValueError(f"state has N={n_of(c)} but params.n_trunc={params.n_trunc}")
    table = reciprocal_divisors(params.n_trunc, params.alpha)
    om = frequencies(params.n_trunc, params.alpha)
    if c.ndim == 1:
        return float(_kernels.gn_row(np.ascontiguousarray(c), table, om, float(params.sigma)))
    flat = np.ascontiguousarray(c.reshape(-1, c.shape[-1]))
    return _kernels.gn_batch(flat, table, om, float(params.sigma)).reshape(c.shape[:-1])


def bracket_along_flow(grad_g: np.ndarray, u, params: ModelParams) -> float:
    """``{G, F_N}(u)`` from ``dG/d conj(u)``: ``2 Re sum conj(dG) * du/dt``."""
    dot = vector_field(u, params)
    return float(2.0 * np.sum(grad_g.real * dot.real + grad_g.imag * dot.imag))


def resonant_quartic(u) -> float:
    """Resonant part of the quartic sum, ``2 mass^2 - sum |u(j)|^4`` in closed form."""
    c = as_coeffs(u)
    return float(2.0 * mass(c) ** 2 - np.sum(np.abs(c) ** 4))


def homological_check(u, params: ModelParams, resonant_sum=None) -> HomologicalCheck:
    """Both sides of ``{kinetic, F_N} + sigma/2 ||u||_4^4 = sigma/2 * resonant sum``.

    ``resonant_sum`` computes the right-hand quadruple sum; by default the
    brute-force enumeration from :mod:`birkhoff_gibbs.oracle` is used.
    ``rhs_paper`` is ``sigma * mass**2``, kept for comparison only.
    """
    if resonant_sum is None:
        from .oracle import resonant_sum
    c = _checked(u, params)
    om = frequencies(params.n_trunc, params.alpha)
    lhs = bracket_along_flow(om * c, c, params) + 0.5 * params.sigma * l4_quartic(c)
    rhs = 0.5 * params.sigma * resonant_sum(c, params)
    return HomologicalCheck(float(lhs), float(rhs), float(params.sigma * mass(c) ** 2))


def normal_form_energy(u, params: ModelParams) -> float:
    """Energy of the first-order normal form: kinetic plus the resonant quartic part."""
    c = as_coeffs(u)
    return float(kinetic(c, params.alpha) + 0.5 * params.sigma * resonant_quartic(c))


def normal_form_energy_mass(u, params: ModelParams) -> float:
    """Kinetic plus ``sigma/2 * mass**2``, an alternative constant that double counts the diagonal."""
    c = as_coeffs(u)
    return float(kinetic(c, params.alpha) + 0.5 * params.sigma * mass(c) ** 2)


__all__ = [
    "EnergyBreakdown", "HomologicalCheck", "ImaginaryResidualError", "FourierState",
    "kinetic", "energy", "hamiltonian", "f_n_value", "f_n_imag_residual",
    "vector_field", "vector_field_naive", "f_n_gradient", "grad_l4",
    "energy_gradient", "g_n_observable", "bracket_along_flow", "resonant_quartic",
    "homological_check", "normal_form_energy", "normal_form_energy_mass",
]
