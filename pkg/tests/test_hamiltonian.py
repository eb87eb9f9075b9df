import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birkhoff_gibbs import oracle
from birkhoff_gibbs.core import FourierState, ModelParams, hs_norm, mass
from birkhoff_gibbs.flow import IntegratorConfig, flow_map
from birkhoff_gibbs.hamiltonian import (ImaginaryResidualError, energy, energy_gradient,
                                        f_n_complex, f_n_gradient, f_n_value, g_n_observable,
                                        grad_l4, hamiltonian, homological_check, kinetic,
                                        resonant_quartic, vector_field, vector_field_naive)
from birkhoff_gibbs.core import l4_quartic

from conftest import random_state

PARAM_GRID = [(1, 1.0, 1), (2, 0.92, -1), (4, 0.95, 1), (5, 1.0, -1), (8, 0.92, 1)]


def test_energy_examples():
    p = ModelParams(1.0, 1, 2)
    assert energy(FourierState.zeros(2), p).total == 0.0
    u = FourierState.from_modes(2, {2: 1.0})
    e = energy(u, p)
    assert (e.kinetic, e.quartic, e.total) == (4.0, 1.0, 4.5)
    assert kinetic(FourierState.from_modes(2, {0: 3.0}), 1.0) == 0.0
    v = FourierState.from_modes(2, {1: 1.0, -2: 0.5j})
    assert kinetic(v, 1.0) == pytest.approx(1 + 4 * 0.25)
    assert hamiltonian(np.stack([u.coeffs, v.coeffs]), p)[0] == pytest.approx(e.total)


def test_energy_rejects_wrong_truncation():
    with pytest.raises(ValueError):
        energy(FourierState.zeros(3), ModelParams(1.0, 1, 2))


def test_f_n_vanishes_on_zero_and_single_modes():
    p = ModelParams(0.9, -1, 3)
    assert f_n_value(FourierState.zeros(3), p) == 0.0
    for k in range(-3, 4):
        u = FourierState.from_modes(3, {k: 0.7 - 0.2j})
        assert f_n_value(u, p) == 0.0
        assert np.all(vector_field(u, p) == 0)


def test_two_mode_vector_field_example():
    a, b = 0.3 + 0.4j, -0.5 + 0.1j
    for sigma in (1, -1):
        p = ModelParams(1.0, sigma, 1)
        u = FourierState.from_modes(1, {0: a, 1: b})
        dot = vector_field(u, p)
        assert dot[0] == pytest.approx(-sigma / 2 * a * a * np.conj(b), abs=1e-15)
        assert dot[1] == 0 and dot[2] == 0


@pytest.mark.parametrize("n,alpha,sigma", PARAM_GRID)
def test_vector_field_matches_naive_loop(rng, n, alpha, sigma):
    p = ModelParams(alpha, sigma, n)
    u = random_state(rng, n)
    fast, slow = vector_field(u, p), vector_field_naive(u, p)
    assert np.max(np.abs(fast - slow)) <= 1e-12 * (1 + np.max(np.abs(slow)))


@pytest.mark.parametrize("n,alpha,sigma", PARAM_GRID)
def test_f_n_matches_enumeration_and_is_real(rng, n, alpha, sigma):
    p = ModelParams(alpha, sigma, n)
    u = random_state(rng, n)
    z = f_n_complex(u, p)
    ref = oracle.generator_value(u, alpha, sigma)
    assert abs(z - ref) <= 1e-12 * max(1.0, abs(ref))
    assert abs(z.imag) <= 1e-12 * max(1.0, abs(z))


@pytest.mark.parametrize("theta", [np.pi / 7, np.pi / 2])
def test_phase_invariance_examples(rng, theta):
    p = ModelParams(1.0, -1, 4)
    u = random_state(rng, 4)
    v = np.exp(1j * theta) * u
    assert f_n_value(v, p) == pytest.approx(f_n_value(u, p), rel=1e-13)
    assert energy(v, p).total == pytest.approx(energy(u, p).total, rel=1e-14)


def test_f_n_imaginary_residual_guard(rng):
    p = ModelParams(1.0, 1, 3)
    u = random_state(rng, 3)
    with pytest.raises(ImaginaryResidualError):
        f_n_value(u, p, tol=0.0 if abs(f_n_complex(u, p).imag) > 0 else -1.0)


@pytest.mark.parametrize("n,alpha,sigma", PARAM_GRID[:4])
def test_gradients_match_finite_differences(rng, n, alpha, sigma):
    p = ModelParams(alpha, sigma, n)
    u = random_state(rng, n, scale=0.5)
    fd = oracle.fd_gradient(lambda v: f_n_value(v, p), u)
    assert np.max(np.abs(fd - f_n_gradient(u, p))) < 1e-8
    fd = oracle.fd_gradient(lambda v: float(l4_quartic(v)), u)
    assert np.max(np.abs(fd - grad_l4(u))) < 1e-8
    fd = oracle.fd_gradient(lambda v: float(hamiltonian(v, p)), u)
    assert np.max(np.abs(fd - energy_gradient(u, p))) < 1e-8


@pytest.mark.parametrize("n,alpha,sigma", PARAM_GRID[:3])
def test_g_n_is_time_derivative_of_energy(n, alpha, sigma):
    rng = np.random.default_rng(n)
    p = ModelParams(alpha, sigma, n)
    u = random_state(rng, n, unit_mass=True)
    cfg = IntegratorConfig(rel_tol=1e-13)
    h = 1e-4
    fwd = hamiltonian(flow_map(u, h, p, cfg).final_state, p)
    bwd = hamiltonian(flow_map(u, -h, p, cfg).final_state, p)
    assert (fwd - bwd) / (2 * h) == pytest.approx(g_n_observable(u, p), rel=1e-6, abs=1e-9)


def test_g_n_batch_matches_rows(rng):
    p = ModelParams(0.95, -1, 3)
    states = np.array([random_state(rng, 3) for _ in range(4)])
    batch = g_n_observable(states, p)
    assert np.allclose(batch, [g_n_observable(s, p) for s in states], rtol=1e-14, atol=0)


@pytest.mark.parametrize("n,alpha,sigma", PARAM_GRID)
def test_homological_identity(rng, n, alpha, sigma):
    p = ModelParams(alpha, sigma, n)
    for _ in range(5):
        hc = homological_check(random_state(rng, n), p)
        assert hc.residual < 1e-10


def test_homological_single_mode_example():
    a = 0.8 + 0.1j
    for sigma in (1, -1):
        p = ModelParams(1.0, sigma, 2)
        hc = homological_check(FourierState.from_modes(2, {1: a}), p)
        assert hc.lhs == pytest.approx(sigma / 2 * abs(a) ** 4)
        assert hc.rhs_exact == pytest.approx(sigma / 2 * abs(a) ** 4)
        assert hc.rhs_paper == pytest.approx(sigma * abs(a) ** 4)


def test_resonant_quartic_closed_form(rng):
    for n in (0, 2, 6):
        u = random_state(rng, n)
        assert resonant_quartic(u) == pytest.approx(oracle.resonant_sum(u), rel=1e-12)


def test_field_bound_ratio_does_not_grow_with_n():
    # ||X(u)||_{H^s} / (||u||_{H^s}^2 ||u||_{L^2}) over isotropic draws
    for alpha in (0.8, 0.9, 1.0):
        for s in (0.0, 2 - 2 * alpha):
            peaks = []
            for n in (8, 16, 32):
                p = ModelParams(alpha, 1, n)
                rng = np.random.default_rng(n)
                states = rng.normal(size=(1000, 2 * n + 1)) + 1j * rng.normal(size=(1000, 2 * n + 1))
                x = vector_field(states, p)
                ratio = hs_norm(x, s) / (hs_norm(states, s) ** 2 * np.sqrt(mass(states)))
                peaks.append(float(ratio.max()))
            assert np.all(np.isfinite(peaks))
            assert all(b <= a for a, b in zip(peaks, peaks[1:])), peaks


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 2 * np.pi), st.floats(0.1, 3.0), st.integers(0, 2 ** 31))
def test_symmetries(theta, lam, seed):
    rng = np.random.default_rng(seed)
    p = ModelParams(0.93, 1, 3)
    u = random_state(rng, 3, scale=0.5)
    phase = np.exp(1j * theta)
    assert f_n_value(phase * u, p) == pytest.approx(f_n_value(u, p), rel=1e-9, abs=1e-12)
    assert hamiltonian(phase * u, p) == pytest.approx(hamiltonian(u, p), rel=1e-12)
    x = vector_field(u, p)
    assert np.allclose(vector_field(phase * u, p), phase * x, rtol=1e-12, atol=1e-14)
    assert np.allclose(vector_field(lam * u, p), lam ** 3 * x, rtol=1e-12, atol=1e-14)
