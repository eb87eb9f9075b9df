import json

import numpy as np
import pytest

from birkhoff_gibbs.core import ModelParams, l4_quartic, mass, read_states
from birkhoff_gibbs.measure import (LowAcceptance, NonFiniteObservable, WeightOverflow, estimate,
                                    gaussian_states, gibbs_weight, in_ball, map_chunks,
                                    sample_gaussian, stream_id, weighted_values)


def test_second_moments():
    p = ModelParams(1.0, 1, 8)
    states = gaussian_states(p, 0, 100_000, seed=1)
    sq = np.abs(states) ** 2
    expect = 1.0 / (1.0 + np.abs(np.arange(-8, 9)) ** 2.0)
    se = sq.std(axis=0, ddof=1) / np.sqrt(sq.shape[0])
    assert np.all(np.abs(sq.mean(axis=0) - expect) <= 5 * se)
    for k in (0, 1, 4):
        assert abs(sq[:, 8 + k].mean() - expect[8 + k]) <= 4 * se[8 + k]
    # E[u(n) u(m)] without conjugation, including n = m
    for a, b in [(8, 8), (9, 7), (10, 12), (3, 3)]:
        prod = states[:, a] * states[:, b]
        for part in (prod.real, prod.imag):
            assert abs(part.mean()) <= 5 * part.std(ddof=1) / np.sqrt(part.size)


def test_real_and_imaginary_parts_split_variance():
    p = ModelParams(0.8, 1, 0)
    z = gaussian_states(p, 0, 100_000, seed=3)[:, 0]
    assert np.var(z.real) == pytest.approx(0.5, abs=0.01)
    assert np.var(z.imag) == pytest.approx(0.5, abs=0.01)


def test_determinism_and_counter_offsets():
    p = ModelParams(0.9, -1, 5)
    a = gaussian_states(p, 0, 1000, seed=42, stream=7)
    assert np.array_equal(a, gaussian_states(p, 0, 1000, seed=42, stream=7))
    assert np.array_equal(a[600:], gaussian_states(p, 600, 400, seed=42, stream=7))
    assert not np.array_equal(a, gaussian_states(p, 0, 1000, seed=42, stream=8))
    assert not np.array_equal(a, gaussian_states(p, 0, 1000, seed=43, stream=7))


def test_stream_id_is_stable():
    assert stream_id("moments") == stream_id("moments")
    assert stream_id("exp-moment", 4) != stream_id("exp-moment", 8)
    assert 0 <= stream_id("x") < 2 ** 63


def test_estimate_independent_of_chunking_and_workers():
    p = ModelParams(1.0, 1, 3)
    f = lambda s: mass(s)
    ref = estimate(f, p, 5000, seed=9, chunk=5000)
    for workers, chunk in [(1, 128), (3, 777), (4, 1)]:
        got = estimate(f, p, 5000, seed=9, workers=workers, chunk=chunk)
        assert (got.mean, got.stderr, got.n_accepted) == (ref.mean, ref.stderr, ref.n_accepted)


def test_map_chunks_keeps_order():
    out = map_chunks(lambda s, k: (s, k), 10, workers=3, chunk=3)
    assert out == [(0, 3), (3, 3), (6, 3), (9, 1)]


def test_gibbs_weight_examples():
    p = ModelParams(1.0, 1, 2)
    assert gibbs_weight(np.zeros(5, complex), p) == 1.0
    a = 0.9 + 0.2j
    u = np.zeros(5, complex)
    u[3] = a
    assert gibbs_weight(u, p) == pytest.approx(np.exp(-abs(a) ** 4 / 2))
    with pytest.raises(WeightOverflow):
        gibbs_weight(np.full(5, 10.0 + 0j), ModelParams(1.0, -1, 2))


def test_sample_batch_invariants(tmp_path):
    p = ModelParams(1.0, 1, 2)
    b = sample_gaussian(p, 500, seed=2)
    assert np.all(b.weights > 0) and np.all(b.weights <= 1)
    assert np.array_equal(b.in_ball, mass(b.states) <= 1.0)
    assert np.array_equal(in_ball(b.states, p), b.in_ball)
    b.export(tmp_path / "batch.bin", p)
    back = read_states(tmp_path / "batch.bin")
    assert np.array_equal(np.array([s.coeffs for s in back]), b.states)
    side = json.loads((tmp_path / "batch.bin.json").read_text())
    assert side["seed"] == 2 and side["params"]["N"] == 2
    with pytest.raises(ValueError):
        sample_gaussian(p, 0, seed=2)


def test_one_mode_quadrature_oracle():
    # scipy: int_0^inf exp(-x - x^2/2) dx, |g|^2 ~ Exp(1) at N = 0
    p = ModelParams(1.0, 1, 0, radius=1e6)
    est = estimate(lambda s: np.ones(s.shape[0]), p, 200_000, seed=4)
    assert abs(est.mean - 0.6556795424187986) <= 4 * est.stderr


def test_trivial_observables():
    p = ModelParams(1.0, 1, 2)
    zero = estimate(lambda s: np.zeros(s.shape[0]), p, 1000, seed=1)
    assert zero.mean == 0.0 and zero.stderr == 0.0
    a = estimate(mass, p, 50_000, seed=1)
    b = estimate(mass, p, 50_000, seed=2)
    assert abs(a.mean - b.mean) <= 4 * np.hypot(a.stderr, b.stderr)
    assert 0 < a.acceptance < 1 and a.n_samples == 50_000


def test_focusing_weight_stable_in_n():
    rows = [estimate(lambda s: np.ones(s.shape[0]), ModelParams(1.0, -1, n), 50_000, seed=6)
            for n in (4, 8)]
    assert all(np.isfinite(r.mean) for r in rows)
    assert all(r.mean > 0 for r in rows)


def test_low_acceptance_and_non_finite():
    with pytest.raises(LowAcceptance):
        estimate(mass, ModelParams(1.0, 1, 16, radius=0.3), 2000, seed=1)
    p = ModelParams(1.0, 1, 1)

    def bad(s):
        out = np.ones(s.shape[0])
        out[0] = np.nan
        return out
    with pytest.raises(NonFiniteObservable, match="seed=5"):
        estimate(bad, p, 100, seed=5)


def test_unweighted_values():
    p = ModelParams(1.0, 1, 1)
    vals, n_acc = weighted_values(l4_quartic, p, 300, seed=8, gibbs=False)
    b = sample_gaussian(p, 300, seed=8)
    expect = np.where(b.in_ball, l4_quartic(b.states), 0.0)
    assert n_acc == b.in_ball.sum()
    assert np.allclose(vals.real, expect, rtol=0, atol=0)
