"""Seeded Gaussian sampling, ball restriction, Gibbs weights and MC estimates.

Draw ``i`` of stream ``(seed, stream)`` is a pure function of those three
integers: it reads a fixed block of Philox4x64 output starting at counter
``i * block``. Splitting a run into chunks or across workers therefore
reproduces the same draws bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import ModelParams, l4_quartic, mass, write_states

MAX_LOG_WEIGHT = 700.0
MIN_ACCEPTANCE = 1e-3
DEFAULT_CHUNK = 8192


class LowAcceptance(RuntimeError):
    pass


class WeightOverflow(FloatingPointError):
    pass


class NonFiniteObservable(ArithmeticError):
    pass


@dataclass
class SampleBatch:
    states: np.ndarray
    weights: np.ndarray
    in_ball: np.ndarray
    seed: int
    stream_id: int
    start: int = 0

    def __len__(self):
        return self.states.shape[0]

    def export(self, path, params: ModelParams) -> None:
        """Binary state records plus a ``<path>.json`` sidecar manifest."""
        write_states(path, self.states)
        side = {"seed": self.seed, "stream": self.stream_id, "start": self.start,
                "count": len(self), "params": params.to_dict()}
        with open(str(path) + ".json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(side, fh, indent=2)


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n_samples: int
    n_accepted: int
    seed: int

    @property
    def acceptance(self) -> float:
        return self.n_accepted / self.n_samples if self.n_samples else 0.0

    def to_dict(self) -> dict:
        return {"estimate": self.mean, "stderr": self.stderr, "n_samples": self.n_samples,
                "n_accepted": self.n_accepted, "acceptance": self.acceptance,
                "seed": self.seed}


def stream_id(*parts) -> int:
    """Stable 63-bit stream id from labels such as an experiment name."""
    h = hashlib.blake2b("/".join(map(str, parts)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little") >> 1


def _block(n_trunc: int) -> int:
    normals = 2 * (2 * n_trunc + 1)
    return 4 * ((normals + 3) // 4)


def standard_normals(seed: int, stream: int, start: int, count: int, n_normals: int,
                     block: int) -> np.ndarray:
    bitgen = np.random.Philox(key=[seed & (2**64 - 1), stream & (2**64 - 1)])
    bitgen.advance(start * block // 4)
    raw = bitgen.random_raw(count * block).reshape(count, block)
    return _kernels.box_muller(raw, n_normals)


def gaussian_states(params: ModelParams, start: int, count: int, seed: int,
                    stream: int = 0) -> np.ndarray:
    """Rows ``start .. start+count-1`` of the seeded Gaussian stream.

    ``u(n) = g_n / sqrt(1 + |n|^{2 alpha})`` with complex standard normal
    ``g_n`` (real and imaginary parts of variance 1/2).
    """
    m = params.size
    z = standard_normals(seed, stream, start, count, 2 * m, _block(params.n_trunc))
    n = np.abs(np.arange(-params.n_trunc, params.n_trunc + 1)).astype(float)
    scale = np.sqrt(0.5 / (1.0 + n ** (2.0 * params.alpha)))
    return (z[:, 0::2] + 1j * z[:, 1::2]) * scale


def gibbs_log_weight(u, params: ModelParams):
    return -0.5 * params.sigma * l4_quartic(u)


def gibbs_weight(u, params: ModelParams):
    """``exp(-sigma/2 ||u||_4^4)``, unnormalised; raises above ``e**700``."""
    lw = np.asarray(gibbs_log_weight(u, params))
    if np.any(lw > MAX_LOG_WEIGHT):
        raise WeightOverflow(f"log Gibbs weight {lw.max():.1f} exceeds {MAX_LOG_WEIGHT}")
    w = np.exp(lw)
    return float(w) if w.ndim == 0 else w


def in_ball(u, params: ModelParams):
    return mass(u) <= params.radius ** 2


def sample_gaussian(params: ModelParams, count: int, seed: int, stream: int = 0,
                    start: int = 0) -> SampleBatch:
    if count < 1:
        raise ValueError("count must be >= 1")
    states = gaussian_states(params, start, count, seed, stream)
    ball = in_ball(states, params)
    lw = gibbs_log_weight(states, params)
    if np.any(lw[ball] > MAX_LOG_WEIGHT):
        raise WeightOverflow(f"log Gibbs weight {lw[ball].max():.1f} exceeds {MAX_LOG_WEIGHT}")
    # out-of-ball weights are never used; clipped so focusing draws stay finite
    weights = np.exp(np.minimum(lw, MAX_LOG_WEIGHT))
    return SampleBatch(states, weights, ball, seed, stream, start)


def _chunks(count: int, chunk: int):
    return [(s, min(chunk, count - s)) for s in range(0, count, chunk)]


def map_chunks(fn, count: int, workers: int = 1, chunk: int = DEFAULT_CHUNK) -> list:
    """Apply ``fn(start, size)`` over fixed-size chunks, results in chunk order.

    Chunk boundaries depend only on ``count`` and ``chunk``, never on
    ``workers``.
    """
    jobs = _chunks(count, chunk)
    if workers <= 1:
        return [fn(s, k) for s, k in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def summarize(values: np.ndarray, n_accepted: int, seed: int) -> MCEstimate:
    """Mean and standard error of per-draw values (zeros for rejected draws)."""
    n = values.size
    mean = float(np.sum(values) / n)
    stderr = float(np.std(values, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return MCEstimate(mean, stderr, n, int(n_accepted), seed)


def check_acceptance(n_accepted: int, count: int, params: ModelParams) -> None:
    if n_accepted < MIN_ACCEPTANCE * count:
        raise LowAcceptance(f"only {n_accepted}/{count} draws fell in the ball of radius "
                            f"{params.radius} at N={params.n_trunc}")


def weighted_values(f, params: ModelParams, count: int, seed: int, stream: int = 0,
                    workers: int = 1, chunk: int = DEFAULT_CHUNK, gibbs: bool = True):
    """Per-draw ``1_ball * weight * f(u)`` and the acceptance count.

    ``f`` receives an ``(m, 2N+1)`` array of in-ball states and returns ``m``
    values (complex values are allowed).
    """

    def work(start, size):
        b = sample_gaussian(params, size, seed, stream, start)
        idx = np.flatnonzero(b.in_ball)
        out = np.zeros(size, dtype=complex)
        if idx.size:
            fv = np.asarray(f(b.states[idx]), dtype=complex)
            bad = ~np.isfinite(fv)
            if bad.any():
                i = start + int(idx[np.flatnonzero(bad)[0]])
                raise NonFiniteObservable(f"non-finite observable at seed={seed}, "
                                          f"stream={stream}, index={i}")
            out[idx] = (b.weights[idx] if gibbs else 1.0) * fv
        return out, idx.size

    parts = map_chunks(work, count, workers, chunk)
    values = np.concatenate([p[0] for p in parts])
    return values, sum(p[1] for p in parts)


def estimate(f, params: ModelParams, count: int, seed: int, stream: int = 0,
             workers: int = 1, chunk: int = DEFAULT_CHUNK) -> MCEstimate:
    """Importance-sampling estimate of ``int f d rho_N``.

    The Gibbs measure is not normalised, so ``f = 1`` estimates its total mass.
    """
    values, n_acc = weighted_values(f, params, count, seed, stream, workers, chunk)
    check_acceptance(n_acc, count, params)
    if np.any(values.imag != 0):
        raise ValueError("estimate takes a real observable")
    return summarize(values.real, n_acc, seed)
