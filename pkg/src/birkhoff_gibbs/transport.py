"""Transported Gibbs density and the measure-level experiments."""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import ModelParams, as_coeffs, hs_norm, l4_quartic, restrict
from .flow import FlowError, IntegratorConfig, fit_loglog_slope, flow_states, flow_with_observable
from .hamiltonian import g_n_observable, hamiltonian
from .measure import (DEFAULT_CHUNK, MAX_LOG_WEIGHT, MCEstimate, WeightOverflow,
                      check_acceptance, map_chunks, sample_gaussian, stream_id, summarize)

# ---------------------------------------------------------------------------
# sets


_NUM = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
_COORD = re.compile(r"^(re|im)\(\s*u\s*\[?\s*([-+]?\d+)\s*\]?\s*\)\s*(>|<)\s*" + _NUM + r"$")
_HS = re.compile(r"^hs\(\s*" + _NUM + r"\s*\)\s*<=?\s*" + _NUM + r"$")
_L4 = re.compile(r"^l4\s*<=?\s*" + _NUM + r"$")


@dataclass(frozen=True)
class SetPredicate:
    """A measurable set given by one inequality on the coefficients.

    ``coordinate_halfspace``: ``re u(n) > c`` (or ``<``, or ``im``);
    ``hs_ball``: ``||u||_{H^s} <= r``; ``l4_sublevel``: ``||u||_4^4 <= c``;
    ``everything``: the whole space.
    """

    kind: str
    mode: int = 0
    part: str = "re"
    op: str = ">"
    threshold: float = 0.0
    s: float = 0.0

    def margin(self, states) -> np.ndarray:
        """Signed distance-like margin; the set is ``margin > 0``."""
        c = as_coeffs(states)
        if self.kind == "everything":
            return np.full(c.shape[:-1], np.inf)
        if self.kind == "coordinate_halfspace":
            n = (c.shape[-1] - 1) // 2
            x = c[..., self.mode + n] if abs(self.mode) <= n else np.zeros(c.shape[:-1])
            x = np.real(x) if self.part == "re" else np.imag(x)
            return x - self.threshold if self.op == ">" else self.threshold - x
        if self.kind == "hs_ball":
            return self.threshold - hs_norm(c, self.s)
        if self.kind == "l4_sublevel":
            return self.threshold - l4_quartic(c)
        raise ValueError(f"unknown predicate kind {self.kind!r}")

    def __call__(self, states) -> np.ndarray:
        m = self.margin(states)
        if self.kind in ("hs_ball", "l4_sublevel"):
            return m >= 0
        return m > 0

    def text(self) -> str:
        if self.kind == "everything":
            return "all"
        if self.kind == "coordinate_halfspace":
            return f"{self.part}(u{self.mode}){self.op}{self.threshold:g}"
        if self.kind == "hs_ball":
            return f"hs({self.s:g})<={self.threshold:g}"
        return f"l4<={self.threshold:g}"


def parse_predicate(text: str) -> SetPredicate:
    """Parse ``re(u0)>0.1``, ``im(u[-1])<0``, ``hs(1)<=2``, ``l4<=0.5`` or ``all``."""
    t = text.strip().replace(" ", "")
    if t in ("all", "everything"):
        return SetPredicate("everything")
    if m := _COORD.match(t):
        return SetPredicate("coordinate_halfspace", mode=int(m[2]), part=m[1], op=m[3],
                            threshold=float(m[4]))
    if m := _HS.match(t):
        return SetPredicate("hs_ball", s=float(m[1]), threshold=float(m[2]))
    if m := _L4.match(t):
        return SetPredicate("l4_sublevel", threshold=float(m[1]))
    raise ValueError(f"cannot parse set predicate {text!r}")


# ---------------------------------------------------------------------------
# density


def log_density(u, t: float, params: ModelParams, cfg: IntegratorConfig = IntegratorConfig()):
    """``H[u] - H[flow_t(u)]``; batches along leading axes."""
    c = as_coeffs(u)
    if t == 0:
        return np.zeros(c.shape[:-1]) if c.ndim > 1 else 0.0
    fwd, *_ = flow_states(c, t, params, cfg)
    out = hamiltonian(c, params) - hamiltonian(fwd, params)
    return float(out) if c.ndim == 1 else out


def density(u, t: float, params: ModelParams, cfg: IntegratorConfig = IntegratorConfig()):
    """Radon-Nikodym factor ``exp(-int_0^t dH/dtau dtau)`` in endpoint form."""
    return np.exp(log_density(u, t, params, cfg))


def density_check(u, t: float, params: ModelParams, cfg: IntegratorConfig = IntegratorConfig()):
    """Endpoint density and its gap to the Simpson-quadrature form."""
    _, quad, diff = flow_with_observable(u, t, params, cfg)
    return math.exp(-diff), abs(quad - diff)


# ---------------------------------------------------------------------------
# change of variables


@dataclass
class TransportReport:
    lhs: MCEstimate
    rhs: MCEstimate
    difference: MCEstimate
    t: float
    predicate: SetPredicate
    z_score: float
    boundary_flagged: int = 0
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"t": self.t, "predicate": self.predicate.text(),
                "lhs": self.lhs.to_dict(), "rhs": self.rhs.to_dict(),
                "difference": self.difference.to_dict(), "z_score": self.z_score,
                "boundary_flagged": self.boundary_flagged}


class TransportAborted(FlowError):
    def __init__(self, msg, partial):
        super().__init__(msg)
        self.partial = partial


def verify_transport(predicate: SetPredicate | str, t: float, params: ModelParams, count: int,
                     seed: int, cfg: IntegratorConfig = IntegratorConfig(), stream: int | None = None,
                     workers: int = 1, chunk: int = DEFAULT_CHUNK,
                     boundary_band: float = 1e-7) -> TransportReport:
    """Monte Carlo check of ``rho(flow_t(A)) = int_A density_t d rho``.

    Membership in ``flow_t(A)`` is decided by flowing back to time ``-t``.
    Both sides use the same Gaussian draws and the standard error is the one
    of the per-draw difference. Draws whose backward image lies within
    ``boundary_band`` of the boundary of ``A`` are counted in
    ``boundary_flagged``.
    """
    if isinstance(predicate, str):
        predicate = parse_predicate(predicate)
    if count < 2:
        raise ValueError("count must be >= 2")
    if stream is None:
        stream = stream_id("transport-verify")

    def work(start, size):
        b = sample_gaussian(params, size, seed, stream, start)
        idx = np.flatnonzero(b.in_ball)
        lhs, rhs = np.zeros(size), np.zeros(size)
        flagged = 0
        if idx.size:
            u = b.states[idx]
            w = b.weights[idx]
            if t == 0:
                back, logd = u, np.zeros(idx.size)
            else:
                back, _, status, _ = flow_states(u, -t, params, cfg, raise_on_error=False)
                fwd, _, status_f, _ = flow_states(u, t, params, cfg, raise_on_error=False)
                bad = (status != 0) | (status_f != 0)
                if bad.any():
                    i = start + int(idx[np.flatnonzero(bad)[0]])
                    raise FlowError(f"flow failed for draw index {i} (seed={seed}, stream={stream})")
                logd = hamiltonian(u, params) - hamiltonian(fwd, params)
            lhs[idx] = w * predicate(back)
            rhs[idx] = w * np.exp(logd) * predicate(u)
            flagged = int(np.sum(np.abs(predicate.margin(back)) < boundary_band))
        return lhs, rhs, idx.size, flagged

    try:
        parts = map_chunks(work, count, workers, chunk)
    except FlowError as exc:
        raise TransportAborted(str(exc), {"seed": seed, "stream": stream, "t": t}) from exc
    lhs = np.concatenate([p[0] for p in parts])
    rhs = np.concatenate([p[1] for p in parts])
    n_acc = sum(p[2] for p in parts)
    check_acceptance(n_acc, count, params)
    le, re_, de = summarize(lhs, n_acc, seed), summarize(rhs, n_acc, seed), \
        summarize(lhs - rhs, n_acc, seed)
    gap = abs(le.mean - re_.mean)
    z = 0.0 if gap == 0 else (gap / de.stderr if de.stderr > 0 else math.inf)
    return TransportReport(le, re_, de, t, predicate, z, sum(p[3] for p in parts))


def roundtrip_mismatch(states, t: float, predicate: SetPredicate, params: ModelParams,
                       cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Rows where ``1_A(flow_{-t}(flow_t(u))) != 1_A(u)``."""
    fwd, *_ = flow_states(states, t, params, cfg)
    back, *_ = flow_states(fwd, -t, params, cfg)
    return predicate(back) != predicate(states)


# ---------------------------------------------------------------------------
# moments of the density exponent


def zeta(alpha: float) -> float:
    """Tail exponent of ``G_N``; the first branch is infinite at ``alpha = 1``."""
    second = 2.0 * alpha * (alpha + 1.0) / (4.0 - 4.0 * alpha ** 2 + 3.0 * alpha)
    if alpha == 1.0:
        return second
    return min(1.0 / 3.0 + (2.0 * alpha - 1.0) / (3.0 * (1.0 - alpha)), second)


def _in_ball_values(fn, params, count, seed, stream, workers, chunk):
    """``fn`` evaluated on in-ball draws, zeros elsewhere; ``fn`` may return columns."""

    def work(start, size):
        b = sample_gaussian(params, size, seed, stream, start)
        idx = np.flatnonzero(b.in_ball)
        vals = fn(b.states[idx]) if idx.size else None
        return idx, vals, size

    parts = map_chunks(work, count, workers, chunk)
    n_acc = sum(p[0].size for p in parts)
    check_acceptance(n_acc, count, params)
    return parts, n_acc


def _scatter(parts, column=None):
    out = []
    for idx, vals, size in parts:
        v = np.zeros(size)
        if idx.size:
            v[idx] = vals if column is None else vals[:, column]
        out.append(v)
    return np.concatenate(out)


def _root_estimate(values: np.ndarray, p: float, n_acc: int, seed: int) -> MCEstimate:
    """``E[values]**(1/p)`` with a delta-method standard error."""
    raw = summarize(values, n_acc, seed)
    mean = raw.mean ** (1.0 / p) if raw.mean > 0 else 0.0
    se = (raw.stderr * raw.mean ** (1.0 / p - 1.0) / p) if raw.mean > 0 else 0.0
    return MCEstimate(mean, se, raw.n_samples, raw.n_accepted, seed)


@dataclass
class MomentTable:
    rows: list
    slope: float | None
    reference: float


def gn_moments(params: ModelParams, p_list, count: int, seed: int, stream: int | None = None,
               workers: int = 1, chunk: int = DEFAULT_CHUNK) -> MomentTable:
    """``||G_N||_{L^p}`` under the ball-restricted Gaussian, for each ``p``.

    The fitted slope of ``log ||G_N||_p`` against ``log p`` is reported next
    to the reference ``1/zeta(alpha)``.
    """
    p_list = [float(p) for p in p_list]
    if any(p < 1 for p in p_list):
        raise ValueError("p must be >= 1")
    if stream is None:
        stream = stream_id("moments")
    parts, n_acc = _in_ball_values(lambda s: g_n_observable(s, params), params, count, seed,
                                   stream, workers, chunk)
    g = np.abs(_scatter(parts))
    rows = []
    for p in p_list:
        est = _root_estimate(g ** p, p, n_acc, seed)
        if est.mean > 0 and est.stderr > 0.5 * est.mean:
            warnings.warn(f"heavy tail: p={p:g} moment has stderr above 50% of its value")
        rows.append((p, est))
    slope = None
    if len(rows) > 1 and all(r[1].mean > 0 for r in rows):
        slope = fit_loglog_slope([r[0] for r in rows], [r[1].mean for r in rows])
    return MomentTable(rows, slope, 1.0 / zeta(params.alpha))


def gn_truncation_decay(params: ModelParams, m_list, count: int, seed: int,
                        stream: int | None = None, workers: int = 1,
                        chunk: int = DEFAULT_CHUNK) -> MomentTable:
    """``||G_N - G_M||_{L^2}`` on common draws at truncation ``N``.

    The fitted log-log slope against ``M`` is reported next to ``-(2 alpha - 1)``.
    """
    m_list = [int(m) for m in m_list]
    if any(m > params.n_trunc or m < 0 for m in m_list):
        raise ValueError("every M must satisfy 0 <= M <= N")
    if stream is None:
        stream = stream_id("decay")

    def fn(states):
        g_n = g_n_observable(states, params)
        cols = [g_n - g_n_observable(np.ascontiguousarray(restrict(states, m)), params.with_n(m))
                if m < params.n_trunc else np.zeros(states.shape[0]) for m in m_list]
        return np.column_stack(cols)

    parts, n_acc = _in_ball_values(fn, params, count, seed, stream, workers, chunk)
    rows = []
    for k, m in enumerate(m_list):
        d = _scatter(parts, k)
        rows.append((m, _root_estimate(d * d, 2.0, n_acc, seed)))
    fit = [(m, e.mean) for m, e in rows if m > 0 and e.mean > 0]
    slope = fit_loglog_slope(*zip(*fit)) if len(fit) > 1 else None
    return MomentTable(rows, slope, -(2.0 * params.alpha - 1.0))


def exp_moment(params: ModelParams, lam: float, n_list, count: int, seed: int,
               workers: int = 1, chunk: int = DEFAULT_CHUNK) -> list:
    """``E[1_ball exp(lam ||Pi_N u||_4^4)]`` for each truncation in ``n_list``.

    Each ``N`` uses its own stream derived from the experiment name and ``N``.
    """
    rows = []
    for n in n_list:
        pn = params.with_n(int(n))
        stream = stream_id("exp-moment", int(n))

        def fn(states):
            x = lam * l4_quartic(states)
            if np.any(x > MAX_LOG_WEIGHT):
                raise WeightOverflow(f"exp({x.max():.1f}) overflows at N={n}")
            return np.exp(x)

        parts, n_acc = _in_ball_values(fn, pn, count, seed, stream, workers, chunk)
        rows.append((int(n), summarize(_scatter(parts), n_acc, seed)))
    return rows


def spread(rows, min_n: int = 0) -> tuple[float, float]:
    """``(max - min, joint stderr of that pair)`` over rows with ``N >= min_n``."""
    sel = [e for n, e in rows if n >= min_n]
    hi = max(sel, key=lambda e: e.mean)
    lo = min(sel, key=lambda e: e.mean)
    return hi.mean - lo.mean, math.hypot(hi.stderr, lo.stderr)
