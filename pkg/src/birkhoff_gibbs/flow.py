"""Integration of the truncated normal-form flow and its diagnostics."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .core import (FourierState, ModelParams, as_coeffs, embed, hs_norm, mass, n_of,
                   reciprocal_divisors, restrict)
from .hamiltonian import (f_n_complex, g_n_observable, hamiltonian, normal_form_energy,
                          normal_form_energy_mass)
from .measure import stream_id


class FlowError(RuntimeError):
    pass


class BlowupDetected(FlowError):
    pass


class MaxStepsExceeded(FlowError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk45_adaptive"
    dt: float = 0.01
    rel_tol: float = 1e-10
    blowup_threshold: float = 1e6
    max_steps: int = 200_000
    # Sobolev exponent monitored for blowup; None picks 2 - 2 alpha (0 at alpha = 1)
    hs_exponent: float | None = None

    def __post_init__(self):
        if self.method not in ("rk45_adaptive", "rk4_fixed"):
            raise ValueError(f"unknown integrator method {self.method!r}")
        if not (self.dt > 0 and self.rel_tol > 0 and self.blowup_threshold > 0):
            raise ValueError("dt, rel_tol and blowup_threshold must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FlowResult:
    final_state: np.ndarray
    t: float
    mass_drift: float
    fn_drift: float
    steps: int
    max_hs: float
    trajectory: list[tuple[float, np.ndarray]] | None = field(default=None, repr=False)
    fn_imag_residual: float = 0.0

    def diagnostics(self) -> dict:
        return {"t": self.t, "mass_drift": self.mass_drift, "fn_drift": self.fn_drift,
                "steps": self.steps, "max_hs": self.max_hs,
                "fn_imag_residual": self.fn_imag_residual}


def _hs_weights(params: ModelParams, cfg: IntegratorConfig) -> np.ndarray:
    s = cfg.hs_exponent
    if s is None:
        s = 2.0 - 2.0 * params.alpha
    n = np.abs(np.arange(-params.n_trunc, params.n_trunc + 1)).astype(float)
    return 1.0 + n ** (2.0 * s)


def flow_states(states, t: float, params: ModelParams, cfg: IntegratorConfig = IntegratorConfig(),
                raise_on_error: bool = True):
    """Flow every row of ``states`` to time ``t``; rows are integrated independently.

    Returns ``(final, steps, status, peak_hs)``. Status codes: 0 ok, 1 blowup,
    2 step limit. With ``raise_on_error`` the first failing row raises.
    """
    c = as_coeffs(states)
    if n_of(c) != params.n_trunc:
        raise ValueError(f"state has N={n_of(c)} but params.n_trunc={params.n_trunc}")
    flat = np.ascontiguousarray(c.reshape(-1, c.shape[-1]))
    out, steps, status, peak = _kernels.flow_batch(
        flat, float(t), reciprocal_divisors(params.n_trunc, params.alpha),
        float(params.sigma), cfg.method == "rk45_adaptive", float(cfg.dt),
        float(cfg.rel_tol), int(cfg.max_steps), float(cfg.blowup_threshold),
        _hs_weights(params, cfg), _kernels._A, _kernels._B5, _kernels._B4)
    if raise_on_error and np.any(status != _kernels.OK):
        bad = int(np.flatnonzero(status != _kernels.OK)[0])
        if status[bad] == _kernels.BLOWUP:
            raise BlowupDetected(f"row {bad}: H^s norm {peak[bad]:.3e} exceeded "
                                 f"{cfg.blowup_threshold:.3e} before t={t}")
        raise MaxStepsExceeded(f"row {bad}: more than {cfg.max_steps} steps to reach t={t}")
    shape = c.shape
    return out.reshape(shape), steps.reshape(shape[:-1]), status.reshape(shape[:-1]), \
        peak.reshape(shape[:-1])


def _rel(a: float, b: float) -> float:
    scale = abs(a)
    if scale == 0.0:
        return abs(b - a)
    return abs(b - a) / scale


def flow_map(u0, t: float, params: ModelParams, cfg: IntegratorConfig = IntegratorConfig(),
             checkpoints: int | None = None) -> FlowResult:
    """Approximate the time-``t`` map of the truncated flow.

    With ``checkpoints = k`` the trajectory is recorded at ``k`` equally
    spaced times including both endpoints.
    """
    c = np.ascontiguousarray(as_coeffs(u0))
    if c.ndim != 1:
        raise ValueError("flow_map takes a single state; use flow_states for batches")
    times = [0.0, float(t)] if not checkpoints else list(np.linspace(0.0, t, checkpoints))
    traj = [(0.0, c.copy())]
    y = c
    total_steps = 0
    peak = 0.0
    for t0, t1 in zip(times[:-1], times[1:]):
        y, steps, _, pk = flow_states(y[None, :], t1 - t0, params, cfg)
        y = y[0]
        total_steps += int(steps[0])
        peak = max(peak, float(pk[0]))
        traj.append((float(t1), y.copy()))
    f0 = f_n_complex(c, params)
    f1 = f_n_complex(y, params)
    imag = max(abs(f0.imag) / max(abs(f0), 1e-300) if f0 else 0.0,
               abs(f1.imag) / max(abs(f1), 1e-300) if f1 else 0.0)
    return FlowResult(
        final_state=y, t=float(t),
        mass_drift=_rel(float(mass(c)), float(mass(y))),
        fn_drift=_rel(f0.real, f1.real),
        steps=max(total_steps, 1) if t != 0 else 1,
        max_hs=peak,
        trajectory=traj if checkpoints else None,
        fn_imag_residual=imag,
    )


def _simpson(values: np.ndarray, h: float) -> float:
    k = values.size - 1
    if k == 0:
        return 0.0
    if k % 2:
        raise ValueError("Simpson's rule needs an odd number of checkpoints")
    return float(h / 3.0 * (values[0] + values[-1] + 4.0 * values[1:-1:2].sum()
                            + 2.0 * values[2:-1:2].sum()))


def flow_with_observable(u0, t: float, params: ModelParams,
                         cfg: IntegratorConfig = IntegratorConfig(),
                         checkpoints_per_unit: int = 64):
    """Flow and integrate ``d/dt H`` along the trajectory by composite Simpson.

    Returns ``(result, quadrature, endpoint_difference)``; the two agree to
    quadrature plus integrator accuracy.
    """
    k = max(2, int(np.ceil(abs(t) * checkpoints_per_unit)))
    k += k % 2
    res = flow_map(u0, t, params, cfg, checkpoints=k + 1)
    states = np.array([s for _, s in res.trajectory])
    g = g_n_observable(states, params)
    quad = _simpson(g, t / k) if t != 0 else 0.0
    diff = float(hamiltonian(res.final_state, params) - hamiltonian(as_coeffs(u0), params))
    return res, quad, diff


def fit_loglog_slope(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def decaying_state(n_trunc: int, s: float, seed: int, amplitude: float = 0.5) -> np.ndarray:
    """``|u(n)| = amplitude * <n>^{-s-1}`` with seeded uniform phases."""
    bitgen = np.random.Philox(key=[seed, stream_id("convergence-phases")])
    phases = np.random.Generator(bitgen).uniform(0, 2 * np.pi, 2 * n_trunc + 1)
    n = np.arange(-n_trunc, n_trunc + 1)
    return amplitude * (1.0 + n ** 2) ** (-(s + 1) / 2) * np.exp(1j * phases)


def truncation_convergence(u0, t: float, params: ModelParams, s: float, s_prime: float,
                           n_list, n_ref: int | None = None,
                           cfg: IntegratorConfig = IntegratorConfig()):
    """Distance in ``H^{s'}`` between truncated flows and a reference truncation.

    ``u0`` is given at truncation ``n_ref`` (default ``2 max(n_list)``, and it
    must be at least that). Returns ``(rows, slope)`` with ``rows`` a list of
    ``(N, error)`` and ``slope`` the least-squares log-log slope (None unless at
    least two errors are nonzero).
    """
    if not s_prime < s:
        raise ValueError("need s_prime < s")
    n_list = sorted(int(n) for n in n_list)
    if n_ref is None:
        n_ref = 2 * n_list[-1]
    if n_list[-1] >= n_ref:
        raise ValueError("every N must be below the reference truncation")
    c = as_coeffs(u0)
    if n_of(c) < n_ref:
        c = embed(c, n_ref)
    c = restrict(c, n_ref)
    ref = flow_map(c, t, params.with_n(n_ref), cfg).final_state
    rows = []
    for n in n_list:
        approx = flow_map(restrict(c, n), t, params.with_n(n), cfg).final_state
        rows.append((n, float(hs_norm(embed(approx, n_ref) - ref, s_prime))))
    fit = [r for r in rows if r[1] > 0]
    slope = None
    if len(fit) > 1:
        slope = fit_loglog_slope([r[0] for r in fit], [r[1] for r in fit])
    return rows, slope


def normal_form_remainder(u, params: ModelParams,
                          cfg: IntegratorConfig = IntegratorConfig(method="rk4_fixed", dt=0.01),
                          mass_form: bool = False) -> float:
    """``|H(flow_1(u)) - Z(u)|`` where ``Z`` is the first-order normal form.

    ``mass_form`` swaps the resonant quartic for ``mass**2``.
    """
    c = as_coeffs(u)
    h = float(hamiltonian(flow_map(c, 1.0, params, cfg).final_state, params))
    z = normal_form_energy_mass(c, params) if mass_form else normal_form_energy(c, params)
    return abs(h - z)


def remainder_scaling(u, eps_list, params: ModelParams,
                      cfg: IntegratorConfig = IntegratorConfig(method="rk4_fixed", dt=0.01),
                      mass_form: bool = False):
    """Remainder at ``eps * u`` for each ``eps``; returns ``(rows, slope)``."""
    c = as_coeffs(u)
    rows = [(float(e), normal_form_remainder(e * c, params, cfg, mass_form)) for e in eps_list]
    return rows, fit_loglog_slope([r[0] for r in rows], [r[1] for r in rows])


def write_trajectory_jsonl(path, result: FlowResult) -> None:
    """One ``{"t": ..., "coeffs": [N, re, im, ...]}`` record per checkpoint."""
    if result.trajectory is None:
        raise ValueError("flow was run without checkpoints")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t, s in result.trajectory:
            fh.write(json.dumps({"t": t, "coeffs": FourierState(s).to_record()}) + "\n")
