"""Batch front end: ``birkhoff-gibbs <subcommand> [--config FILE] [flags]``.

Every run writes ``results.jsonl``, ``summary.csv`` and ``manifest.json``
into the output directory (``--out``, else ``$BIRKHOFF_GIBBS_OUT/<subcommand>``,
else ``./runs/<subcommand>``). Exit status: 0 success, 2 a gate failed,
1 operational error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .core import FourierState, ModelParams
from .flow import (IntegratorConfig, decaying_state, flow_map, truncation_convergence,
                   write_trajectory_jsonl)
from .hamiltonian import g_n_observable, homological_check, vector_field
from .measure import estimate, gaussian_states, sample_gaussian, stream_id
from .oracle import jacobian_det, resonant_sum
from .transport import (density, exp_moment, gn_moments, gn_truncation_decay, parse_predicate,
                        spread, verify_transport)

ARTIFACT_VERSION = f"birkhoff_gibbs {__version__}"

SUBCOMMANDS = ("sample", "evolve", "check-identities", "transport-verify", "moments", "decay",
               "exp-moment", "convergence", "jacobian")

# key -> (type, default); None default means required
KEYS = {
    "alpha": (float, None),
    "sigma": (int, 1),
    "n_trunc": (int, None),
    "radius": (float, 1.0),
    "seed": (int, None),
    "count": (int, None),
    "t": (float, 1.0),
    "workers": (int, 1),
    "integrator.method": (str, "rk45_adaptive"),
    "integrator.rel_tol": (float, 1e-10),
    "integrator.dt": (float, 0.01),
    "p_list": (list, [2, 3, 4, 5, 6, 7, 8, 9, 10]),
    "m_list": (list, [4, 8, 16]),
    "n_list": (list, [4, 8, 16, 32]),
    "n_ref": (int, None),
    "set": (str, "re(u0)>0.1"),
    "lambda": (float, 0.5),
    "s": (float, 1.0),
    "s_prime": (float, 0.0),
}

DEFAULT_COUNT = {"sample": 1000, "evolve": 1, "check-identities": 20,
                 "transport-verify": 100_000, "moments": 200_000, "decay": 300_000,
                 "exp-moment": 100_000, "convergence": 1, "jacobian": 20}


class ConfigError(Exception):
    pass


def _flatten(mapping, prefix=""):
    out = {}
    for k, v in mapping.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _key_lines(text: str) -> dict:
    lines = {}

    def walk(node, prefix=""):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = f"{prefix}{k.value}"
                lines[key] = k.start_mark.line + 1
                walk(v, key + ".")

    root = yaml.compose(text)
    if root is not None:
        walk(root)
    return lines


def _coerce(key, value, line=None):
    typ = KEYS[key][0]
    where = f" (line {line})" if line else ""
    try:
        if typ is list:
            if isinstance(value, str):
                value = [v for v in value.replace(",", " ").split()]
            return [float(v) if float(v) != int(float(v)) else int(float(v)) for v in value]
        if typ is int:
            if isinstance(value, float) and value != int(value):
                raise ValueError
            return int(value)
        return typ(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for key '{key}'{where}: {value!r}") from None


def load_config(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text) or {}
        lines = _key_lines(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    flat = _flatten(data)
    out = {}
    for k, v in flat.items():
        if k not in KEYS:
            raise ConfigError(f"unknown config key '{k}' (line {lines.get(k, '?')})")
        out[k] = _coerce(k, v, lines.get(k))
    return out


def resolve(subcommand: str, file_cfg: dict, flags: dict) -> dict:
    cfg = dict(file_cfg)
    for k, v in flags.items():
        if v is not None:
            cfg[k] = _coerce(k, v)
    for k, (_, default) in KEYS.items():
        if k not in cfg:
            if default is None and k in ("alpha", "n_trunc", "seed"):
                raise ConfigError(f"missing config key '{k}'")
            cfg[k] = default
    if cfg["count"] is None:
        cfg["count"] = DEFAULT_COUNT[subcommand]
    return cfg


def _params(cfg) -> ModelParams:
    return ModelParams(cfg["alpha"], cfg["sigma"], cfg["n_trunc"], cfg["radius"])


def _integrator(cfg) -> IntegratorConfig:
    return IntegratorConfig(method=cfg["integrator.method"], dt=cfg["integrator.dt"],
                            rel_tol=cfg["integrator.rel_tol"])


def _record(cfg, experiment, **fields) -> dict:
    rec = {"experiment": experiment, "params": _params(cfg).to_dict(), "t": cfg["t"],
           "predicate": None, "estimate": None, "stderr": None, "n_samples": None,
           "acceptance": None, "seed": cfg["seed"],
           "integrator_cfg": _integrator(cfg).to_dict(), "artifact_version": ARTIFACT_VERSION}
    rec.update(fields)
    return rec


def _est_fields(est) -> dict:
    return {"estimate": est.mean, "stderr": est.stderr, "n_samples": est.n_samples,
            "acceptance": est.acceptance}


def _in_ball_states(cfg, count, label):
    """The first ``count`` in-ball draws of the labelled stream."""
    params = _params(cfg)
    stream = stream_id(label)
    found, start = [], 0
    while len(found) < count:
        b = sample_gaussian(params, 4096, cfg["seed"], stream, start)
        found.extend(b.states[b.in_ball])
        start += 4096
        if start > 10_000_000:
            raise RuntimeError("could not find enough in-ball draws")
    return np.array(found[:count])


# ---------------------------------------------------------------------------
# subcommands; each returns (records, gate_ok, extra_outputs)


def run_sample(cfg, out: Path):
    params = _params(cfg)
    stream = stream_id("sample")
    batch = sample_gaussian(params, cfg["count"], cfg["seed"], stream)
    path = out / "states.bin"
    batch.export(path, params)
    est = estimate(lambda s: np.ones(len(s)), params, cfg["count"], cfg["seed"], stream,
                   workers=cfg["workers"])
    recs = [_record(cfg, "sample", quantity="gibbs_total_mass", **_est_fields(est))]
    return recs, True, [str(path), str(path) + ".json"]


def run_evolve(cfg, out: Path):
    params, icfg = _params(cfg), _integrator(cfg)
    u0 = _in_ball_states(cfg, 1, "evolve")[0]
    res = flow_map(u0, cfg["t"], params, icfg, checkpoints=65)
    traj = out / "trajectory.jsonl"
    write_trajectory_jsonl(traj, res)
    ok = res.mass_drift <= 1e-8 and res.fn_drift <= 1e-8
    recs = [_record(cfg, "evolve", **res.diagnostics(),
                    initial=FourierState(u0).to_record(),
                    final=FourierState(res.final_state).to_record(),
                    density=float(density(u0, cfg["t"], params, icfg)))]
    return recs, ok, [str(traj)]


def run_check_identities(cfg, out: Path):
    params = _params(cfg)
    if params.n_trunc > 16:
        raise ValueError("check-identities enumerates resonant quadruples; use N <= 16")
    rng_states = gaussian_states(params, 0, cfg["count"], cfg["seed"], stream_id("check-identities"))
    worst, worst_mass = 0.0, 0.0
    for u in rng_states:
        hc = homological_check(u, params, resonant_sum)
        worst = max(worst, hc.residual)
        worst_mass = max(worst_mass, abs(hc.lhs - hc.rhs_paper) / max(abs(hc.rhs_paper), 1e-300))
    one = FourierState.from_modes(params.n_trunc, {min(1, params.n_trunc): 0.7 + 0.2j}).coeffs
    fixed = max(float(np.abs(vector_field(one, params)).max()),
                abs(g_n_observable(one, params)),
                abs(float(density(one, 1.0, params, _integrator(cfg))) - 1.0))
    ok = worst < 1e-10 and fixed <= 1e-12
    recs = [_record(cfg, "check-identities", quantity="homological_residual", estimate=worst,
                    n_samples=cfg["count"], residual_vs_mass_squared_rhs=worst_mass),
            _record(cfg, "check-identities", quantity="fixed_point_defect", estimate=fixed)]
    return recs, ok, []


def run_transport(cfg, out: Path):
    pred = parse_predicate(cfg["set"])
    rep = verify_transport(pred, cfg["t"], _params(cfg), cfg["count"], cfg["seed"],
                           _integrator(cfg), workers=cfg["workers"])
    recs = []
    for side, est in (("lhs", rep.lhs), ("rhs", rep.rhs)):
        recs.append(_record(cfg, "transport-verify", side=side, predicate=pred.text(),
                            z_score=rep.z_score, **_est_fields(est)))
    return recs, rep.z_score <= 3.0, []


def run_moments(cfg, out: Path):
    params = _params(cfg)
    tab = gn_moments(params, cfg["p_list"], cfg["count"], cfg["seed"], workers=cfg["workers"])
    recs = [_record(cfg, "moments", p=p, **_est_fields(e)) for p, e in tab.rows]
    recs.append(_record(cfg, "moments", quantity="growth_exponent", estimate=tab.slope,
                        reference=tab.reference))
    ok = tab.slope is not None and np.isfinite(tab.slope) and tab.slope <= tab.reference + 0.35
    return recs, ok, []


def run_decay(cfg, out: Path):
    tab = gn_truncation_decay(_params(cfg), cfg["m_list"], cfg["count"], cfg["seed"],
                              workers=cfg["workers"])
    recs = [_record(cfg, "decay", M=m, **_est_fields(e)) for m, e in tab.rows]
    recs.append(_record(cfg, "decay", quantity="slope", estimate=tab.slope,
                        reference=tab.reference))
    ok = tab.slope is not None and tab.slope <= 0.7 * tab.reference
    return recs, ok, []


def run_exp_moment(cfg, out: Path):
    rows = exp_moment(_params(cfg), cfg["lambda"], cfg["n_list"], cfg["count"], cfg["seed"],
                      workers=cfg["workers"])
    recs = [_record(cfg, "exp-moment", N=n, **_est_fields(e)) for n, e in rows]
    gap, joint = spread(rows, min_n=8) if any(n >= 8 for n, _ in rows) else spread(rows)
    recs.append(_record(cfg, "exp-moment", quantity="spread", estimate=gap, stderr=joint))
    return recs, gap <= 4 * joint, []


def run_convergence(cfg, out: Path):
    params = _params(cfg)
    n_list = [int(n) for n in cfg["n_list"]]
    n_ref = cfg["n_ref"] or 2 * max(n_list)
    u0 = decaying_state(n_ref, cfg["s"], cfg["seed"])
    rows, slope = truncation_convergence(u0, cfg["t"], params, cfg["s"], cfg["s_prime"], n_list,
                                         n_ref, _integrator(cfg))
    recs = [_record(cfg, "convergence", N=n, estimate=e, n_ref=n_ref) for n, e in rows]
    recs.append(_record(cfg, "convergence", quantity="slope", estimate=slope,
                        reference=-(cfg["s"] - cfg["s_prime"])))
    ok = slope is None or slope <= -0.8 * (cfg["s"] - cfg["s_prime"])
    return recs, ok, []


def run_jacobian(cfg, out: Path):
    params = _params(cfg)
    states = _in_ball_states(cfg, cfg["count"], "jacobian")
    dets = [jacobian_det(cfg["t"], u, params) for u in states]
    worst = float(np.max(np.abs(np.array(dets) - 1.0)))
    recs = [_record(cfg, "jacobian", quantity="max_abs_det_minus_one", estimate=worst,
                    n_samples=len(dets))]
    return recs, worst <= 1e-5, []


RUNNERS = {"sample": run_sample, "evolve": run_evolve, "check-identities": run_check_identities,
           "transport-verify": run_transport, "moments": run_moments, "decay": run_decay,
           "exp-moment": run_exp_moment, "convergence": run_convergence,
           "jacobian": run_jacobian}


# ---------------------------------------------------------------------------


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _write_outputs(out: Path, records, manifest):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    cols = ["experiment", "quantity", "estimate", "stderr", "n_samples", "acceptance"]
    with open(out / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols + ["key"])
        for r in records:
            key = ";".join(f"{k}={r[k]}" for k in ("side", "p", "M", "N") if k in r)
            w.writerow([r.get(c) for c in cols] + [key])
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def execute(subcommand: str, cfg: dict, out: Path) -> int:
    started = _now()
    out.mkdir(parents=True, exist_ok=True)
    records, ok, extra = RUNNERS[subcommand](cfg, out)
    manifest = {
        "experiment": {"name": subcommand,
                       "arguments": {k: v for k, v in cfg.items() if k != "workers"}},
        "params": _params(cfg).to_dict(), "integrator": _integrator(cfg).to_dict(),
        "seed": cfg["seed"], "workers": cfg["workers"], "artifact_version": ARTIFACT_VERSION,
        "started": started, "finished": _now(),
        "outputs": [str(out / n) for n in ("results.jsonl", "summary.csv", "manifest.json")] + extra,
        "gate_passed": bool(ok),
    }
    _write_outputs(out, records, manifest)
    for r in records:
        label = r.get("quantity") or r.get("side") or next(
            (f"{k}={r[k]}" for k in ("p", "M", "N") if k in r), "")
        print(f"{subcommand:18s} {label:28s} estimate={r['estimate']!s:24s} stderr={r['stderr']}")
    print(f"gate: {'PASS' if ok else 'FAIL'}  ->  {out}")
    return 0 if ok else 2


def _parser():
    p = argparse.ArgumentParser(prog="birkhoff-gibbs", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML file with flat keys")
        s.add_argument("--out", help="output directory")
        s.add_argument("--alpha", type=float)
        s.add_argument("--sigma", type=int)
        s.add_argument("--n", dest="n_trunc", type=int)
        s.add_argument("--radius", type=float)
        s.add_argument("--seed", type=int)
        s.add_argument("--count", type=int)
        s.add_argument("--t", type=float)
        s.add_argument("--workers", type=int)
        s.add_argument("--method", dest="integrator.method")
        s.add_argument("--rel-tol", dest="integrator.rel_tol", type=float)
        s.add_argument("--dt", dest="integrator.dt", type=float)
        s.add_argument("--set", dest="set")
        s.add_argument("--p-list", dest="p_list")
        s.add_argument("--m-list", dest="m_list")
        s.add_argument("--n-list", dest="n_list")
        s.add_argument("--n-ref", dest="n_ref", type=int)
        s.add_argument("--lambda", dest="lambda", type=float)
        s.add_argument("--s", dest="s", type=float)
        s.add_argument("--s-prime", dest="s_prime", type=float)
    r = sub.add_parser("replay", help="rerun the experiment recorded in a manifest")
    r.add_argument("manifest")
    r.add_argument("--out")
    r.add_argument("--workers", type=int)
    return p


def _out_dir(args, name) -> Path:
    if args.out:
        return Path(args.out)
    base = os.environ.get("BIRKHOFF_GIBBS_OUT")
    return Path(base) / name if base else Path("runs") / name


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    cfg = {}
    try:
        if args.command == "replay":
            man = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
            name = man["experiment"]["name"]
            cfg = dict(man["experiment"]["arguments"])
            cfg["workers"] = args.workers or man.get("workers", 1)
            return execute(name, cfg, _out_dir(args, name))
        file_cfg = load_config(args.config) if args.config else {}
        flags = {k: v for k, v in vars(args).items()
                 if k in KEYS and v is not None}
        cfg = resolve(args.command, file_cfg, flags)
        return execute(args.command, cfg, _out_dir(args, args.command))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # surfaced with seed for replay
        print(f"error: {type(exc).__name__}: {exc} (seed={cfg.get('seed')})", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
