"""``nodkit`` command line: solve, verify, scaling, ode."""

from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from nodkit import report
from nodkit.config import ConfigError, RunConfig, load
from nodkit.core import default_eta
from nodkit.ode_flow import FlowError, gronwall_check, integrate, max_stable_dt
from nodkit.problems import InstanceError, bilinear_instance_from_spec, make_instance
from nodkit.probes import probe_battery
from nodkit.scaling import NotConvergedError, SweepError, scaling_study
from nodkit.solvers import SOLVERS, DivergedError, StoppingRule, bc_default_eta, nod_bc_run

log = logging.getLogger("nodkit")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_PROBE, EXIT_ENVELOPE = 0, 1, 2, 3, 4


def _overrides(args) -> dict:
    out: dict = {}
    solver = {}
    if getattr(args, "eta", None) is not None:
        solver["eta"] = args.eta
    if getattr(args, "max_iters", None) is not None:
        solver["max_iters"] = args.max_iters
    if getattr(args, "tol", None) is not None:
        solver["tol"] = args.tol
    if solver:
        out["solver"] = solver
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    return out


def _start(cfg: RunConfig, key: str, dim: int, section: str = "solver") -> np.ndarray:
    z0 = cfg.raw[section].get(key)
    if z0 is None:
        return np.random.default_rng(cfg.seed).standard_normal(dim)
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (dim,):
        raise ConfigError(f"{section}.{key}: expected {dim} entries, got {z0.size}")
    return z0


def _to_problem_coords(cfg: RunConfig, prob, z0):
    # bilinear starts are given in the original (x, y) coordinates
    if prob.name == "bilinear":
        sx, sy = prob.params["scale"]
        dx = prob.saddle_split[0]
        return np.concatenate([sx * z0[:dx], sy * z0[dx:]])
    return z0


def run_solve(cfg: RunConfig):
    prob = make_instance(cfg.problem)
    s = cfg.solver
    stop = StoppingRule(max_iters=s["max_iters"], tol=s["tol"])
    z0 = _start(cfg, "z0", prob.dim)
    if s["method"] == "nod_bc":
        inst = bilinear_instance_from_spec(cfg.problem)
        if s["eta"] is not None and s["eta"] > bc_default_eta(inst):
            log.warning("eta=%g exceeds the admissible step %g", s["eta"], bc_default_eta(inst))
        dx = inst.d_x
        return nod_bc_run(inst, s["eta"], z0[:dx], z0[dx:], stop, seed=cfg.seed)
    if s["eta"] is not None and prob.L_phi >= prob.mu:
        bound = default_eta(prob.mu, prob.L_phi, prob.L_S)
        if s["eta"] > bound:
            log.warning("eta=%g exceeds the admissible step %g", s["eta"], bound)
    return SOLVERS[s["method"]](prob, s["eta"], _to_problem_coords(cfg, prob, z0), stop,
                                seed=cfg.seed)


def cmd_solve(args) -> int:
    try:
        cfg = load(args.config, _overrides(args))
        trace = run_solve(cfg)
    except (ConfigError, InstanceError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergedError as exc:
        print(f"diverged at k={exc.k}", file=sys.stderr)
        if exc.trace.records:
            report.write_text(args.out or cfg.outputs["trace_path"],
                              report.trace_csv(exc.trace, cfg.dumps()))
        return EXIT_DIVERGED
    report.write_text(args.out or cfg.outputs["trace_path"], report.trace_csv(trace, cfg.dumps()))
    if cfg.outputs["report_path"]:
        final = trace.final
        report.write_json(cfg.outputs["report_path"], {
            "config": cfg.raw,
            "stop_reason": trace.meta["stop_reason"],
            "iterations": trace.meta["iterations"],
            "eta": trace.meta["eta"],
            "final_residual": final.residual,
            "final_dist_sq": final.dist_sq,
            "all_contractions_ok": trace.all_contractions_ok(),
        })
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        cfg = load(args.config, _overrides(args))
        prob = make_instance(cfg.problem)
    except (ConfigError, InstanceError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    p = cfg.probes
    rows = probe_battery(prob, n=p["n"], seed=cfg.seed, half_width=p["half_width"],
                         grid_num=p["grid_num"])
    ok = all(r["pass"] for r in rows)
    report.write_json(args.out or cfg.outputs["report_path"],
                      {"config": cfg.raw, "instance": prob.name, "pass": ok, "probes": rows})
    return EXIT_OK if ok else EXIT_PROBE


def cmd_scaling(args) -> int:
    try:
        values = [float(v) for v in args.values.split(",")]
        rep = scaling_study(args.axis, values, args.eps)
    except (SweepError, ValueError) as exc:
        print(f"sweep error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotConvergedError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DIVERGED
    report.write_json(args.out, rep.to_dict())
    return EXIT_OK


def cmd_ode(args) -> int:
    try:
        cfg = load(args.config, _overrides(args))
        prob = make_instance(cfg.problem)
        o = cfg.ode
        dt = o["dt"] if o["dt"] is not None else max_stable_dt(prob)
        if dt > max_stable_dt(prob) * (1 + 1e-12):
            raise ConfigError(f"ode.dt: {dt} exceeds the stability bound {max_stable_dt(prob)}")
        z0 = _to_problem_coords(cfg, prob, _start(cfg, "z0", prob.dim, "ode"))
        v0 = np.asarray(o.get("v0", np.zeros(prob.dim)), dtype=float)
        if v0.shape != (prob.dim,):
            raise ConfigError(f"ode.v0: expected {prob.dim} entries")
    except (ConfigError, InstanceError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        flow = integrate(prob, z0, v0, o["t_end"], dt)
    except FlowError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DIVERGED
    if args.inject_psi_fault and len(flow) > 1:
        flow.psi[1] *= 2.0
    meta = {"instance": prob.name, "mu": prob.mu, "dt": dt}
    report.write_text(args.out or cfg.outputs["trace_path"], report.flow_csv(flow, cfg.dumps(), meta))
    ok = gronwall_check(flow, prob.mu)
    if cfg.outputs["report_path"]:
        report.write_json(cfg.outputs["report_path"], {
            "config": cfg.raw, "envelope_ok": ok, "psi0": float(flow.psi[0]),
            "psi_final": float(flow.psi[-1]), "t_end": float(flow.t[-1]),
            "rate": math.sqrt(prob.mu),
        })
    return EXIT_OK if ok else EXIT_ENVELOPE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nodkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, solver_flags=True):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output path (default: config outputs, else stdout)")
        p.add_argument("--seed", type=int)
        if solver_flags:
            p.add_argument("--eta", type=float, help="step-size override")
            p.add_argument("--max-iters", type=int)
            p.add_argument("--tol", type=float)

    p = sub.add_parser("solve", help="run a solver and write the trace CSV")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="run the probe battery and write a JSON report")
    common(p, solver_flags=False)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("scaling", help="iteration-count sweep along one constant")
    p.add_argument("--axis", choices=("L_S", "L_phi", "L_xy"), required=True)
    p.add_argument("--values", required=True, help="comma-separated sweep values")
    p.add_argument("--eps", type=float, default=1e-10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("ode", help="integrate the continuous flow and check its envelope")
    common(p, solver_flags=False)
    p.add_argument("--inject-psi-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_ode)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
