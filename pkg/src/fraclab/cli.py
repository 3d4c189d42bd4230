"""Command-line front door: verification suites, construction runs, data dumps.

Reports are JSON with sorted keys; field samples are CSV with a header
row.  Two runs with the same seed and config produce byte-identical
report files.  FRACLAP_THREADS caps suite concurrency (default 1).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import fields as dc_fields

import numpy as np

from . import bubbles, constants, construction, extension, fracops, green, \
    movingsphere, reports, solver
from .fields import ScalarField
from .params import Params


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, default=None)
    parser.add_argument("--sigma", type=float, default=None)
    parser.add_argument("--N", type=int, default=None)
    parser.add_argument("--phi", type=str, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", type=str, default=None)
    parser.add_argument("--tol-scale", dest="tol_scale", type=float,
                        default=None)
    parser.add_argument("--config", type=str, default=None,
                        help="key=value config file; flags override it")


def _config_from_args(args: argparse.Namespace) -> reports.RunConfig:
    cfg = (reports.RunConfig.from_file(args.config) if args.config
           else reports.RunConfig())
    for f in dc_fields(cfg):
        val = getattr(args, f.name, None)
        if val is not None:
            setattr(cfg, f.name, val)
    return cfg


def _emit_report(report: dict, out_dir: str, stem: str) -> None:
    text = reports.format_report(report)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, f"{stem}.json"), "w") as fh:
            fh.write(text)
    sys.stdout.write(reports.summarize(report))


def _run_single_suite(args: argparse.Namespace, suite: str) -> int:
    cfg = _config_from_args(args)
    cfg.suite = suite
    report = reports.run_suite(cfg)
    _emit_report(report, cfg.out, f"report_{suite}")
    if not report["passed"]:
        sys.stderr.write(f"first failing check: {report['first_failure']}\n")
        return 1
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    cfg.suite = args.suite
    report = reports.run_suite(cfg)
    _emit_report(report, cfg.out, f"report_{cfg.suite}")
    if not report["passed"]:
        sys.stderr.write(f"first failing check: {report['first_failure']}\n")
        return 1
    return 0


def cmd_constants(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    pr = Params(cfg.n, cfg.sigma)
    cset = constants.constant_set(pr)
    payload = {"n": pr.n, "sigma": pr.sigma, "constants": cset.as_dict()}
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)
        with open(os.path.join(cfg.out, "constants.json"), "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def cmd_fraclap(args: argparse.Namespace) -> int:
    """Fractional Laplacian of the model bubble on a radial sample grid."""
    cfg = _config_from_args(args)
    pr = Params(max(cfg.n, 2), cfg.sigma)
    w = bubbles.model_bubble(pr)
    rows = []
    for r in np.linspace(0.0, 3.0, 13):
        res = fracops.frac_lap_radial(w, float(r), pr)
        rows.append((float(r), res.value, res.error,
                     constants.bubble_eigenvalue(pr) * w.radial_profile(r) ** pr.p))
    _write_csv(cfg.out, "fraclap_bubble.csv",
               ["radius", "frac_lap", "quadrature_error", "eigenvalue_times_power"],
               rows)
    return 0


def cmd_bubble(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    pr = Params(max(cfg.n, 2), cfg.sigma)
    res = bubbles.bubble_identity_residuals(pr)
    rows = [(r, float(v)) for r, v in zip((0.0, 0.5, 1.0, 2.0, 5.0), res)]
    _write_csv(cfg.out, "bubble_identity.csv", ["radius", "relative_residual"],
               rows)
    worst = float(np.max(res))
    sys.stdout.write(f"max identity residual: {worst:.3e}\n")
    return 0 if worst < 1e-3 else 1


def cmd_extend(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    pr = Params(max(cfg.n, 2), cfg.sigma)
    w = bubbles.model_bubble(pr)
    rows = []
    for d in (0.0, 0.5, 1.0):
        for t in (0.25, 1.0, 4.0):
            y = d * np.eye(pr.n)[0]
            rows.append((d, t, extension.extend(w, y, t, pr)))
    _write_csv(cfg.out, "extension_samples.csv",
               ["base_radius", "height", "extension_value"], rows)
    return 0


def cmd_green_verify(args: argparse.Namespace) -> int:
    return _run_single_suite(args, "green")


def cmd_msphere(args: argparse.Namespace) -> int:
    return _run_single_suite(args, "msphere")


def cmd_construct(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    pr = Params(5, 0.5)
    kf = ScalarField(lambda x: np.ones(np.atleast_2d(x).shape[0]), n=5,
                     decay="integrable_against_kernel")
    plan = construction.plan_sequences(pr, kf, reports.parse_phi(cfg.phi),
                                       N=cfg.N, seed=cfg.seed)
    payload = {
        "n": pr.n, "sigma": pr.sigma, "N": plan.n_mat, "reduced": plan.reduced,
        "a": plan.a, "b": plan.b, "i0": plan.i0, "beta": plan.beta,
        "delta": plan.delta, "delta1": plan.delta1, "delta2": plan.delta2,
        "ring_radius": plan.ring_radius,
        "one_minus_k": plan.one_minus_k.tolist(),
        "M": plan.m_big.tolist(), "rho": plan.rho.tolist(),
        "lambda": plan.lam.tolist(), "eps": plan.eps.tolist(),
        "margins": {k: (v if v is None or math.isfinite(v) else None)
                    for k, v in plan.margins.items()},
        "all_margins_positive": all(
            v is None or not math.isfinite(v) or v > -1e-12
            for v in plan.margins.values()),
    }
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)
        with open(os.path.join(cfg.out, "plan.json"), "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def _construction_rhs():
    """Desk-scale 1D analog of the assembled nonlinearity."""
    pe = Params(1, 0.25)

    def rhs(x, v):
        z1 = 0.3 * np.clip(1.0 - np.asarray(x) ** 2, 0.0, None) + 1e-9
        vv = np.broadcast_to(np.asarray(v, dtype=float), z1.shape)
        out = np.array([max(construction.big_f_val(a, 0.9, 0.2 * b + 0.05, pe),
                            0.0) for a, b in zip(z1, vv)])
        return 0.05 * out

    return rhs


def cmd_iterate(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    pr = Params(1, 0.5)
    prob = solver.build_problem((-1.0, 1.0), pr, nodes=128)
    if args.demo == "getoor":
        prob.rhs_map = lambda x, v: np.ones_like(x)
        vbar = 1.2 * solver.getoor_profile(prob.grid, pr) + 0.1
    elif args.demo == "construction1d":
        prob.rhs_map = _construction_rhs()
        vbar = solver.solve_linear(prob, 2.0 * np.ones(len(prob.grid)))
    else:
        raise ValueError("demo must be getoor or construction1d")
    trace = solver.monotone_iterate(prob, supersolution=vbar)
    sys.stdout.write(
        f"demo={args.demo} iters={len(trace.residuals)} "
        f"converged={trace.converged} monotone={all(trace.monotone_flags)} "
        f"final_residual={trace.residuals[-1]:.3e}\n")
    header = ["x"] + [f"iterate_{i}" for i in range(len(trace.iterates))]
    rows = [[float(x)] + [float(it[j]) for it in trace.iterates]
            for j, x in enumerate(prob.grid)]
    _write_csv(cfg.out, f"iterates_{args.demo}.csv", header, rows)
    return 0 if trace.converged else 1


def _write_csv(out_dir, name, header, rows) -> None:
    if not out_dir:
        return
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v
                             for v in row])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fraclab",
        description="verification and construction runs for the fractional "
                    "critical-exponent toolbox")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "constants": cmd_constants,
        "fraclap": cmd_fraclap,
        "bubble": cmd_bubble,
        "extend": cmd_extend,
        "green-verify": cmd_green_verify,
        "msphere": cmd_msphere,
        "construct": cmd_construct,
        "iterate": cmd_iterate,
        "verify": cmd_verify,
    }
    for name in commands:
        p = sub.add_parser(name)
        _add_common(p)
        if name == "verify":
            p.add_argument("--suite", type=str, default="all",
                           choices=("all",) + reports.SUITES)
        if name == "iterate":
            p.add_argument("--demo", type=str, default="getoor",
                           choices=("getoor", "construction1d"))
    args = parser.parse_args(argv)
    return commands[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
