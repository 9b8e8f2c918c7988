"""Command-line entry point.

Subcommands::

    certify {scalar,wave,system,elliptic,parabolic}  JSON verdict on stdout
    region --kind {subq,superq,levine,system}        CSV polyline ``x,y``
    simulate {odi,system,wave,elliptic,parabolic} --config FILE
    compare-levine                                   JSON sampling report

Exit codes: 0 ok, 2 invalid input, 3 inconclusive certificate,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict

import numpy as np
from scipy import optimize

from . import odi_core as oc
from .integrate import (
    BlownUp,
    IntegratorOptions,
    StepCollapse,
    check_envelope,
    detect_blowup,
    extremal_scalar_field,
    extremal_system_field,
    integrate_ivp,
    region_margin,
)
from . import spectral as sp
from ._io import dumps, fmt_float, write_csv, write_json

EXIT_OK, EXIT_INVALID, EXIT_INCONCLUSIVE, EXIT_VERIFY = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _emit(obj, stream=None):
    (stream or sys.stdout).write(dumps(obj))


def _fail(msg: str) -> int:
    sys.stderr.write(f"error: {msg}\n")
    return EXIT_INVALID


# ---------------------------------------------------------------------------
# certify

def _certificate(args):
    kind = args.kind
    if kind == "scalar":
        return oc.certify_scalar(oc.OdiParams(args.a, args.b, args.q), args.v0, args.v1)
    if kind == "wave":
        return oc.certify_wave(args.lam, args.C, args.q, args.v0, args.v1, args.phi_sup)
    if kind == "system":
        sp_ = oc.SystemParams(args.a, args.p, args.q)
        return oc.certify_system(sp_, args.U0, args.V0, args.U1, args.V1,
                                 lambda_mode=args.lambda_mode,
                                 phi_sup=args.phi_sup if args.lambda_mode else None)
    if kind == "elliptic":
        return oc.reduce_elliptic(args.lam, args.q, args.U0, args.U1, args.phi_sup)
    return oc.reduce_parabolic(args.lam, args.q, args.beta, args.m, args.p,
                               args.U0, args.V0, args.U1, args.phi_sup)


def cmd_certify(args) -> int:
    try:
        cert = _certificate(args)
    except oc.HypothesisViolated as exc:
        _emit({"certified": False, "provenance": args.kind, "reason": "hypothesis",
               "detail": str(exc)})
        return EXIT_INCONCLUSIVE
    except oc.NotCertified as exc:
        _emit({"certified": False, "provenance": args.kind, "reason": "region",
               "detail": str(exc)})
        return EXIT_INCONCLUSIVE
    _emit(cert.to_dict())
    return EXIT_OK


# ---------------------------------------------------------------------------
# region

def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"--kind {args.kind} needs " + ", ".join("--" + m.replace("lam", "lambda")
                                                                  for m in missing))


def _superq_admissible_v1(params: oc.OdiParams, x: float) -> float:
    g = lambda v1: oc.admissible_v0_super_quadratic(params, v1) - x
    lo, hi = 1.0, 1.0
    while g(lo) >= 0:
        lo /= 2.0
    while g(hi) <= 0:
        hi *= 2.0
    return optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def region_polyline(args):
    lo, hi = args.range
    n = args.samples
    if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
        raise UsageError(f"invalid range [{lo}, {hi}]")
    if n < 2:
        raise UsageError("--samples must be >= 2")
    xs = np.linspace(lo, hi, n)
    kind = args.kind
    if kind == "subq":
        _need(args, "a", "b", "q")
        params = oc.OdiParams(args.a, args.b, args.q)
        c = oc.sub_quadratic_constants(params)
        ys = [oc.boundary_F(c, params, x) for x in xs]
    elif kind == "superq":
        _need(args, "a", "b", "q")
        params = oc.OdiParams(args.a, args.b, args.q)
        if params.q <= 2:
            raise UsageError("--kind superq needs q > 2")
        if (args.v0 is None) != (args.v1 is None):
            raise UsageError("give both --v0 and --v1, or neither")
        if args.v0 is None:
            # boundary of the admissible set of initial data
            ys = [_superq_admissible_v1(params, x) for x in xs]
        else:
            eps = oc.epsilon_min(params, args.v0, args.v1)
            A = oc.super_quadratic_A(params, eps, args.v0, args.v1)
            if params.a * lo + A <= 0:
                raise UsageError(f"range starts where F2 is undefined (need x > {-A / params.a!r})")
            ys = [oc.boundary_F2(params, eps, A, x) for x in xs]
    elif kind == "levine":
        _need(args, "lam", "C", "q")
        oc.levine_region(args.lam, args.C, args.q, 0.0, 0.0)  # parameter validation
        s0 = oc.levine_s0(args.lam, args.C, args.q)
        ys = [max(x, s0) for x in xs]
    else:
        _need(args, "a", "p")
        if not args.p > 1:
            raise UsageError("--p must be > 1")
        oc.OdiParams(args.a, 1.0, args.p)
        ys = [oc.boundary_fp(args.a, args.p, x) for x in xs]
    return xs, np.array(ys)


def cmd_region(args) -> int:
    xs, ys = region_polyline(args)
    if args.output:
        write_csv(args.output, ("x", "y"), np.column_stack([xs, ys]))
    else:
        sys.stdout.write("x,y\n")
        for x, y in zip(xs, ys):
            sys.stdout.write(f"{fmt_float(x)},{fmt_float(y)}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

_INTEGRATOR_DEFAULTS = asdict(IntegratorOptions())

_PROBLEM_DEFAULTS = {
    "odi": {"a": 1.0, "b": 2.0, "q": 1.5, "v0": 0.0, "v1": 1.0},
    "system": {"a": 1.0, "p": 1.5, "q": 2.0, "U0": 4.0, "V0": 4.0, "U1": 4.0, "V1": 4.0},
    "wave": {"C": 2.0, "q": 1.5, "n_modes": 32, "n_quad": 128, "horizon": 10.0,
             "u0": [0.0], "u1": [2.0]},
    "elliptic": {"C": 1.0, "q": 1.5, "n_modes": 32, "n_quad": 128, "horizon": 10.0,
                 "u0": [0.0], "u1": [4.0]},
    "parabolic": {"C": 1.0, "q": 1.5, "beta": -1.0, "p": 1.0, "m": 1.0, "n_modes": 16,
                  "n_quad": 128, "horizon": 10.0, "u0": [0.0], "u1": [4.0], "v0": [-1.0]},
}

_TOP_DEFAULTS = {"output_dir": "out", "seed": 0, "slack": None, "dump_modes": False}
_SLACK_DEFAULT = {"odi": 0.0, "system": 0.02, "wave": 0.05, "elliptic": 0.05,
                  "parabolic": 0.05}


def _merge(section: str, given, defaults: dict) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise UsageError(f"config section {section!r} must be an object")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise UsageError(f"unknown keys in {section!r}: {', '.join(unknown)}")
    out = dict(defaults)
    out.update(given)
    return out


def load_run_config(kind: str, raw: dict) -> dict:
    """Validate a run config and materialize every default (stable key order)."""
    if not isinstance(raw, dict):
        raise UsageError("config must be a JSON object")
    top_keys = set(_TOP_DEFAULTS) | {"problem", "integrator"}
    unknown = sorted(set(raw) - top_keys)
    if unknown:
        raise UsageError(f"unknown top-level keys: {', '.join(unknown)}")
    cfg = {
        "kind": kind,
        "problem": _merge("problem", raw.get("problem"), _PROBLEM_DEFAULTS[kind]),
        "integrator": _merge("integrator", raw.get("integrator"), _INTEGRATOR_DEFAULTS),
    }
    for key, default in _TOP_DEFAULTS.items():
        cfg[key] = raw.get(key, default)
    if cfg["slack"] is None:
        cfg["slack"] = _SLACK_DEFAULT[kind]
    if raw.get("kind", kind) != kind:
        raise UsageError("config kind does not match subcommand")
    return cfg


def _termination_dict(term) -> dict:
    return {k: v for k, v in asdict(term).items()}


def _run_odi(cfg, opts):
    pr = cfg["problem"]
    if cfg["kind"] == "odi":
        params = oc.OdiParams(pr["a"], pr["b"], pr["q"])
        cert = oc.certify_scalar(params, pr["v0"], pr["v1"])
        fld, y0, q = extremal_scalar_field(params), [pr["v0"], pr["v1"]], params.q
    else:
        params = oc.SystemParams(pr["a"], pr["p"], pr["q"])
        cert = oc.certify_system(params, pr["U0"], pr["V0"], pr["U1"], pr["V1"])
        fld = extremal_system_field(params)
        y0, q = [pr["U0"], pr["U1"], pr["V0"], pr["V1"]], None
    traj = integrate_ivp(fld, y0, opts)
    env = check_envelope(traj, cert, cfg["slack"])
    margins = region_margin(cert, traj.states)
    report = {"certificate": cert.to_dict(), "termination": _termination_dict(traj.termination),
              "accepted_steps": int(traj.times.size - 1)}
    if isinstance(traj.termination, (BlownUp, StepCollapse)):
        try:
            est = detect_blowup(traj, opts, q=q)
            report["blowup_estimate"] = asdict(est)
        except oc.InvalidParameters as exc:
            report["blowup_estimate"] = {"error": str(exc)}
    report["envelope_check"] = env.to_dict()
    report["region_min_margin"] = float(margins[1:].min()) if margins.size > 1 else None
    inside = bool((margins[1:] > 0).all())
    report["region_invariant"] = inside
    report["passed"] = bool(env.passed and inside)
    return report, traj.to_csv


def _run_wave(cfg, opts):
    kind, pr = cfg["kind"], cfg["problem"]
    if kind == "wave":
        problem = sp.SingleWave()
        q = pr["q"]
    elif kind == "elliptic":
        problem = sp.HyperbolicElliptic(pr["q"])
        q = pr["q"]
    else:
        problem = sp.HyperbolicParabolic(pr["q"], pr["beta"], pr["p"], pr["m"])
        q = pr["q"]
    config = sp.SpectralConfig(n_modes=int(pr["n_modes"]), C=pr["C"], q=q, problem=problem,
                               n_quad=int(pr["n_quad"]), horizon=pr["horizon"])
    pb = sp.build_wave_problem(config, u0=pr["u0"], u1=pr["u1"], v0=pr.get("v0"))
    s0 = pb.unpack(pb.y0)
    U0, U1 = sp.project_eigen(s0)
    if kind == "wave":
        cert = oc.certify_wave(sp.LAMBDA1, pr["C"], q, U0, U1, sp.PHI_SUP)
    elif kind == "elliptic":
        if pr["C"] != 1.0:
            raise UsageError("elliptic certificate assumes C = 1")
        cert = oc.reduce_elliptic(sp.LAMBDA1, q, U0, U1, sp.PHI_SUP)
    else:
        if pr["C"] != 1.0:
            raise UsageError("parabolic certificate assumes C = 1")
        V0 = sp.project_eigen(s0, "v")[0]
        cert = oc.reduce_parabolic(sp.LAMBDA1, q, pr["beta"], pr["m"], pr["p"], U0, V0, U1,
                                   sp.PHI_SUP)
    wt = sp.simulate_wave(pb, opts)
    rep = sp.verify_theorem(wt, cert, cfg["slack"])
    report = {"certificate": cert.to_dict(), "termination": _termination_dict(wt.termination),
              "snapshots": int(wt.times.size), "resolution_loss": wt.resolution_loss,
              "trusted_until": wt.trusted_until, "min_jensen": float(wt.jensen.min()),
              "verification": rep.to_dict(), "passed": rep.passed}

    def export(path):
        wt.to_csv(path)
        if cfg["dump_modes"]:
            wt.modes_to_json(os.path.join(os.path.dirname(path), "modes.json"))

    return report, export


def _run_wave_system(cfg, opts):
    pr = cfg["problem"]
    config = sp.SpectralConfig(n_modes=int(pr["n_modes"]), C=1.0, q=pr["q"],
                               problem=sp.WaveSystem(pr["p"], pr["q"]),
                               n_quad=int(pr["n_quad"]), horizon=pr["horizon"])
    pb = sp.build_wave_problem(config, u0=pr["u0"], u1=pr["u1"], v0=pr["v0"], v1=pr["v1"])
    s0 = pb.unpack(pb.y0)
    (U0, U1), (V0, V1) = sp.project_eigen(s0), sp.project_eigen(s0, "v")
    cert = oc.certify_system(oc.SystemParams(sp.LAMBDA1, pr["p"], pr["q"]), U0, V0, U1, V1,
                             lambda_mode=True, phi_sup=sp.PHI_SUP)
    wt = sp.simulate_wave(pb, opts)
    rep = sp.verify_theorem(wt, cert, cfg["slack"])
    report = {"certificate": cert.to_dict(), "termination": _termination_dict(wt.termination),
              "snapshots": int(wt.times.size), "resolution_loss": wt.resolution_loss,
              "trusted_until": wt.trusted_until, "min_jensen": float(wt.jensen.min()),
              "verification": rep.to_dict(), "passed": rep.passed}
    return report, wt.to_csv


def cmd_simulate(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config: {exc}")
    kind = args.kind
    # the spectral wave system shares the "system" subcommand when modal keys are given
    if kind == "system" and isinstance(raw.get("problem"), dict) and "n_modes" in raw["problem"]:
        defaults = {"p": 1.5, "q": 2.0, "n_modes": 32, "n_quad": 128, "horizon": 10.0,
                    "u0": [16 / math.pi], "u1": [16 / math.pi], "v0": [16 / math.pi],
                    "v1": [16 / math.pi]}
        cfg = load_run_config("system", {**raw, "problem": None})
        cfg["problem"] = _merge("problem", raw["problem"], defaults)
        cfg["spectral"] = True
    else:
        cfg = load_run_config(kind, raw)
    if args.output_dir is not None:
        cfg["output_dir"] = args.output_dir
    opts = IntegratorOptions(**cfg["integrator"])
    if not 0 <= cfg["slack"] <= 0.1:
        raise UsageError("slack must lie in [0, 0.1]")

    try:
        if kind in ("odi", "system") and not cfg.get("spectral"):
            report, export = _run_odi(cfg, opts)
        elif kind == "system":
            report, export = _run_wave_system(cfg, opts)
        else:
            report, export = _run_wave(cfg, opts)
    except oc.NotCertified as exc:
        _emit({"certified": False, "detail": str(exc)})
        return EXIT_INCONCLUSIVE

    out = cfg["output_dir"]
    os.makedirs(out, exist_ok=True)
    echo = {k: v for k, v in cfg.items() if k not in ("kind", "spectral")}
    write_json(os.path.join(out, "config.json"), echo)
    export(os.path.join(out, "trajectory.csv"))
    write_json(os.path.join(out, "report.json"), report)
    _emit(report)
    return EXIT_OK if report["passed"] else EXIT_VERIFY


# ---------------------------------------------------------------------------
# compare-levine

def compare_levine(lam: float, C: float, q: float, n: int, seed: int, extent: float = 10.0,
                   n_witnesses: int = 10) -> dict:
    """Cross-test membership between the comparison wedge and our region.

    ``n`` points are drawn uniformly from the wedge ``v1 > v0 > s0``
    truncated to ``v0 < s0 + extent``, ``v1 < v0 + extent``, and ``n`` points
    by rejection from our region within ``[-extent, extent] x (0, extent]``.
    """
    oc.levine_region(lam, C, q, 0.0, 0.0)
    if n < 0:
        raise oc.InvalidParameters("samples must be >= 0")
    params = oc.OdiParams(lam, C, q)
    ours = (lambda v0, v1: oc.in_region_sub_quadratic(params, v0, v1)) if q <= 2 else \
        (lambda v0, v1: oc.in_region_super_quadratic(params, v0, v1))
    s0 = oc.levine_s0(lam, C, q)
    rng = np.random.default_rng(seed)

    lev_in_ours, failures = 0, []
    for _ in range(n):
        v0 = s0 + extent * rng.random()
        v1 = v0 + extent * rng.random()
        if not v0 > s0 or not v1 > v0:
            continue
        if ours(v0, v1):
            lev_in_ours += 1
        else:
            failures.append([v0, v1])

    drawn, ours_not_lev, attempts = 0, 0, 0
    neg, pos = [], []
    max_attempts = 1000 * n + 1000
    while drawn < n and attempts < max_attempts:
        attempts += 1
        v0 = extent * (2.0 * rng.random() - 1.0)
        v1 = extent * (1.0 - rng.random())
        if not ours(v0, v1):
            continue
        drawn += 1
        if not oc.levine_region(lam, C, q, v0, v1):
            ours_not_lev += 1
            (neg if v0 < 0 else pos).append([v0, v1])
    witnesses = (neg + pos)[:n_witnesses]
    return {
        "params": {"lambda": lam, "C": C, "q": q, "s0": s0, "samples": n, "seed": seed,
                   "extent": extent},
        "inclusion_asserted": q <= 2,
        "levine_in_ours": {"count": lev_in_ours, "total": n},
        "ours_not_levine": {"count": ours_not_lev, "total": drawn},
        "witnesses": witnesses,
        "inclusion_failures": failures[:n_witnesses],
    }


def cmd_compare_levine(args) -> int:
    _emit(compare_levine(args.lam, args.C, args.q, args.samples, args.seed, args.extent,
                         args.witnesses))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blowup", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    cert = sub.add_parser("certify", help="decide a blow-up criterion")
    csub = cert.add_subparsers(dest="kind", required=True)
    s = csub.add_parser("scalar")
    for f in ("a", "b", "q", "v0", "v1"):
        s.add_argument("--" + f, type=float, required=True)
    s = csub.add_parser("wave")
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    for f in ("C", "q", "v0", "v1"):
        s.add_argument("--" + f, type=float, required=True)
    s.add_argument("--phi-sup", type=float, default=sp.PHI_SUP)
    s = csub.add_parser("system")
    for f in ("a", "p", "q", "U0", "V0", "U1", "V1"):
        s.add_argument("--" + f, type=float, required=True)
    s.add_argument("--lambda-mode", action="store_true")
    s.add_argument("--phi-sup", type=float, default=sp.PHI_SUP)
    s = csub.add_parser("elliptic")
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    for f in ("q", "U0", "U1"):
        s.add_argument("--" + f, type=float, required=True)
    s.add_argument("--phi-sup", type=float, default=sp.PHI_SUP)
    s = csub.add_parser("parabolic")
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    for f in ("q", "beta", "m", "p", "U0", "V0", "U1"):
        s.add_argument("--" + f, type=float, required=True)
    s.add_argument("--phi-sup", type=float, default=sp.PHI_SUP)
    cert.set_defaults(func=cmd_certify)

    reg = sub.add_parser("region", help="export a region boundary as CSV")
    reg.add_argument("--kind", choices=("subq", "superq", "levine", "system"), required=True)
    for f in ("a", "b", "q", "v0", "v1", "C", "p"):
        reg.add_argument("--" + f, type=float)
    reg.add_argument("--lambda", dest="lam", type=float)
    reg.add_argument("--samples", type=int, default=200)
    reg.add_argument("--range", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    reg.add_argument("--output", help="write to this file instead of stdout")
    reg.set_defaults(func=cmd_region)

    sim = sub.add_parser("simulate", help="integrate and verify a certificate")
    sim.add_argument("kind", choices=("odi", "system", "wave", "elliptic", "parabolic"))
    sim.add_argument("--config", required=True)
    sim.add_argument("--output-dir")
    sim.set_defaults(func=cmd_simulate)

    lev = sub.add_parser("compare-levine", help="sampled comparison with the v1 > v0 > s0 wedge")
    lev.add_argument("--lambda", dest="lam", type=float, required=True)
    lev.add_argument("--C", type=float, required=True)
    lev.add_argument("--q", type=float, required=True)
    lev.add_argument("--samples", type=int, default=10000)
    lev.add_argument("--seed", type=int, default=0)
    lev.add_argument("--extent", type=float, default=10.0)
    lev.add_argument("--witnesses", type=int, default=10)
    lev.set_defaults(func=cmd_compare_levine)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, oc.InvalidParameters, ValueError, TypeError, KeyError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
