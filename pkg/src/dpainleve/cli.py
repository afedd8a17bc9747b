"""Command line: validate, orbit, verify, degenerate, flow.

Exit codes: 0 pass, 1 property failure, 2 invalid config or theta, 3 singular or
indeterminate halt (partial output is kept).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import contextmanager
from pathlib import Path

import jsonschema
import numpy as np

from .algebra import ProjVal, precision
from .connection import (DConnError, PQPoint, ThetaV, classify, from_coordinates, theta_from_dict,
                         validate_matrix, validate_theta)
from .degeneration import DEFAULT_T, DegenerationConfig, DegenerationError, run_degeneration
from .flow import (FlowError, FlowState, RhoPath, SingularEncounter, Trajectory, integrate_flow,
                   pvi_ode_residual)
from .maps import IndeterminatePoint, MapError, dpv_step, dpvi_step, step_record_dict
from .modification import IntertwinerError, check_step
from .verify import Battery, run_battery

EXIT_OK, EXIT_PROPERTY, EXIT_CONFIG, EXIT_SINGULAR = 0, 1, 2, 3
COMMANDS = ("validate", "orbit", "verify", "degenerate", "flow")
PROFILES = {"default": 1.0, "strict": 0.1, "loose": 10.0}
ORACLE_RESIDUAL = 1e-8

_number = {"oneOf": [
    {"type": "number"},
    {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4},
    {"type": "string", "enum": ["inf"]},
]}
_cx = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_rho_pair = {"type": "array", "items": {"oneOf": [{"type": "number"}, _cx]}, "minItems": 2, "maxItems": 2}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "theta": {
            "type": "object",
            "properties": {
                "class": {"enum": ["V", "VI"]},
                "a": {"type": "array", "items": {"oneOf": [{"type": "number"}, _cx]}},
                "rho": {"type": "array", "items": {"oneOf": [{"type": "number"}, _cx]}},
                "d": {"type": "array", "items": {"oneOf": [{"type": "number"}, _cx]}},
                "n": {"type": "integer"},
            },
            "required": ["class", "a", "d"],
        },
        "initial_point": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
        "steps": {"type": "integer", "minimum": 0},
        "t_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "mode": {"enum": ["to_dPV", "to_PVI"]},
        "path": {
            "type": "object",
            "properties": {"vertices": {"type": "array", "items": _rho_pair, "minItems": 2}},
            "required": ["vertices"],
        },
        "output": {"type": "string"},
        "seed": {"type": "integer"},
        "tolerance_profile": {"enum": list(PROFILES)},
    },
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config plumbing

def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema: {exc.message}") from exc
    return cfg


def parse_value(x) -> ProjVal:
    if isinstance(x, str):
        return ProjVal(1.0, 0.0)
    if isinstance(x, (int, float)):
        return ProjVal.of(complex(x))
    if len(x) == 2:
        return ProjVal.of(complex(x[0], x[1]))
    return ProjVal.from_list(x)


def parse_complex(x) -> complex:
    return complex(x) if isinstance(x, (int, float)) else complex(x[0], x[1])


def config_theta(cfg: dict, required: bool = True):
    if "theta" not in cfg:
        if required:
            raise ConfigError("config needs theta")
        return None
    try:
        theta = theta_from_dict(cfg["theta"])
    except DConnError as exc:
        raise ConfigError(str(exc)) from exc
    rep = validate_theta(theta)
    if not rep.ok:
        raise ConfigError("invalid theta: " + json.dumps(rep.to_dict(), sort_keys=True))
    return theta


def config_point(cfg: dict, theta, default=None) -> PQPoint:
    raw = cfg.get("initial_point", default)
    if raw is None:
        raise ConfigError("config needs initial_point")
    q, p = parse_value(raw[0]), parse_value(raw[1])
    return PQPoint(q.normalized(), p.normalized(), classify(theta, q, p))


def _clean(x):
    """JSON-safe copy: non-finite floats become null, numpy scalars become Python ones."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [_clean(x.real), _clean(x.imag)]
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


@contextmanager
def _sink(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _summary_path(out: str | None) -> str | None:
    return None if out is None else str(Path(out).with_suffix(".summary.json"))


# ---------------------------------------------------------------------------
# commands

def cmd_validate(cfg: dict, args) -> int:
    try:
        theta = theta_from_dict(cfg["theta"]) if "theta" in cfg else None
    except DConnError as exc:
        raise ConfigError(str(exc)) from exc
    if theta is None:
        raise ConfigError("config needs theta")
    rep = validate_theta(theta)
    report = {"class": theta.cls, "theta": rep.to_dict()}
    ok = rep.ok
    if ok and "initial_point" in cfg:
        pt = config_point(cfg, theta)
        try:
            conn = from_coordinates(theta, pt.q, pt.p)
            mrep = validate_matrix(conn.mat, theta, check_theta=False)
            report["matrix"] = mrep.to_dict()
            ok = ok and mrep.ok
        except DConnError as exc:
            report["matrix"] = {"ok": False, "error": str(exc)}
            ok = False
    with _sink(args.out) as fh:
        fh.write(dumps(report))
    return EXIT_OK if ok else EXIT_CONFIG


def cmd_orbit(cfg: dict, args) -> int:
    theta = config_theta(cfg)
    pt = config_point(cfg, theta)
    steps = args.steps if args.steps is not None else cfg.get("steps", 10)
    step = dpv_step if isinstance(theta, ThetaV) else dpvi_step
    code = EXIT_OK
    with _sink(args.out) as fh:
        fh.write(json.dumps(_clean(step_record_dict(0, pt)), sort_keys=True) + "\n")
        for k in range(1, steps + 1):
            if pt.chart != "interior":
                return EXIT_SINGULAR
            try:
                rec = step(theta, pt)
            except (IndeterminatePoint, MapError) as exc:
                print(f"halt at step {k}: {exc}", file=sys.stderr)
                return EXIT_SINGULAR
            oracle = None
            if args.verify_each and rec.point_out.chart == "interior":
                try:
                    oracle = check_step(theta, pt, rec.theta_out, rec.point_out)
                    if oracle.residual >= ORACLE_RESIDUAL:
                        code = EXIT_PROPERTY
                except (IntertwinerError, DConnError) as exc:
                    print(f"oracle failed at step {k}: {exc}", file=sys.stderr)
                    code = EXIT_PROPERTY
            theta, pt = rec.theta_out, rec.point_out
            fh.write(json.dumps(_clean(step_record_dict(k, pt, oracle)), sort_keys=True) + "\n")
            if pt.chart != "interior":
                print(f"halt at step {k}: chart = {pt.chart}", file=sys.stderr)
                return EXIT_SINGULAR
    return code


def cmd_verify(cfg: dict, args) -> int:
    theta = config_theta(cfg, required=False)
    seed = args.seed if args.seed is not None else cfg.get("seed", 42)
    battery = Battery.quick() if args.quick else Battery()
    kw = {}
    if theta is not None:
        kw["theta_v" if theta.cls == "V" else "theta_vi"] = theta
    results = run_battery(battery, seed, **kw)
    passed = all(r.passed for r in results)
    report = {"seed": seed, "quick": bool(args.quick), "passed": passed,
              "properties": [r.to_dict() for r in results]}
    with _sink(args.out) as fh:
        fh.write(dumps(report))
    for r in results:
        if not r.passed:
            print(r.line(), file=sys.stderr)
    return EXIT_OK if passed else EXIT_PROPERTY


def cmd_degenerate(cfg: dict, args) -> int:
    theta = config_theta(cfg)
    if not isinstance(theta, ThetaV):
        raise ConfigError("degenerate needs a class V theta")
    pt = config_point(cfg, theta, default=[0.3, 0.7])
    try:
        dcfg = DegenerationConfig(theta, tuple(cfg.get("t_grid", DEFAULT_T)), cfg.get("mode", "to_dPV"))
    except DegenerationError as exc:
        raise ConfigError(str(exc)) from exc
    res = run_degeneration(dcfg, pt)
    with _sink(args.out) as fh:
        fh.write(res.to_csv())
    summary = dumps(res.summary())
    spath = _summary_path(args.out)
    if spath is None:
        sys.stderr.write(summary)
    else:
        Path(spath).write_text(summary)
    return EXIT_OK


def _flow_rows(traj: Trajectory, skip_first: bool) -> tuple[str, float]:
    """CSV rows of one segment without the header, and its max ODE residual.

    Residuals are per segment since the path derivative jumps at vertices."""
    try:
        rep = pvi_ode_residual(traj)
        residual, worst = rep.residual, rep.max_residual
    except FlowError:
        residual, worst = None, float("nan")
    lines = traj.to_csv(residual).splitlines(keepends=True)[1:]
    return "".join(lines[1:] if skip_first else lines), worst


def cmd_flow(cfg: dict, args) -> int:
    theta = config_theta(cfg)
    if not isinstance(theta, ThetaV):
        raise ConfigError("flow needs a class V theta")
    pt = config_point(cfg, theta)
    if pt.chart != "interior":
        raise ConfigError("flow needs an interior initial point")
    steps = args.steps if args.steps is not None else cfg.get("steps", 500)
    if steps < 1:
        raise ConfigError("flow needs steps >= 1")
    verts = cfg.get("path", {}).get("vertices")
    if verts is None:
        verts = [list(theta.rho), list(theta.rho)]
    verts = [tuple(parse_complex(r) for r in v) for v in verts]
    if tuple(complex(r) for r in theta.rho) != verts[0]:
        theta = theta.with_rho(verts[0])
    state = FlowState(theta, complex(pt.qv), complex(pt.pv))
    code = EXIT_OK
    summary = {"segments": []}
    with _sink(args.out) as fh:
        fh.write("t,rho1,rho2,q,p,residual\n")
        for k in range(len(verts) - 1):
            path = RhoPath.segment(verts[k], verts[k + 1], float(k), float(k + 1))
            try:
                traj = integrate_flow(state, path, steps)
            except SingularEncounter as exc:
                rows, worst = _flow_rows(exc.partial, k > 0)
                fh.write(rows)
                summary["segments"].append({"segment": k, "max_residual": worst, "halted": True})
                print(f"singular encounter on segment {k}", file=sys.stderr)
                code = EXIT_SINGULAR
                break
            rows, worst = _flow_rows(traj, k > 0)
            fh.write(rows)
            summary["segments"].append({"segment": k, "max_residual": worst, "halted": False})
            state = FlowState(theta.with_rho(verts[k + 1]), traj.q[-1], traj.p[-1])
    spath = _summary_path(args.out)
    if spath is not None:
        Path(spath).write_text(dumps(summary))
    return code


HANDLERS = {"validate": cmd_validate, "orbit": cmd_orbit, "verify": cmd_verify,
            "degenerate": cmd_degenerate, "flow": cmd_flow}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dpainleve", description="dPV/dPVI maps and their checks")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--steps", type=int)
    ap.add_argument("--verify-each", action="store_true", help="run the modification oracle per orbit step")
    ap.add_argument("--quick", action="store_true", help="reduced sample counts for verify")
    ap.add_argument("--out", help="output path (default stdout)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.get("command", args.command) != args.command:
            raise ConfigError(f"config is for {cfg['command']!r}, not {args.command!r}")
        if args.out is None and "output" in cfg:
            args.out = cfg["output"]
        if args.steps is not None and args.steps < 0:
            raise ConfigError("--steps must be >= 0")
        with precision(PROFILES[cfg.get("tolerance_profile", "default")]):
            return HANDLERS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
