"""Command-line front end: scenario files in, deterministic tables out.

    wfdelay run <scenario.json> [--out-dir DIR] [--verbose]
    wfdelay validate <initial_data.json>
    wfdelay schild --m1 --m2 --e1 --e2 --r1 [--horizon-periods N]

Exit codes: 0 success, 2 invalid input (schema, validation, anchors, I/O),
3 guard stop before the requested horizon, 4 numerical failure.  Failures
print a JSON report on stderr.
"""
import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import errors as E
from .conserved import QuadratureConfig, energy_drift, fmt
from .construction import GuardParams, SolutionPair, advance_step, construct, eom_residual
from .delayfields import field_deviation, longitudinal_residuals
from .initialdata import (
    InitialData,
    generate_initial_data,
    perturb_initial_data,
    validate_initial_data,
)
from .kinematics import PhasePoint, momentum_of_velocity
from .schild import (
    schild_for_omega,
    schild_positions,
    schild_solve,
    schild_strips,
    schild_trajectories,
    schild_worldline,
)

log = logging.getLogger("wfdelay")

EXIT_OK, EXIT_INVALID, EXIT_GUARD, EXIT_NUMERICAL = 0, 2, 3, 4

# construction tolerance the uniqueness demo measures divergence against
CONSTRUCTION_TOL = 1e-8

INVALID = (E.InvalidArgument, E.SuperluminalVelocity, E.InvalidWorldLine, E.IntervalMismatch,
           E.InvalidAnchor, E.ValidationFailure, E.NoSolutionInWindow)
GUARD = (E.GuardSpeed,)


class ScenarioError(E.WFDelayError):
    """Schema violation in a scenario file; carries field-level messages."""

    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = list(fields)


class GuardStop(E.WFDelayError):
    def __init__(self, reason):
        super().__init__(f"construction stopped before the horizon: {reason}")
        self.reason = reason


def exit_code(exc):
    """Total map from the failure taxonomy to exit codes."""
    if isinstance(exc, (ScenarioError, OSError, json.JSONDecodeError) + INVALID):
        return EXIT_INVALID
    if isinstance(exc, GUARD + (GuardStop,)):
        return EXIT_GUARD
    return EXIT_NUMERICAL


def failure_report(exc):
    out = {"error": type(exc).__name__, "message": str(exc), "exit_code": exit_code(exc)}
    if isinstance(exc, ScenarioError):
        out["fields"] = exc.fields
    report = getattr(exc, "report", None)
    if report is not None:
        out["report"] = report.to_dict()
    if getattr(exc, "error_estimate", None) is not None:
        out["error_estimate"] = exc.error_estimate
    if getattr(exc, "interval", None) is not None:
        out["interval"] = list(exc.interval)
    return out


# ---- scenario schema -------------------------------------------------------

_NUM = {"type": "number"}
_SCHILD = {
    "type": "object",
    "properties": {k: _NUM for k in ("m1", "m2", "e1", "e2", "r1")},
    "required": ["m1", "m2", "e1", "e2", "r1"],
}
_GRID = {
    "oneOf": [
        {"type": "array", "items": _NUM, "minItems": 1},
        {"type": "object", "properties": {"start": _NUM, "stop": _NUM,
                                          "num": {"type": "integer", "minimum": 1}},
         "required": ["start", "stop", "num"], "additionalProperties": False},
    ]
}
_GUARDS = {
    "type": "object",
    "properties": {"d": _NUM, "v_bar": _NUM, "compat_order": {"type": "integer"},
                   "join_tol": _NUM, "step_degree": {"type": "integer"}, "dps": {"type": "integer"}},
    "additionalProperties": False,
}
_QUAD = {
    "type": "object",
    "properties": {"rel_tol": _NUM, "abs_tol": _NUM, "max_subdivisions": {"type": "integer"}},
    "additionalProperties": False,
}
_INITIAL = {
    "oneOf": [
        {"type": "string"},
        {"type": "object", "properties": {"schild": _SCHILD}, "required": ["schild"],
         "additionalProperties": False},
        {"type": "object",
         "properties": {"generate": {
             "type": "object",
             "properties": {"schild": _SCHILD, "velocity_factor": _NUM,
                            "hermite_order": {"type": "integer", "minimum": 1}},
             "required": ["schild"], "additionalProperties": False}},
         "required": ["generate"], "additionalProperties": False},
    ]
}
SCHEMAS = {
    "schild": {
        "properties": dict(_SCHILD["properties"], horizon_periods=_NUM,
                           samples_per_period={"type": "integer", "minimum": 1},
                           degree={"type": "integer", "minimum": 4}),
        "required": _SCHILD["required"],
    },
    "construct": {
        "properties": {"initial_data": _INITIAL, "guards": _GUARDS,
                       "horizons": {"type": "array", "items": {"type": ["number", "null"]},
                                    "minItems": 2, "maxItems": 2},
                       "dt": _NUM},
        "required": ["initial_data", "horizons"],
    },
    "energy-audit": {
        "properties": {"solution": {"oneOf": [{"type": "string"}, {
            "type": "object", "properties": {"schild": _SCHILD, "horizon_periods": _NUM},
            "required": ["schild"], "additionalProperties": False}]},
            "grid_1": _GRID, "grid_2": _GRID, "quadrature": _QUAD},
        "required": ["solution"],
    },
    "uniqueness-demo": {
        "properties": {"schild": _SCHILD, "t_star": _NUM, "s": _NUM, "delta": _NUM,
                       "lambda": _NUM, "bump_shape": {"enum": ["poly16", "exp"]},
                       "exchanges": {"type": "integer", "minimum": 1}, "guards": _GUARDS,
                       "threshold": _NUM},
        "required": [],
    },
    "field-compare": {
        "properties": {"m1": _NUM, "m2": _NUM, "e1": _NUM, "r1": _NUM,
                       "omega_r": {"type": "array", "items": _NUM, "minItems": 1},
                       "samples": {"type": "integer", "minimum": 1},
                       "random_points": {"type": "integer", "minimum": 1},
                       "seed": {"type": "integer"}, "rel_step": _NUM},
        "required": [],
    },
}


def check_scenario(sc):
    if not isinstance(sc, dict) or sc.get("kind") not in SCHEMAS:
        raise ScenarioError("scenario needs a 'kind' in " + ", ".join(SCHEMAS),
                            ["kind: missing or unknown"])
    body = SCHEMAS[sc["kind"]]
    schema = {"type": "object", "properties": dict(body["properties"], kind={"type": "string"}),
              "required": body["required"], "additionalProperties": False}
    errs = sorted(jsonschema.Draft7Validator(schema).iter_errors(sc), key=lambda e: list(e.path))
    if errs:
        fields = [f"{'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errs]
        raise ScenarioError(f"scenario schema violation ({len(errs)} field(s))", fields)
    return sc


# ---- output helpers ----------------------------------------------------------

def write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in r])


def uniform_times(lo, hi, dt):
    """``lo + k dt`` up to ``hi``; a final point within round-off of ``hi`` is kept."""
    if not dt > 0:
        raise E.InvalidArgument(f"dt must be positive, got {dt}")
    if not hi >= lo:
        return []
    n = int(math.floor((hi - lo) / dt * (1 + 1e-12) + 1e-9))
    return [min(lo + k * dt, hi) for k in range(n + 1)]


def emit_trajectory_csv(sol, dt, path, t_range=None):
    """Positions and momenta of both charges at uniform times inside the coverage overlap."""
    lo = max(sol.line_1.t_lo, sol.line_2.t_lo)
    hi = min(sol.line_1.t_hi, sol.line_2.t_hi)
    if t_range is not None:
        lo, hi = max(lo, t_range[0]), min(hi, t_range[1])
    header = ["t"] + [f"q{k}{c}" for k in (1, 2) for c in "xyz"] + \
             [f"p{k}{c}" for k in (1, 2) for c in "xyz"]
    rows = []
    for t in uniform_times(lo, hi, dt):
        q = [sol.line(k).position(t) for k in (1, 2)]
        p = [sol.line(k).momentum(t) for k in (1, 2)]
        rows.append([float(t)] + [float(x) for x in np.concatenate(q + p)])
    write_csv(path, header, rows)
    return len(rows)


def _grid(spec, default):
    if spec is None:
        return default
    if isinstance(spec, list):
        return [float(x) for x in spec]
    return list(np.linspace(spec["start"], spec["stop"], spec["num"]))


def _schild(d):
    return schild_solve(d["m1"], d["m2"], d["e1"], d["e2"], d["r1"])


def _resolve(bases, path):
    """Relative paths are looked up next to the scenario, then in the output directory."""
    p = Path(path)
    if p.is_absolute():
        return p
    for b in bases:
        if (b / p).exists():
            return b / p
    raise ScenarioError(f"referenced file {path!r} not found", [f"{path}: no such file"])


def _load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


# ---- scenario kinds ------------------------------------------------------------

def run_schild(sc, out, base=None):
    p = _schild(sc)
    periods = float(sc.get("horizon_periods", 3.0))
    per = int(sc.get("samples_per_period", 100))
    sol = schild_trajectories(p, horizon_periods=periods, degree=int(sc.get("degree", 16)))
    log.info("schild: omega=%.6g r2=%.6g dt=%.6g", p.omega, p.r2, p.delta_t)
    write_json(out / "params.json", dict(p.to_dict(), period=p.period,
                                         invariants=p.invariant_residuals()))
    write_json(out / "solution.json", sol.to_dict())
    dt = p.period / per
    n = emit_trajectory_csv(sol, dt, out / "trajectory.csv", (0.0, periods * p.period))
    ts = uniform_times(0.0, periods * p.period, dt)
    rows = [[float(t), eom_residual(sol, 1, t), eom_residual(sol, 2, t)] for t in ts]
    write_csv(out / "residual.csv", ["t", "residual_1", "residual_2"], rows)
    worst = max(max(r[1], r[2]) for r in rows)
    log.info("schild: %d trajectory rows, max residual %.3e", n, worst)
    return {"rows": n, "max_residual": worst}


def load_initial_data(spec, base):
    if isinstance(spec, str):
        return InitialData.from_dict(_load_json(_resolve(base, spec)))
    if "schild" in spec:
        return schild_strips(_schild(spec["schild"]))
    g = spec["generate"]
    p = _schild(g["schild"])
    seed = schild_worldline(p, 2, 0.0, 2 * p.delta_t, degree=32, max_phase=10.0)
    t1 = p.delta_t
    q1 = schild_positions(p, t1)[0]
    v1 = float(g.get("velocity_factor", 1.0)) * schild_worldline(
        p, 1, t1 - 0.1, t1 + 0.1).velocity(t1)
    anchor = PhasePoint(t1, q1, momentum_of_velocity(v1, p.m1))
    return generate_initial_data(seed, p.charges, anchor, GuardParams(),
                                 hermite_order=int(g.get("hermite_order", 15)))


def _steps_rows(sol):
    return [[r.particle, r.side, float(r.interval[0]), float(r.interval[1])]
            + [float(m) for m in r.join_mismatch] + [float(r.holdout_residual), float(r.chain_defect)]
            for r in sol.steps]


def run_construct(sc, out, base):
    data = load_initial_data(sc["initial_data"], base)
    guards = GuardParams(**sc.get("guards", {}))
    tp, tf = sc["horizons"]
    sol = construct(data, guards, (tp, tf))
    write_json(out / "solution.json", sol.to_dict())
    order = max((len(r.join_mismatch) for r in sol.steps), default=guards.compat_order + 1)
    write_csv(out / "steps.csv",
              ["particle", "side", "t_start", "t_end"] + [f"mismatch_{k}" for k in range(order)]
              + ["holdout", "chain_defect"], _steps_rows(sol))
    dt = float(sc.get("dt", (data.line_1.t_hi - data.line_1.t_lo) / 20))
    n = emit_trajectory_csv(sol, dt, out / "trajectory.csv")
    summary = {"stop_reason": sol.stop_reason, "domains": [list(map(float, d)) for d in sol.domains],
               "coverage": [[float(sol.line(k).t_lo), float(sol.line(k).t_hi)] for k in (1, 2)],
               "steps": len(sol.steps), "trajectory_rows": n}
    write_json(out / "construct.json", summary)
    if sol.stop_reason != "reached-horizon":
        raise GuardStop(sol.stop_reason)
    return summary


def run_energy_audit(sc, out, base):
    spec = sc["solution"]
    if isinstance(spec, str):
        sol = SolutionPair.from_dict(_load_json(_resolve(base, spec)))
    else:
        p = _schild(spec["schild"])
        sol = schild_trajectories(p, horizon_periods=float(spec.get("horizon_periods", 1.0)))
    quad = QuadratureConfig.from_dict(sc.get("quadrature", {}))
    grids = [_grid(sc.get(f"grid_{k}"), list(np.linspace(*sol.domains[k - 1], 5))) for k in (1, 2)]
    rep = energy_drift(sol, grids[0], grids[1], quad)
    (out / "drift.json").write_text(rep.to_json(), encoding="utf-8")
    (out / "drift.csv").write_text(rep.to_csv(), encoding="utf-8")
    log.info("energy-audit: %d pairs, max relative drift %.3e", len(rep.rows), rep.max_relative_drift)
    return {"max_relative_drift": rep.max_relative_drift}


def run_uniqueness(sc, out, base):
    p = _schild(sc.get("schild", {"m1": 1.0, "m2": 1.0, "e1": 1.0, "e2": -1.0, "r1": 1.0}))
    dT = p.delta_t
    guards = GuardParams(**dict({"step_degree": 64}, **sc.get("guards", {})))
    data = schild_strips(p)
    t_star = float(sc.get("t_star", 1.02)) * dT
    pert, report = perturb_initial_data(
        data, t_star, float(sc.get("s", 1.5)) * dT, float(sc.get("delta", 0.45)) * dT,
        float(sc.get("lambda", 2e-10)), bump_shape=sc.get("bump_shape", "poly16"), guards=guards)
    if not report.ok:
        raise E.ValidationFailure("perturbed data fails validation", report)
    # phase points at t_star on every strip that covers it
    phase = 0.0
    for k in (1, 2):
        a, b = data.line(k), pert.line(k)
        if a.covers(t_star):
            phase = max(phase, float(np.abs(a.eval(t_star, 1) - b.eval(t_star, 1)).max()))
    sols = []
    for d in (data, pert):
        s = SolutionPair.from_lines(d.line_1, d.line_2)
        for side in ("future", "past"):
            for _ in range(int(sc.get("exchanges", 1))):
                s = advance_step(s, side, guards)
                if s.stop_reason != "reached-horizon":
                    raise GuardStop(s.stop_reason)
        sols.append(s)
    rows, worst = [], [0.0, 0.0]
    lo = max(min(s.line(k).t_lo for k in (1, 2)) for s in sols)
    hi = min(max(s.line(k).t_hi for k in (1, 2)) for s in sols)
    for t in np.linspace(lo, hi, 801):
        row = [float(t)]
        for k in (1, 2):
            strip = data.line(k)
            a, b = sols[0].line(k), sols[1].line(k)
            if strip.covers(t) or not (a.covers(t) and b.covers(t)):
                row.append("")
                continue
            diff = float(np.linalg.norm(a.position(t) - b.position(t)))
            worst[k - 1] = max(worst[k - 1], diff)
            row.append(diff)
        rows.append(row)
    write_csv(out / "divergence.csv", ["t", "dq1", "dq2"], rows)
    threshold = float(sc.get("threshold", 1e3 * CONSTRUCTION_TOL))
    join = max(max(r.join_mismatch) for r in sols[1].steps)
    summary = {"t_star": t_star, "phase_difference_at_t_star": phase,
               "divergence_beyond_strips": worst, "threshold": threshold,
               "max_join_mismatch": float(join), "validation": report.to_dict(),
               "identical_at_t_star": phase <= 1e-14, "diverged": max(worst) >= threshold}
    write_json(out / "uniqueness.json", summary)
    log.info("uniqueness-demo: phase diff %.3e, divergence %s", phase, worst)
    return summary


def run_field_compare(sc, out, base):
    m1, m2 = float(sc.get("m1", 1.0)), float(sc.get("m2", 1.0))
    e1, r1 = float(sc.get("e1", 1.0)), float(sc.get("r1", 1.0))
    rng = np.random.default_rng(int(sc.get("seed", 0)))
    samples, npts = int(sc.get("samples", 16)), int(sc.get("random_points", 20))
    rel_step = float(sc.get("rel_step", 1e-3))
    rows = []
    for vr in sc.get("omega_r", [0.04, 0.02, 0.01]):
        p = schild_for_omega(m1, m2, e1, r1, float(vr) / r1)
        T = p.period
        l1 = schild_worldline(p, 1, -T, 2 * T, degree=24, max_phase=0.5)
        l2 = schild_worldline(p, 2, -T, 2 * T, degree=24, max_phase=0.5)
        dev = max(field_deviation(l2, p.e2, t, l1.position(t), s)
                  for t in np.linspace(0.0, T, samples, endpoint=False) for s in (1, -1))
        curl = div = 0.0
        for _ in range(npts):
            x = rng.normal(size=3) * 2.0 * max(p.r1, p.r2)
            t = rng.uniform(0.0, T)
            for s in (1, -1):
                c, d = longitudinal_residuals(l2, p.e2, t, x, s, rel_step)
                curl, div = max(curl, c), max(div, d)
        rows.append([float(vr), dev, curl, div])
    write_csv(out / "field_compare.csv", ["omega_r", "max_deviation", "max_curl_rel", "max_div_rel"], rows)
    devs = [r[1] for r in rows]
    summary = {"rows": rows, "deviation_decreasing": all(a > b for a, b in zip(devs, devs[1:]))}
    write_json(out / "field_compare.json", summary)
    return summary


KINDS = {"schild": run_schild, "construct": run_construct, "energy-audit": run_energy_audit,
         "uniqueness-demo": run_uniqueness, "field-compare": run_field_compare}


def run_scenario(path, out_dir=None):
    path = Path(path)
    sc = check_scenario(_load_json(path))
    out = Path(out_dir) if out_dir is not None else path.parent
    out.mkdir(parents=True, exist_ok=True)
    return KINDS[sc["kind"]](sc, out, (path.parent, out))


# ---- entry point -----------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="wfdelay", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("scenario")
    r.add_argument("--out-dir", default=None, help="output directory (default: scenario's)")
    r.add_argument("--verbose", action="store_true")
    v = sub.add_parser("validate", help="validate strip initial data")
    v.add_argument("initial_data")
    s = sub.add_parser("schild", help="solve a circular orbit and write its tables")
    for k in ("m1", "m2", "e1", "e2", "r1"):
        s.add_argument(f"--{k}", type=float, required=True)
    s.add_argument("--horizon-periods", type=float, default=3.0)
    s.add_argument("--out-dir", default=".")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "run":
            result = run_scenario(args.scenario, args.out_dir)
        elif args.command == "validate":
            data = InitialData.from_dict(_load_json(args.initial_data))
            report = validate_initial_data(data, GuardParams())
            print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
            if not report.ok:
                raise E.ValidationFailure("initial data fails validation", report)
            return EXIT_OK
        else:
            out = Path(args.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            sc = {"m1": args.m1, "m2": args.m2, "e1": args.e1, "e2": args.e2, "r1": args.r1,
                  "horizon_periods": args.horizon_periods}
            result = run_schild(sc, out)
        print(json.dumps(result, indent=2, sort_keys=True, default=float))
        return EXIT_OK
    except (E.WFDelayError, OSError, json.JSONDecodeError) as exc:
        print(json.dumps(failure_report(exc), indent=2, sort_keys=True, default=str), file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
