"""Command-line front end.

Exit codes: 0 success, 2 bad input, 3 solver did not converge, 4 replay found
distinct blowups.
"""

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import blowup, fields, solver, sphere
from .errors import LabError
from .quadratic_forms import (
    Q,
    QPLUS,
    REPLAY_TOL,
    make_quadratic,
    read_matrix,
    replay_uniqueness,
)

EXIT_OK, EXIT_BAD, EXIT_NOT_CONVERGED, EXIT_DISTINCT = 0, 2, 3, 4

CONFIG_KEYS = {
    "dim": int,
    "nodes": int,
    "spacing": float,
    "boundary_preset": str,
    "preset_params": str,
    "mode": str,
    "max_sweeps": int,
    "sor_omega": float,
    "tol_residual": float,
    "eps_u": float,
    "eps_g": float,
    "max_outer": int,
}
REQUIRED_KEYS = ("dim", "nodes", "spacing", "boundary_preset")


class UsageError(Exception):
    pass


def _num(x):
    """Shortest round-trip text for a float; identical input gives identical text."""
    return repr(float(x))


def parse_params(text):
    """'k=v,k=v' with matrix/vector entries separated by ':'."""
    out = {}
    for item in filter(None, (s.strip() for s in (text or "").split(","))):
        if "=" not in item:
            raise UsageError(f"parameter {item!r} is not of the form key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _floats(text):
    return [float(v) for v in text.split(":")]


def _square(entries):
    k = int(round(len(entries) ** 0.5))
    if k * k != len(entries):
        raise UsageError(f"{len(entries)} entries do not form a square matrix")
    return np.array(entries).reshape(k, k)


def build_preset(name, params):
    """Analytic preset (or a constant-valued callable) from CLI parameters."""
    try:
        if name == "quadratic":
            return fields.quadratic(_square(_floats(params["a"])))
        if name == "half_space":
            return fields.half_space(_floats(params["e"]))
        if name == "perturbed_quadratic":
            return fields.perturbed_quadratic(_square(_floats(params["a"])),
                                              float(params["eps"]))
        if name in ("constant", "zero"):
            value = float(params.get("value", 0.0)) if name == "constant" else 0.0
            return lambda p: np.full(len(p), value)
    except KeyError as exc:
        raise UsageError(f"preset {name!r} needs parameter {exc.args[0]!r}") from None
    raise UsageError(f"unknown preset {name!r}")


def read_config(path):
    cfg = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            cfg[key] = CONFIG_KEYS[key](value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key!r}: {value!r}") from None
    for key in REQUIRED_KEYS:
        if key not in cfg:
            raise UsageError(f"config is missing required key {key!r}")
    return cfg


def spec_from_config(cfg):
    n, m, h = cfg["dim"], cfg["nodes"], cfg["spacing"]
    if n not in (2, 3):
        raise UsageError(f"dim must be 2 or 3, got {n}")
    if h * (m - 1) / 2.0 < 1.0:
        raise UsageError("grid half-width spacing*(nodes-1)/2 must be at least 1")
    boundary = build_preset(cfg["boundary_preset"], parse_params(cfg.get("preset_params")))
    if getattr(boundary, "n", n) != n:
        raise UsageError("preset dimension does not match dim")
    extra = {k: cfg[k] for k in ("max_sweeps", "sor_omega", "tol_residual", "eps_u",
                                  "eps_g", "max_outer") if k in cfg}
    mode = cfg.get("mode", "classical")
    if mode not in ("classical", "no_sign"):
        raise UsageError(f"mode must be classical or no_sign, got {mode!r}")
    try:
        return solver.ProblemSpec(n, m, h, boundary, **extra), mode
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def parse_center(text):
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise UsageError(f"bad center {text!r}") from None


def parse_radii(text, geometric=False):
    try:
        start, stop, count = text.split(":")
        start, stop, count = float(start), float(stop), int(count)
    except ValueError:
        raise UsageError(f"radii must be start:stop:count, got {text!r}") from None
    if count < 1 or start <= 0 or stop < start:
        raise UsageError(f"bad radii range {text!r}")
    if geometric:
        return np.geomspace(start, stop, count)
    return np.linspace(start, stop, count)


def load_quadratic(path, prefer=QPLUS):
    a = read_matrix(path)
    if prefer == QPLUS:
        try:
            return make_quadratic(a, QPLUS)
        except LabError:
            logging.getLogger(__name__).warning("%s is not in Q+; using class Q", path)
    return make_quadratic(a, Q)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, (int, str)) else _num(v) for v in row])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, float) and not np.isfinite(v):
        return None
    return v


def _jsonl_text(records):
    return "".join(json.dumps({k: _jsonable(v) for k, v in r.items()}) + "\n"
                   for r in records)


def _write_outputs(out, header, rows, records):
    out = Path(out)
    out.with_suffix(".csv").write_text(_csv_text(header, rows))
    out.with_suffix(".jsonl").write_text(_jsonl_text(records))


def cmd_moments(args):
    if args.dim not in (2, 3):
        raise UsageError(f"unsupported dimension {args.dim}")
    exact = sphere.exact_moments(args.dim).as_dict()
    quad = sphere.quadrature_moments(args.dim).as_dict()
    rows = [[k, exact[k], quad[k], abs(exact[k] - quad[k])] for k in exact]
    ratio_q = quad["S4"] / quad["S22"]
    rows.append(["S4/S22", exact["S4"] / exact["S22"], ratio_q,
                 abs(exact["S4"] / exact["S22"] - ratio_q)])
    sys.stdout.write(_csv_text(["name", "exact", "quadrature", "abs_error"], rows))
    return EXIT_OK if all(r[3] <= 1e-10 for r in rows) else 1


def cmd_make_field(args):
    params = parse_params(args.params)
    preset = build_preset(args.preset, params)
    try:
        h = float(params["spacing"])
    except KeyError:
        raise UsageError("make-field needs parameter 'spacing'") from None
    n = getattr(preset, "n", None) or int(params.get("dim", 2))
    m = int(params["nodes"]) if "nodes" in params else fields.grid_nodes(n, h)
    if h * (m - 1) / 2.0 < 1.0:
        raise UsageError("grid half-width spacing*(nodes-1)/2 must be at least 1")
    if callable(preset) and not hasattr(preset, "eval"):
        g = fields.GridField(n, m, h, np.zeros((m,) * n))
        pts = np.column_stack([c.ravel() for c in g.coords()])
        grid = fields.GridField(n, m, h, preset(pts).reshape((m,) * n))
    else:
        grid = fields.sample_field(preset, n, m, h)
    fields.write_field(args.out, grid)
    return EXIT_OK


def cmd_solve(args):
    spec, mode = spec_from_config(read_config(args.config))
    run = solver.solve_classical if mode == "classical" else solver.solve_no_sign
    u, report = run(spec)
    out = Path(args.out)
    fields.write_field(out, u)
    summary = report.summary()
    if mode == "classical":
        summary["complementarity_residual"] = solver.complementarity_residual(u)
    out.with_suffix(".jsonl").write_text(_jsonl_text(report.history + [summary]))
    print(f"mode={mode} converged={str(report.converged).lower()} "
          f"outer={report.outer_iterations} sweeps={report.sweeps} "
          f"residual={_num(report.residual)}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_monneau(args):
    u = fields.read_field(args.field)
    q = load_quadratic(args.q)
    radii = parse_radii(args.radii, args.geometric)
    trace = blowup.monneau(u, parse_center(args.center), q, radii)
    slack = 10.0 * u.resolution_length
    ok, worst = blowup.check_monotone(trace, slack)
    records = [{"type": "sample", "r": r, "M": v} for r, v in trace.rows()]
    records.append({"type": "summary", "monotone": ok, "worst_violation": worst,
                    "slack": slack, "q_class": q.class_tag})
    _write_outputs(args.out, ["r", "M"], trace.rows(), records)
    print(f"monotone={str(ok).lower()} worst_violation={_num(worst)} slack={_num(slack)}")
    return EXIT_OK


def cmd_blowup(args):
    u = fields.read_field(args.field)
    rep = blowup.uniqueness_diagnostic(u, parse_center(args.center), args.r0,
                                       args.levels, args.tol)
    header, rows = rep.header(), rep.rows()
    records = [{"type": "level", **dict(zip(header, row))} for row in rows]
    records.append({"type": "summary", "verdict": rep.verdict,
                    "max_pairwise": rep.max_pairwise, "tail_pairwise": rep.tail_pairwise,
                    "trend": rep.trend.tolist(), "truncated": rep.truncated,
                    "tol": rep.tol})
    _write_outputs(args.out, header, rows, records)
    print(f"verdict={rep.verdict} tail_pairwise={_num(rep.tail_pairwise)} "
          f"truncated={str(rep.truncated).lower()}")
    return EXIT_OK


def cmd_classify(args):
    u = fields.read_field(args.field)
    c = blowup.classify_point(u, parse_center(args.center), args.r0, args.levels)
    print(f"{c.label} reason={c.reason}")
    return EXIT_OK


def cmd_replay(args):
    a = make_quadratic(read_matrix(args.a), Q)
    b = make_quadratic(read_matrix(args.b), Q)
    rep = replay_uniqueness(a, b, args.tol)
    print("\n".join(rep.summary_lines()))
    return EXIT_OK if rep.verdict == "equal" else EXIT_DISTINCT


def build_parser():
    p = argparse.ArgumentParser(prog="obstaclelab",
                                description="No-sign obstacle problem laboratory.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("moments", help="exact vs quadrature sphere moments (CSV)")
    s.add_argument("--dim", type=int, required=True)
    s.set_defaults(func=cmd_moments)

    s = sub.add_parser("make-field", help="sample an analytic preset on a grid")
    s.add_argument("--preset", required=True)
    s.add_argument("--params", default="")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_make_field)

    s = sub.add_parser("solve", help="run the classical or no-sign solver")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("monneau", help="Monneau functional trace")
    s.add_argument("--field", required=True)
    s.add_argument("--center", required=True)
    s.add_argument("--q", required=True)
    s.add_argument("--radii", required=True)
    s.add_argument("--geometric", action="store_true")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_monneau)

    s = sub.add_parser("blowup", help="cross-scale blowup uniqueness diagnostic")
    s.add_argument("--field", required=True)
    s.add_argument("--center", required=True)
    s.add_argument("--r0", type=float, required=True)
    s.add_argument("--levels", type=int, required=True)
    s.add_argument("--tol", type=float, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_blowup)

    s = sub.add_parser("classify", help="singular / regular / unresolved")
    s.add_argument("--field", required=True)
    s.add_argument("--center", required=True)
    s.add_argument("--r0", type=float, required=True)
    s.add_argument("--levels", type=int, required=True)
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("replay", help="decide A = A~ by the pencil argument")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--tol", type=float, default=REPLAY_TOL)
    s.set_defaults(func=cmd_replay)
    return p


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    logging.captureWarnings(True)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, LabError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD


if __name__ == "__main__":
    sys.exit(main())
