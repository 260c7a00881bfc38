"""``weilkit`` command-line entry point.

Every subcommand reads JSON, prints one JSON document (sorted keys) and
exits 0 on success, 1 on a domain or validation error, 2 on an internal
invariant violation.  The document carries a run manifest with input
digests, seed, tolerances and the tool version.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import InvalidInput, InvariantViolation, WeilkitError
from .jsonio import (
    algebra_from_json,
    apoint_from_json,
    apoint_to_json,
    dumps,
    manifold_from_json,
    metric_config_from_json,
)

COMMANDS = (
    "algebra",
    "eval",
    "transition",
    "dist",
    "lift-path",
    "lift-map",
    "orbit",
    "fix",
    "c0",
    "pwt",
    "betti",
    "bundle-check",
    "verify",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(dumps({"error": {"code": "usage", "message": message}}))
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="weilkit", description="Weil algebras and Weil bundles over small manifolds.")
    p.add_argument("--version", action="version", version=f"weilkit {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    helps = {
        "algebra": "canonical basis, k and multiplication data of an algebra",
        "eval": "evaluate an expression at an A-point",
        "transition": "move an A-point to another chart",
        "dist": "distance between two A-points",
        "lift-path": "sample a lifted path between two A-points",
        "lift-map": "apply the Weil lifting of a map to A-points",
        "orbit": "iterate a lifted diffeomorphism",
        "fix": "grid scan for fixed points of a lifted diffeomorphism",
        "c0": "sampled C0 distance between two diffeomorphisms",
        "pwt": "pointwise gap between two lifted diffeomorphisms",
        "betti": "real Betti numbers of a simplicial complex",
        "bundle-check": "Betti numbers of a Weil bundle via the fiber retraction",
        "verify": "run the acceptance suite",
    }
    for name in COMMANDS:
        s = sub.add_parser(name, help=helps[name])
        s.add_argument("--spec", help="JSON file (or inline JSON) for the main input")
        s.add_argument("--manifold", help="manifold JSON file, inline JSON, or builtin name")
        s.add_argument("--algebra", help="algebra JSON file or inline JSON")
        s.add_argument("--point", help="A-point JSON file or inline JSON")
        s.add_argument("--scenario", help="scenario JSON file or inline JSON")
        s.add_argument("--out", help="write the result here instead of stdout")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--tol", type=float, default=None)
        s.add_argument("--timing", action="store_true", help="include wall time (breaks byte-identical output)")
        if name == "eval":
            s.add_argument("--expr", help="expression to evaluate")
        if name == "verify":
            s.add_argument("--only", help="comma-separated check numbers")
    return p


# ---------------------------------------------------------------------------
# input handling


class _Inputs:
    def __init__(self):
        self.digests = {}

    def load(self, value, what):
        if value is None:
            return None
        if os.path.exists(value):
            with open(value, "rb") as fh:
                raw = fh.read()
            self.digests[what] = hashlib.sha256(raw).hexdigest()
            try:
                return json.loads(raw)
            except json.JSONDecodeError as exc:
                raise InvalidInput(f"{value}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        text = value.strip()
        if text.startswith("{") or text.startswith("["):
            self.digests[what] = hashlib.sha256(text.encode()).hexdigest()
            try:
                return json.loads(text)
            except json.JSONDecodeError as exc:
                raise InvalidInput(f"inline {what}: invalid JSON ({exc.msg})") from None
        if what == "manifold":
            self.digests[what] = hashlib.sha256(text.encode()).hexdigest()
            return text
        raise InvalidInput(f"{what}: no such file {value!r}")


def _require(obj, what):
    if obj is None:
        raise InvalidInput(f"this command needs --{what}")
    return obj


def _scenario(args, inputs):
    return _require(inputs.load(args.scenario, "scenario"), "scenario")


def _manifold(args, inputs, scn=None, fallback=None):
    m = inputs.load(args.manifold, "manifold")
    if m is None and scn is not None:
        m = scn.get("manifold")
        if m is None:
            for key in ("map", "phi"):
                if isinstance(scn.get(key), dict) and "from" in scn[key]:
                    m = scn[key]["from"]
                    break
    if m is None:
        m = fallback
    return manifold_from_json(_require(m, "manifold"))


def _algebra(args, inputs, scn=None):
    a = inputs.load(args.algebra, "algebra")
    if a is None and scn is not None:
        a = scn.get("algebra")
    return algebra_from_json(_require(a, "algebra"))


def _point(d, M, A):
    return apoint_from_json(dict(d), M, A)


# ---------------------------------------------------------------------------
# commands


def cmd_algebra(args, inputs):
    spec = _require(inputs.load(args.spec, "spec") or inputs.load(args.algebra, "algebra"), "spec")
    A = algebra_from_json(spec)
    out = A.to_dict()
    out["mul_table"] = A.mul_table.tolist()
    out["degrees"] = list(A.basis_degrees)
    return out


def cmd_eval(args, inputs):
    from .apoint import base_value, evaluate

    pt = _require(inputs.load(args.point, "point"), "point")
    M = _manifold(args, inputs, pt)
    A = _algebra(args, inputs, pt)
    xi = _point(pt, M, A)
    spec = inputs.load(args.spec, "spec") or {}
    expr = args.expr or spec.get("expr")
    value = evaluate(xi, _require(expr, "expr"))
    return {
        "expr": expr,
        "point": apoint_to_json(xi),
        "value": dict(zip(A.basis_names, value.coeffs.tolist())),
        "base_value": base_value(xi, expr),
    }


def cmd_transition(args, inputs):
    from .lifting import prolong_transition

    pt = _require(inputs.load(args.point, "point"), "point")
    M = _manifold(args, inputs, pt)
    A = _algebra(args, inputs, pt)
    xi = _point(pt, M, A)
    spec = inputs.load(args.spec, "spec") or {}
    target = spec.get("to") or pt.get("to")
    candidates = [target] if target else [c for c in M.charts if c != xi.chart]
    last = None
    for cid in candidates:
        for T in M.transition_pieces(xi.chart, cid):
            try:
                out = prolong_transition(xi, T)
            except WeilkitError as exc:
                last = exc
                continue
            return {
                "from": apoint_to_json(xi),
                "to": apoint_to_json(out),
                "real_coordinates": out.matrix().ravel().tolist(),
            }
    if last is not None:
        raise last
    from .errors import ChartDomain

    raise ChartDomain(f"no transition from chart {xi.chart!r} applies")


def cmd_dist(args, inputs):
    from .metric import distance_report

    scn = _scenario(args, inputs)
    M = _manifold(args, inputs, scn)
    A = _algebra(args, inputs, scn)
    cfg = metric_config_from_json(scn.get("metric"))
    a, b = _point(scn["a"], M, A), _point(scn["b"], M, A)
    rep = distance_report(a, b, cfg)
    rep["a"], rep["b"] = apoint_to_json(a), apoint_to_json(b)
    return rep


def cmd_lift_path(args, inputs):
    from .lifting import lift_path

    scn = _scenario(args, inputs)
    M = _manifold(args, inputs, scn)
    A = _algebra(args, inputs, scn)
    start, end = _point(scn["start"], M, A), _point(scn["end"], M, A)
    semantics = scn.get("semantics", "coordinate")
    path = lift_path(start, end, scn.get("curve"), semantics, scn.get("chart"))
    n = int(scn.get("samples", 11))
    if n < 2:
        raise InvalidInput("samples must be at least 2")
    rows = []
    for t in np.linspace(0.0, 1.0, n):
        if semantics == "coordinate":
            rows.append({"t": float(t), "point": apoint_to_json(path.value(t))})
        else:
            fp = path.functional(t)
            probes = scn.get("functions", ["x"] if "x" in M.chart(path.chart).coordinate_names else list(M.chart(path.chart).coordinate_names)[:1])
            rows.append(
                {
                    "t": float(t),
                    "base": {"chart": fp.base.chart, "coords": list(fp.base.coords)},
                    "values": {f: dict(zip(A.basis_names, fp(f).coeffs.tolist())) for f in probes},
                }
            )
    return {"semantics": semantics, "chart": path.chart, "curve": [str(c) for c in scn.get("curve") or []], "samples": rows}


def cmd_lift_map(args, inputs):
    from .lifting import lift_map

    scn = _scenario(args, inputs)
    M = _manifold(args, inputs, scn)
    A = _algebra(args, inputs, scn)
    mp = scn["map"]
    N = manifold_from_json(mp["to"]) if mp.get("to", M.name) != M.name else M
    F = lift_map(mp, A, M, N)
    pts = scn.get("points")
    if pts is None:
        pts = [_require(inputs.load(args.point, "point"), "point")]
    rows = []
    for p in pts:
        xi = _point(p, M, A)
        rows.append({"in": apoint_to_json(xi), "out": apoint_to_json(F.apply(xi))})
    return {"map": F.spec.to_json(), "results": rows}


def _pair(scn, M, fwd, inv):
    from .dynamics import DiffeoPair

    return DiffeoPair.from_json(M, scn[fwd], scn.get(inv))


def cmd_orbit(args, inputs):
    from .dynamics import DEFAULT_TOL, iterate

    scn = _scenario(args, inputs)
    M = _manifold(args, inputs, scn)
    A = _algebra(args, inputs, scn)
    phi = _pair(scn, M, "map", "inverse")
    xi = _point(scn["point"], M, A)
    tol = args.tol if args.tol is not None else float(scn.get("tol", DEFAULT_TOL))
    rec = iterate(phi, A, xi, int(scn.get("steps", 100)), tol, metric_config_from_json(scn.get("metric")))
    return rec.to_json()


def cmd_fix(args, inputs):
    from .dynamics import DEFAULT_TOL, converse_check, fixed_scan

    scn = _scenario(args, inputs)
    M = _manifold(args, inputs, scn)
    A = _algebra(args, inputs, scn)
    phi = _pair(scn, M, "map", "inverse")
    tol = args.tol if args.tol is not None else float(scn.get("tol", DEFAULT_TOL))
    rep = fixed_scan(phi, A, scn["grid"], tol, metric_config_from_json(scn.get("metric")))
    out = rep.to_json()
    out["max_base_gap_of_fixed"] = converse_check(phi, rep)
    if out["max_base_gap_of_fixed"] > tol:
        raise InvariantViolation("a reported fixed point has a base point that moves by more than tol")
    return out


def cmd_c0(args, inputs):
    from .dynamics import c0_distance

    scn = _scenario(args, inputs)
    M = _manifold(args, inputs, scn)
    phi, psi = _pair(scn, M, "phi", "phi_inverse"), _pair(scn, M, "psi", "psi_inverse")
    n = int(scn.get("samples", 1000))
    return {
        "c0_distance": c0_distance(phi, psi, n, args.seed),
        "samples": n,
        "inverse_term": phi.inverse is not None and psi.inverse is not None,
    }


def cmd_pwt(args, inputs):
    from .apoint import zero_section
    from .dynamics import pointwise_gap

    scn = _scenario(args, inputs)
    M = _manifold(args, inputs, scn)
    A = _algebra(args, inputs, scn)
    phi, psi = _pair(scn, M, "phi", "phi_inverse"), _pair(scn, M, "psi", "psi_inverse")
    if "points" in scn:
        pts = [_point(p, M, A) for p in scn["points"]]
    else:
        rng = np.random.default_rng(args.seed)
        n = int(scn.get("samples", 20))
        if scn.get("zero_section", True):
            pts = [zero_section(M, A, x) for x in M.sample(n, rng)]
        else:
            from .verify import random_apoint

            pts = [random_apoint(M, A, rng) for _ in range(n)]
    gap = pointwise_gap(phi, psi, A, pts, metric_config_from_json(scn.get("metric")))
    return {"pointwise_gap": gap, "samples": len(pts), "note": "supremum over the listed samples only"}


def cmd_betti(args, inputs):
    from .topology import SimplicialComplex, betti, catalog_complex

    spec = inputs.load(args.spec, "spec")
    if spec is not None:
        K = SimplicialComplex.from_json(spec)
        label = "input"
    else:
        name = _require(inputs.load(args.manifold, "manifold"), "spec or --manifold")
        label = name if isinstance(name, str) else name.get("builtin", "?")
        K = catalog_complex(label)
    return {
        "complex": label,
        "betti": betti(K),
        "f_vector": [len(s) for s in K.simplices],
        "euler_characteristic": K.euler_characteristic(),
    }


def cmd_bundle_check(args, inputs):
    from .topology import bundle_cohomology_check

    name = _require(inputs.load(args.manifold, "manifold"), "manifold")
    if isinstance(name, dict):
        name = name.get("builtin") or name.get("name")
    A = _algebra(args, inputs)
    return bundle_cohomology_check(name, A, seed=args.seed)


def cmd_verify(args, inputs):
    from .verify import run_all

    only = None
    if args.only:
        try:
            only = {int(x) for x in args.only.split(",") if x.strip()}
        except ValueError:
            raise InvalidInput("--only takes comma-separated integers") from None
    results = run_all(only)
    for r in results:
        sys.stderr.write(r.line() + "\n")
    return {
        "checks": [r.to_json(args.timing) for r in results],
        "passed": sum(r.passed for r in results),
        "failed": [r.number for r in results if not r.passed],
    }


HANDLERS = {
    "algebra": cmd_algebra,
    "eval": cmd_eval,
    "transition": cmd_transition,
    "dist": cmd_dist,
    "lift-path": cmd_lift_path,
    "lift-map": cmd_lift_map,
    "orbit": cmd_orbit,
    "fix": cmd_fix,
    "c0": cmd_c0,
    "pwt": cmd_pwt,
    "betti": cmd_betti,
    "bundle-check": cmd_bundle_check,
    "verify": cmd_verify,
}


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    inputs = _Inputs()
    t0 = time.perf_counter()
    try:
        result = HANDLERS[args.command](args, inputs)
    except WeilkitError as exc:
        sys.stderr.write(dumps({"error": exc.to_dict()}))
        return 2 if isinstance(exc, InvariantViolation) else 1
    except (KeyError, TypeError, ValueError) as exc:
        # malformed input documents surface here (missing keys, wrong types)
        sys.stderr.write(dumps({"error": {"code": "invalid_input", "message": f"{type(exc).__name__}: {exc}"}}))
        return 1
    manifest = {
        "command": args.command,
        "inputs": dict(sorted(inputs.digests.items())),
        "seed": args.seed,
        "tol": args.tol,
        "version": __version__,
    }
    if args.timing:
        manifest["wall_time_s"] = time.perf_counter() - t0
    _emit(dumps({"manifest": manifest, "result": result}), args.out)
    if args.command == "verify" and result["failed"]:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
