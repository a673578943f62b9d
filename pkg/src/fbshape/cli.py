"""Command-line entry point: ``fbshape <command> [options]``.

Every command writes its files plus ``manifest.json`` (configuration echo
and tool version) into ``--out``.  Exit status: 0 success, 1 input error,
2 when the computed verdict is a failure (no flow convergence, a failed
admissibility test, a derivative or identity check out of tolerance).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cheeger import cheeger_condition, cheeger_convex
from .conditions import ConditionParams, didenko_ratio, existence_report, overdetermined_residuals
from .errors import FBShapeError
from .flows import FlowParams, problem_from_args, run_flow, write_domain_json, write_flow_svg, write_history_csv
from .geometry import (DeformationField, StarDomain, cgnp_deformation_stability, has_c_gnp, load_convex,
                       load_domain, mode_basis, random_star_domain)
from .meshing import triangulate
from .pde import Constant, DirichletSolver, Indicator, green_identity_report, solve_chain, solve_derivative_chain, \
    source_from_json
from .radial import QUANTITIES, BallSpec, oracle
from .shape import TAGS, FunctionalId, derivative_checks, write_derivcheck_csv

SCHEMA = "fbshape/1"


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _dump_json(data: dict, path: Path) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _write_manifest(args: argparse.Namespace, out: Path) -> None:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    _dump_json({"schema": SCHEMA, "tool": "fbshape", "version": __version__, "command": args.command,
                "config": config}, out / "manifest.json")


def _read_json(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"no such file: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def _domain(args) -> StarDomain:
    if getattr(args, "domain", None):
        _read_json(args.domain)
        return load_domain(args.domain, args.modes)
    rng = np.random.default_rng(args.seed)
    return random_star_domain(rng, modes=args.modes)


def _source(args):
    if getattr(args, "source", None):
        return source_from_json(_read_json(args.source))
    return Constant(float(getattr(args, "f", 1.0)))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_solve(args, out: Path) -> int:
    domain = _domain(args)
    h = args.h if args.h else 0.02 * domain.a0
    mesh = triangulate(domain, h)
    chain = solve_chain(mesh, _source(args))
    mesh.dump(out)
    summary = {"schema": SCHEMA, "nodes": mesh.n_nodes, "triangles": len(mesh.triangles), "h": h,
               "u_center": float(chain.u[0]), "min_angle_deg": mesh.min_angle(), "stages": {}}
    for s in ("u", "v", "w", "z"):
        q = chain.edge_flux(s)
        chain.dump_flux(s, out / f"flux_{s}.csv")
        with open(out / f"field_{s}.csv", "w", newline="") as fh:
            fh.write("node_id,value\n")
            fh.writelines(f"{i},{float(x)!r}\n" for i, x in enumerate(chain.fields[s]))
        summary["stages"][s] = {"flux_min": float(q.min()), "flux_max": float(q.max()),
                                "flux_integral": mesh.boundary_integral(chain.flux[s]),
                                "source_integral": chain.source_integral(s)}
    _dump_json(summary, out / "solve.json")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_oracle(args, out: Path) -> int:
    try:
        value = oracle(BallSpec(args.N, args.R), args.quantity, args.r, c=args.c, k=args.k)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    _dump_json({"schema": SCHEMA, "N": args.N, "R": args.R, "quantity": args.quantity, "value": value},
               out / "oracle.json")
    print(repr(value))
    return 0


def cmd_derivcheck(args, out: Path) -> int:
    domain = _domain(args)
    fids = [FunctionalId.parse(t) for t in args.functional]
    basis = mode_basis(args.field_modes if args.field_modes is not None else domain.modes)
    rows = derivative_checks(domain, fids, basis, _source(args), args.eps)
    write_derivcheck_csv(rows, out / "derivcheck.csv")
    worst = max(r.rel_gap for r in rows)
    print(f"{len(rows)} checks, worst relative gap {worst:.3e}")
    return 0 if worst <= args.tol else 2


def cmd_flow(args, out: Path) -> int:
    _read_json(args.init)
    init = load_domain(args.init, args.modes)
    src = _read_json(args.source) if args.source else None
    try:
        problem = problem_from_args(args.problem, args.k, args.c, src)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    constraint = load_convex(args.constraint) if args.constraint else None
    params = FlowParams(args.step0, args.tol, args.max_iters, constraint, args.h_factor)
    res = run_flow(problem, init, params)
    write_history_csv(res, out / "history.csv")
    write_domain_json(res.domain, out / "final_domain.json")
    _dump_json({"schema": SCHEMA, "problem": problem.to_json(), **res.to_json()}, out / "flow.json")
    if args.svg:
        write_flow_svg(res, out / "flow.svg")
    print(f"{res.verdict} after {res.iterations} iterations, residual {res.residual:.3e}, "
          f"radius {res.circle_radius:.6f}, circle distance {res.circle_distance:.3e}")
    return 0 if res.verdict == "converged" else 2


def cmd_verify(args, out: Path) -> int:
    domain = None
    if args.domain:
        _read_json(args.domain)
        domain = load_domain(args.domain, args.modes)
    report: dict = {"schema": SCHEMA}
    failed = False
    if args.convex:
        _read_json(args.convex)
        body = load_convex(args.convex)
        source = source_from_json(_read_json(args.source)) if args.source else Indicator(body, args.f)
        rep = existence_report(body, source, ConditionParams(k=args.k, c=args.c))
        report["existence"] = rep.to_json()
        failed |= any(e.verdict == "violated" for e in rep.entries)
        if domain is not None:
            report["c_gnp"] = has_c_gnp(domain, body).to_json()
    if domain is not None:
        report["overdetermined"] = overdetermined_residuals(domain, _source(args)).to_json()
        report["didenko"] = didenko_ratio(domain).to_json()
    if len(report) == 1:
        raise InputError("verify needs --domain and/or --convex")
    _dump_json(report, out / "report.json")
    print(json.dumps(report.get("existence", {}).get("entries", []), indent=2, sort_keys=True))
    return 2 if failed else 0


def cmd_cgnp(args, out: Path) -> int:
    _read_json(args.domain)
    _read_json(args.convex)
    domain, body = load_domain(args.domain, args.modes), load_convex(args.convex)
    v = has_c_gnp(domain, body)
    data = {"schema": SCHEMA, **v.to_json()}
    if args.t_max is not None and v.holds:
        fld = DeformationField(args.speed)
        data["stable_step"] = cgnp_deformation_stability(domain, body, fld, args.t_max)
    _dump_json(data, out / "cgnp.json")
    print(v.status)
    return 0 if v.holds else 2


def cmd_cheeger(args, out: Path) -> int:
    _read_json(args.convex)
    body = load_convex(args.convex)
    res = cheeger_convex(body)
    data = {"schema": SCHEMA, **res.to_json(), "svg_path": res.svg_path()}
    if args.f is not None:
        data["condition"] = cheeger_condition(body, Constant(args.f)).__dict__
    _dump_json(data, out / "cheeger.json")
    (out / "cheeger.svg").write_text(res.svg(body))
    print(f"h = {res.h!r}  r = {res.r!r}")
    return 0


def cmd_identities(args, out: Path) -> int:
    domain = _domain(args)
    mesh = triangulate(domain, args.h if args.h else 0.02 * domain.a0)
    chain = solve_chain(mesh, Constant(1.0), solver=DirichletSolver(mesh))
    rows = []
    for fld in mode_basis(args.field_modes):
        d = solve_derivative_chain(mesh, chain, fld)
        for g in green_identity_report(mesh, chain, d):
            rows.append((fld.label(), g))
    scale = {name: max(abs(g.rhs) for _, g in rows if g.name == name) for name in {g.name for _, g in rows}}
    worst = 0.0
    with open(out / "identities.csv", "w", newline="") as fh:
        fh.write("field_mode,identity,lhs,rhs,gap\n")
        for label, g in rows:
            gap = abs(g.lhs - g.rhs) / scale[g.name]
            worst = max(worst, gap)
            fh.write(f"{label},{g.name},{g.lhs!r},{g.rhs!r},{gap!r}\n")
    print(f"{len(rows)} identity evaluations, worst gap {worst:.3e}")
    return 0 if worst <= args.tol else 2


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fbshape", description="Overdetermined free-boundary problems on planar star domains.")
    p.add_argument("--version", action="version", version=f"fbshape {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, domain=True):
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--modes", type=int, default=16, help="Fourier mode cutoff M")
        if domain:
            sp.add_argument("--domain", help="domain JSON; a random domain from --seed if omitted")
            sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("solve", help="solve the u, v, w, z chain and dump mesh, fields and fluxes")
    common(sp)
    sp.add_argument("--h", type=float, default=None)
    sp.add_argument("--source", help="source JSON")
    sp.add_argument("--f", type=float, default=1.0, help="constant source value")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("oracle", help="closed-form ball quantity")
    common(sp, domain=False)
    sp.add_argument("--N", type=int, default=2)
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--quantity", required=True, choices=QUANTITIES)
    sp.add_argument("--r", type=float, default=None)
    sp.add_argument("--c", type=float, default=None)
    sp.add_argument("--k", type=float, default=None)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("derivcheck", help="analytic versus finite-difference shape derivatives")
    common(sp)
    sp.add_argument("--functional", nargs="+", default=["VOL", "PER", "F_INT_U2", "G_DIRICHLET", "J_P:0.03125"],
                    help=f"tags among {', '.join(TAGS)}; J_P takes :c")
    sp.add_argument("--field-modes", type=int, default=None, help="basis cutoff (default: --modes)")
    sp.add_argument("--eps", type=float, default=1e-3)
    sp.add_argument("--tol", type=float, default=1e-2)
    sp.add_argument("--source", help="source JSON")
    sp.add_argument("--f", type=float, default=1.0)
    sp.set_defaults(func=cmd_derivcheck)

    sp = sub.add_parser("flow", help="residual-driven boundary flow")
    common(sp, domain=False)
    sp.add_argument("--problem", required=True, choices=["serrin", "qs", "p", "oc"])
    sp.add_argument("--init", required=True, help="initial domain JSON")
    sp.add_argument("--k", type=float, default=None)
    sp.add_argument("--c", type=float, default=None)
    sp.add_argument("--source", help="source JSON (qs and p)")
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.add_argument("--step0", type=float, default=1.0)
    sp.add_argument("--max-iters", type=int, default=40)
    sp.add_argument("--h-factor", type=float, default=0.02, help="mesh size relative to a0")
    sp.add_argument("--constraint", help="convex body JSON the iterates must keep C-GNP with")
    sp.add_argument("--svg", action="store_true", help="also write flow.svg")
    sp.set_defaults(func=cmd_flow)

    sp = sub.add_parser("verify", help="existence inequalities and overdetermined residuals")
    common(sp, domain=False)
    sp.add_argument("--domain", help="domain JSON")
    sp.add_argument("--convex", help="convex body JSON (the set C)")
    sp.add_argument("--k", type=float, default=None)
    sp.add_argument("--c", type=float, default=None)
    sp.add_argument("--source", help="source JSON (default: indicator of C with value --f)")
    sp.add_argument("--f", type=float, default=1.0)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("cgnp", help="C-GNP admissibility of a domain relative to a convex body")
    common(sp, domain=False)
    sp.add_argument("--domain", required=True)
    sp.add_argument("--convex", required=True)
    sp.add_argument("--t-max", type=float, default=None, help="also report the stable step along --speed")
    sp.add_argument("--speed", type=float, default=-1.0, help="uniform normal speed for the stability step")
    sp.set_defaults(func=cmd_cgnp)

    sp = sub.add_parser("cheeger", help="Cheeger constant and set of a convex polygon")
    common(sp, domain=False)
    sp.add_argument("--convex", required=True)
    sp.add_argument("--f", type=float, default=None, help="constant source for the existence condition")
    sp.set_defaults(func=cmd_cheeger)

    sp = sub.add_parser("identities", help="flux identities of the derivative chain over a mode basis")
    common(sp)
    sp.add_argument("--h", type=float, default=None)
    sp.add_argument("--field-modes", type=int, default=4)
    sp.add_argument("--tol", type=float, default=2e-2)
    sp.set_defaults(func=cmd_identities)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write_manifest(args, out)
        return args.func(args, out)
    except (InputError, FBShapeError, ValueError, KeyError, OSError) as exc:
        print(f"fbshape: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
