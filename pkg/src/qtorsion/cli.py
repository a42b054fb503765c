"""``tmk`` command-line entry point.

Exit codes: 0 success, 1 a verification check failed, 2 input or domain
error, 3 mesh or solver failure, 4 Minkowski solve did not converge (the
partial solution and its history are still written).
"""

import argparse
from dataclasses import asdict
import logging
from pathlib import Path
import sys
import time

import numpy as np

from . import __version__, io, plot
from .errors import (DomainError, InconsistentMeshError, InvalidBodyError, LoadError,
                     MeshingError, SolverError)
from .geometry import angular_distance
from .kernels import BACKEND
from .minkowski import SolveConfig, discretize_measure, solve_discrete, solve_general
from .torsion import TorsionConfig, compute_torsion, lp_torsional_measure, torsion_report

EXIT_OK, EXIT_CHECKS, EXIT_INPUT, EXIT_SOLVER, EXIT_NONCONVERGED = 0, 1, 2, 3, 4

log = logging.getLogger("qtorsion.cli")


class _Fail(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _check_q(q):
    if not q > 1:
        raise DomainError(f"exponent q must exceed 1, got {q}", invariant="q-range")


def _finish(args, out, config, inputs, t0):
    io.write_manifest(out, " ".join(["tmk"] + args.argv), config,
                      [p for p in inputs if p is not None], __version__,
                      time.perf_counter() - t0, args.seed)


def _torsion_doc(body, rep):
    sol = rep.solution
    return {
        "format": io.FORMAT,
        "kind": "torsion_report",
        "q": rep.q,
        "T_q": rep.T_q,
        "identity_residual": rep.identity_residual,
        "grad_max": rep.grad_max,
        "diameter": rep.diameter,
        "body": io.body_to_dict(body),
        "measure": {"angles": rep.measure.angles, "weights": rep.measure.weights},
        "mesh": {"h": rep.mesh_h, "n_nodes": rep.n_nodes, "n_triangles": rep.n_triangles,
                 "min_angle_deg": sol.mesh.min_angle},
        "solver": {"iterations": sol.iterations, "residual": sol.residual_norm, "tol": sol.tol,
                   "backend": BACKEND},
    }


def cmd_torsion(args):
    t0 = time.perf_counter()
    _check_q(args.q)
    body = io.load_body(args.body)
    cfg = TorsionConfig(h=args.h, tol=args.tol)
    rep = compute_torsion(body, args.q, cfg)
    io.write_json(args.out, _torsion_doc(body, rep))
    if args.dump_mesh:
        sol = rep.solution
        io.write_json(args.dump_mesh, {"format": io.FORMAT, "nodes": sol.mesh.nodes,
                                       "triangles": sol.mesh.triangles, "u": sol.u})
    _finish(args, args.out, asdict(cfg) | {"q": args.q}, [args.body], t0)
    return EXIT_OK


def cmd_measure(args):
    """Lp q-torsional measure of a body, written in the measure input format."""
    t0 = time.perf_counter()
    _check_q(args.q)
    if not args.p > 0:
        raise DomainError(f"p must be positive, got {args.p}", invariant="p-range")
    body = io.load_body(args.body)
    cfg = TorsionConfig(h=args.h, tol=args.tol)
    if args.p == 1.0:
        m = torsion_report(body, args.q, cfg).measure
    else:
        m = lp_torsional_measure(body, args.p, args.q, cfg)
    io.write_json(args.out, io.measure_to_dict(m))
    _finish(args, args.out, asdict(cfg) | {"q": args.q, "p": args.p}, [args.body], t0)
    return EXIT_OK


def _solve_config(args):
    return SolveConfig(p=args.p, q=args.q, mesh_h=args.h, outer_tol=args.tol,
                       max_outer_iters=args.max_outer_iters, scheme=args.scheme, seed=args.seed)


def _weights_on(body, m):
    """Measure weights aligned with the body's normals (0 where absent)."""
    w = np.zeros(len(body))
    for a, c in zip(m.angles, m.weights):
        w[int(np.argmin(angular_distance(body.angles, a)))] += c
    return w


def _solution_doc(P, rep, m, cfg):
    return {
        "format": io.FORMAT,
        "kind": "minkowski_solution",
        "status": rep.status,
        "residual": rep.final_residual,
        "lambda0": rep.lambda0,
        "n_outer": rep.n_outer,
        "body": io.body_to_dict(P),
        "measure": {"angles": m.angles, "weights": m.weights},
        "config": asdict(cfg),
        "history": rep.iterations,
    }


def cmd_solve(args):
    t0 = time.perf_counter()
    cfg = _solve_config(args)
    m = io.load_measure(args.measure)
    P, rep = solve_discrete(m, cfg)
    doc = io.to_plain(_solution_doc(P, rep, m, cfg))
    io.write_json(args.out, doc)
    if args.log:
        Path(args.log).write_text(plot.history_csv(doc["history"]), encoding="utf-8")
    _finish(args, args.out, asdict(cfg), [args.measure], t0)
    if rep.status != "converged":
        raise _Fail(EXIT_NONCONVERGED, f"solver {rep.status} with certified residual "
                                       f"{rep.final_residual:.3e} > {cfg.outer_tol:g}")
    return EXIT_OK


def _write_general_log(path, doc):
    rows = [(s["N"],) + r for s in doc["solutions"] for r in plot.history_rows(s["history"])]
    io.write_csv(path, ("N",) + plot.HISTORY_HEADER, rows)


def cmd_general(args):
    t0 = time.perf_counter()
    cfg = _solve_config(args)
    try:
        schedule = tuple(int(s) for s in args.schedule.split(","))
    except ValueError as exc:
        raise DomainError(f"bad schedule {args.schedule!r}", invariant="schedule") from exc
    table = io.load_density(args.density)
    # fail on a bad density before the first solve
    discretize_measure(table, schedule[0])
    g = solve_general(table, cfg, schedule)
    solutions = []
    for N, P, rep in zip(schedule, g.bodies, g.reports):
        m = discretize_measure(table, N)
        solutions.append({"N": N, "status": rep.status, "residual": rep.final_residual,
                          "lambda0": rep.lambda0, "body": io.body_to_dict(P),
                          "measure": {"angles": m.angles, "weights": m.weights},
                          "history": rep.iterations})
    doc = io.to_plain({
        "format": io.FORMAT, "kind": "minkowski_general", "schedule": list(schedule),
        "gaps": g.gaps, "gaps_decreasing": g.gaps_decreasing, "spreads": g.spreads,
        "failed_at": g.failed_at, "error": g.error, "config": asdict(cfg),
        "solutions": solutions,
    })
    io.write_json(args.out, doc)
    if args.log:
        _write_general_log(args.log, doc)
    _finish(args, args.out, asdict(cfg) | {"schedule": list(schedule)}, [args.density], t0)
    if g.failed_at is not None:
        raise _Fail(EXIT_SOLVER, f"solve failed at N={g.failed_at}: {g.error}")
    if any(r.status != "converged" for r in g.reports):
        raise _Fail(EXIT_NONCONVERGED, "some discretized problems did not converge")
    return EXIT_OK


def cmd_verify(args):
    from .verify import run_all

    t0 = time.perf_counter()
    checks = run_all(seed=args.seed, q=args.q, p=args.p, h=args.h,
                     n_bodies=args.bodies, n_pairs=args.pairs)
    config = {"seed": args.seed, "q": args.q, "p": args.p, "h": args.h,
              "bodies": args.bodies, "pairs": args.pairs}
    ok = all(c.pass_ for c in checks)
    io.write_json(args.out, {"format": io.FORMAT, "kind": "checks", "config": config,
                             "all_pass": ok, "checks": [c.to_dict() for c in checks]})
    for c in checks:
        print(f"{'PASS' if c.pass_ else 'FAIL'}  {c.name:<24} worst={c.worst_violation:.3e} "
              f"tol={c.tolerance:.1e}")
    _finish(args, args.out, config, [], t0)
    return EXIT_OK if ok else EXIT_CHECKS


def cmd_plot(args):
    src = Path(args.input)
    if not src.is_file():
        raise LoadError(f"no such file: {src}", invariant="input-file")
    raw = io.read_json(src)
    out = Path(args.out)
    if "kind" not in raw:
        body = io.body_from_dict(raw)
        out.write_text(plot.polygon_svg(body), encoding="utf-8")
        return EXIT_OK
    doc = io.load_document(src)
    kind = doc["kind"]
    if kind in ("torsion_report", "minkowski_solution"):
        body = io.body_from_dict(doc["body"])
        m = io.measure_from_dict(doc["measure"])
        title = (f"T_q = {doc['T_q']:.6g}" if kind == "torsion_report"
                 else f"{doc['status']}, residual {doc['residual']:.3e}")
        out.write_text(plot.polygon_svg(body, _weights_on(body, m), title), encoding="utf-8")
        if args.log and kind == "minkowski_solution":
            Path(args.log).write_text(plot.history_csv(doc["history"]), encoding="utf-8")
    elif kind == "minkowski_general":
        previous = []
        for s in doc["solutions"]:
            body = io.body_from_dict(s["body"])
            m = io.measure_from_dict(s["measure"])
            target = out.with_name(f"{out.stem}_N{s['N']}{out.suffix or '.svg'}")
            target.write_text(plot.polygon_svg(body, _weights_on(body, m), f"N = {s['N']}",
                                               ghosts=previous), encoding="utf-8")
            previous = previous + [body]
        if args.log:
            _write_general_log(args.log, doc)
    else:
        raise LoadError(f"nothing to plot in a {kind!r} document", invariant="document-kind")
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog="tmk", description="q-torsional rigidity toolkit")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = ap.add_subparsers(dest="group", required=True)

    def common(p, h=0.02, tol=1e-10):
        p.add_argument("--h", type=float, default=h, help="target mesh size")
        p.add_argument("--tol", type=float, default=tol)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True)

    tors = sub.add_parser("torsion").add_subparsers(dest="action", required=True)
    p = tors.add_parser("compute", help="T_q and the q-torsional measure of a body")
    p.add_argument("--body", required=True)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--dump-mesh", help="write nodes, triangles and nodal u here")
    common(p)
    p.set_defaults(func=cmd_torsion)

    meas = sub.add_parser("measure").add_subparsers(dest="action", required=True)
    p = meas.add_parser("compute", help="Lp q-torsional measure of a body")
    p.add_argument("--body", required=True)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--p", type=float, default=1.0)
    common(p)
    p.set_defaults(func=cmd_measure)

    mink = sub.add_parser("minkowski").add_subparsers(dest="action", required=True)
    for name, func, src in (("solve", cmd_solve, "--measure"),
                            ("general", cmd_general, "--density")):
        p = mink.add_parser(name)
        p.add_argument(src, required=True)
        p.add_argument("--p", type=float, default=0.5)
        p.add_argument("--q", type=float, default=2.0)
        p.add_argument("--max-outer-iters", type=int, default=50)
        p.add_argument("--scheme", choices=("newton", "fixed_point"), default="newton")
        p.add_argument("--log", help="residual history CSV")
        if name == "general":
            p.add_argument("--schedule", default="8,16,32")
        common(p, h=0.04, tol=1e-2)
        p.set_defaults(func=func)

    ver = sub.add_parser("verify").add_subparsers(dest="action", required=True)
    p = ver.add_parser("all", help="run every property check")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--h", type=float, default=0.02)
    p.add_argument("--bodies", type=int, default=6)
    p.add_argument("--pairs", type=int, default=6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="SVG of a body, report or solution")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="residual history CSV")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"tmk: {exc}", file=sys.stderr)
        return exc.code
    except (LoadError, DomainError, InvalidBodyError) as exc:
        print(f"tmk: error [{exc.invariant}]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (MeshingError, SolverError, InconsistentMeshError) as exc:
        print(f"tmk: error [{exc.invariant}]: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
