"""Command line entry point: ``polytope-fem {tabulate,verify,converge}``."""
from __future__ import annotations

import argparse
import os
import sys

from .element import build_element
from .mesh import structured_mesh, write_mesh
from .micromorphic import get_pairing, solve_problem
from .reference import DomainError, polytopes
from .templates import Family, NotCoveredError
from .verify import ConvergenceReport, run_verification


def tabulate_text(family: str, order: int, dim: int, scalar_family: str = "lagrange") -> str:
    element = build_element(family, order, dim, scalar_family)
    fam = element.family
    simplex = element.simplex
    lines = [f"# {fam}^{order} on the reference {simplex.name} ({scalar_family} scalars)"]
    lines.append(f"dimension: {len(element)}")
    if fam.has_kernel_split:
        lines.append("lowest-order fields:")
        for edge, field in zip(simplex.edges, element.lowest):
            extra = f"rot = {field.rot()}" if fam == Family.N1 and dim == 2 else ""
            if fam == Family.RT:
                extra = f"div = {field.div()}"
            lines.append(f"  {edge.name}: {field}  {extra}".rstrip())
    if element.templates is not None:
        lines.append("templates:")
        trace_polys = list(simplex.edges) if fam.space == "hcurl" or dim == 2 else list(simplex.faces)
        header = "  " + "polytope".ljust(10) + "template".ljust(28) + " ".join(q.name.rjust(7) for q in trace_polys)
        lines.append(header)
        for poly in polytopes(simplex):
            for field in element.templates[poly]:
                cells = []
                for q in trace_polys:
                    mid = simplex.vertices[list(q.vertices)].mean(axis=0)
                    val = float((element.trace_functionals(q)[0] @ field(mid[None, :])[0]))
                    cells.append(f"{val:7.3g}")
                lines.append("  " + poly.name.ljust(10) + str(field).ljust(28) + " ".join(cells))
    lines.append("functions per polytope:")
    for name, count in element.counts().items():
        lines.append(f"  {name}: {count}")
    lines.append("functions per kind:")
    for kind, count in element.kind_counts().items():
        lines.append(f"  {kind}: {count}")
    lines.append("basis:")
    for f in element.functions:
        lines.append(f"  {f.index:3d} {f.kind:15s} scalar-polytope={f.polytope.name:6s} trace-polytope={f.trace.name}")
    return "\n".join(lines) + "\n"


def cmd_tabulate(args) -> int:
    sys.stdout.write(tabulate_text(args.family, args.order, args.dim, args.scalar))
    return 0


def cmd_verify(args) -> int:
    families = ("lagrange", "bernstein") if args.scalar == "both" else (args.scalar,)
    results = run_verification(args.family, args.order, args.dim, seed=args.seed, scalar_families=families)
    failed = [r for r in results if not r.passed]
    for r in results:
        print(r.line())
    if failed:
        print("failed: " + ", ".join(r.name for r in failed))
        return 1
    print("all checks passed")
    return 0


def run_convergence(problem: str, pairing: str, levels: int, base: int = 2, dump_mesh: str | None = None,
                    log=None) -> ConvergenceReport:
    dim = 2 if problem == "antiplane" else 3
    minimum = 3 if dim == 2 else 2
    if levels < minimum:
        raise DomainError(f"{problem} needs at least {minimum} levels, got {levels}")
    pair = get_pairing(pairing, dim)
    report = ConvergenceReport(problem, pair.label_u, pair.label_p, pair.hcurl_order)
    for level in range(levels):
        n = base * 2**level
        system, _, (eu, ep) = solve_problem(problem, pair, n)
        report.add(level, 2.0 / n, system.size, eu, ep)
        if dump_mesh:
            os.makedirs(dump_mesh, exist_ok=True)
            write_mesh(structured_mesh(dim, n), os.path.join(dump_mesh, f"{problem}_level{level}.mesh"))
        if log:
            log(f"level {level}: n={n} dofs={system.size} err_u={eu:.6e} err_p={ep:.6e}")
    return report


def cmd_converge(args) -> int:
    dim = 2 if args.problem == "antiplane" else 3
    report = run_convergence(args.problem, args.pairing, args.levels, args.base, args.dump_mesh,
                             log=lambda s: print(s, file=sys.stderr))
    report.write_csv(args.out)
    last = 3 if dim == 2 else 2
    su, sp = report.slopes(min(last, len(report.h)))
    print(f"slope_u = {su:.3f}")
    print(f"slope_p = {sp:.3f}")
    if args.svg:
        with open(args.svg, "w") as fh:
            fh.write(report.svg(min(last, len(report.h))))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polytope-fem", description="Polytopal-template H(curl)/H(div) elements.")
    sub = parser.add_subparsers(dest="command", required=True)

    def element_args(p):
        p.add_argument("--family", required=True, type=str.lower, choices=["n1", "n2", "bdm", "rt"])
        p.add_argument("--order", required=True, type=int)
        p.add_argument("--dim", required=True, type=int, choices=[2, 3])

    p = sub.add_parser("tabulate", help="print template sets, counts and trace tables")
    element_args(p)
    p.add_argument("--scalar", default="lagrange", choices=["lagrange", "bernstein"])
    p.set_defaults(func=cmd_tabulate)

    p = sub.add_parser("verify", help="run unisolvence, conformity, kernel and span checks")
    element_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scalar", default="both", choices=["lagrange", "bernstein", "both"])
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("converge", help="h-convergence study of a model problem")
    p.add_argument("--problem", required=True, choices=["antiplane", "rmm3d"])
    p.add_argument("--pairing", required=True, type=str.lower)
    p.add_argument("--levels", required=True, type=int)
    p.add_argument("--base", type=int, default=2, help="cells per axis on the coarsest level")
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.add_argument("--dump-mesh", dest="dump_mesh")
    p.set_defaults(func=cmd_converge)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NotCoveredError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
