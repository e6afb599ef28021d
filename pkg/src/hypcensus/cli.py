"""Command-line interface.

Subcommands mirror the pipeline stages: ``enumerate`` emits candidate
triangulations, ``solve`` runs the hyperbolicity equations, ``canonical``
computes canonical decompositions, ``run`` executes the whole census into
an output directory, and ``shape`` prints the geometry of a single
tetrahedron from its dihedral angles.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import census as cns
from . import geometry as geo
from .enumeration import DEFAULT_FILTERS, EnumerationConfig, enumerate_candidates
from .kojima import CanonicalizationError, InconsistentSolutionError, canonicalize
from .solver import solve_with_cusp_handoff
from .triangulation import Triangulation


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text()


def cmd_enumerate(args) -> int:
    filters = tuple(f for f in DEFAULT_FILTERS if f not in (args.no_filter or []))
    cfg = EnumerationConfig(args.n, filters=filters, budget_nodes=args.budget_nodes)
    stream = enumerate_candidates(cfg)
    _write(args.output, cns.candidates_text(stream.triangulations, cfg, stream.complete))
    return 0 if stream.complete else 1


def cmd_solve(args) -> int:
    tris, _complete = cns.parse_candidates_text(_read(args.input))
    records = []
    failures = 0
    for tri in tris:
        sol = solve_with_cusp_handoff(tri)
        if not sol.success:
            failures += 1
        records.append(cns.solution_record(tri, sol))
    _write(args.output, cns._jsonl(records))
    return 0 if failures == 0 else 1


def cmd_canonical(args) -> int:
    records = []
    failures = 0
    for line in _read(args.input).splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec["classification"] == "failed":
            continue
        tri = Triangulation.from_text(rec["triangulation"])
        sol = solve_with_cusp_handoff(tri)
        try:
            k = canonicalize(tri, sol)
        except (CanonicalizationError, InconsistentSolutionError) as exc:
            failures += 1
            records.append(
                {
                    "signature": rec["signature"],
                    "converged": False,
                    "failure": str(exc),
                }
            )
            continue
        records.append(cns.kojima_record(tri, k))
    _write(args.output, cns._jsonl(records))
    return 0 if failures == 0 else 1


def cmd_run(args) -> int:
    cfg = EnumerationConfig(args.n, budget_nodes=args.budget_nodes)
    result = cns.run_census(args.n, cfg)
    cns.write_outputs(result, args.output)
    if not result.certified:
        print("UNCERTIFIED: enumeration incomplete", file=sys.stderr)
        return 2
    return 0


def cmd_shape(args) -> int:
    theta = np.array([float(x) for x in args.angles.split(",")])
    if theta.size != 6:
        raise SystemExit("--angles needs six comma-separated values")
    sums = geo.vertex_angle_sums(theta)
    lengths = geo.edge_lengths(theta)
    print("dihedral angles:", " ".join(f"{a:.12g}" for a in theta))
    print("vertex angle sums:", " ".join(f"{s:.12g}" for s in sums))
    print("edge lengths:", " ".join(f"{l:.12g}" for l in lengths))
    print(f"volume: {geo.volume_closed_form(theta):.12g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="census",
        description="Census of hyperbolic 3-manifolds with geodesic boundary",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("enumerate", help="emit candidate triangulations")
    pe.add_argument("-n", type=int, required=True)
    pe.add_argument("--no-filter", action="append", choices=DEFAULT_FILTERS)
    pe.add_argument("--budget-nodes", type=int, default=None)
    pe.add_argument("-o", "--output", default="-")
    pe.set_defaults(func=cmd_enumerate)

    ps = sub.add_parser("solve", help="solve the hyperbolicity equations")
    ps.add_argument("-i", "--input", required=True)
    ps.add_argument("-o", "--output", default="-")
    ps.set_defaults(func=cmd_solve)

    pc = sub.add_parser("canonical", help="compute canonical decompositions")
    pc.add_argument("-i", "--input", required=True)
    pc.add_argument("-o", "--output", default="-")
    pc.set_defaults(func=cmd_canonical)

    pr = sub.add_parser("run", help="run the full census pipeline")
    pr.add_argument("-n", type=int, required=True)
    pr.add_argument("--jobs", type=int, default=1,
                    help="accepted for compatibility; the pipeline is sequential")
    pr.add_argument("--budget-nodes", type=int, default=None)
    pr.add_argument("-o", "--output", required=True, help="output directory")
    pr.set_defaults(func=cmd_run)

    pg = sub.add_parser("shape", help="print the geometry of one tetrahedron")
    pg.add_argument("--angles", required=True,
                    help="six comma-separated dihedral angles")
    pg.set_defaults(func=cmd_shape)
    return p


def main(argv: list[str] | None = None) -> int:
    if "CENSUS_SEED" in os.environ:
        print(
            "CENSUS_SEED is not supported: the pipeline is deterministic and"
            " uses no randomness",
            file=sys.stderr,
        )
        return 2
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
