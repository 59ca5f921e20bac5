"""Command-line interface: ``hypmesh improve`` and ``hypmesh generate``."""

import argparse
import json
import logging
import sys
from pathlib import Path

from . import generate as gen
from .optimizer import SolverConfig
from .pipeline import (
    EXIT_IO,
    EXIT_OK,
    STRATEGIES,
    PipelineConfig,
    run_pipeline,
    with_overrides,
    write_mesh,
    write_svg,
)

__all__ = ["main", "build_parser"]

# first argument of each generator sets its size
GENERATORS = {
    "square": lambda size, jitter, seed: gen.square(size or 20, jitter, seed),
    "annulus": lambda size, jitter, seed: gen.annulus(size or 24, jitter=jitter, seed=seed),
    "hole3": lambda size, jitter, seed: gen.holes_plate(size or 30, jitter, seed),
    "h": lambda size, jitter, seed: gen.h_shape(size or 8, jitter, seed),
    "l": lambda size, jitter, seed: gen.l_shape(size or 10, jitter, seed),
    "equilateral": lambda size, jitter, seed: gen.equilateral_patch(size or 4),
}


def build_parser():
    p = argparse.ArgumentParser(
        prog="hypmesh",
        description="Improve planar triangle meshes by optimising their angle structure.",
    )
    p.add_argument("-v", "--verbose", action="count", default=0,
                   help="log progress to stderr (-vv for solver detail)")
    sub = p.add_subparsers(dest="command", required=True)

    imp = sub.add_parser("improve", help="improve a mesh, keeping its connectivity and boundary")
    src = imp.add_argument_group("input (node+ele or off)")
    src.add_argument("--node", type=Path, help="Triangle .node file")
    src.add_argument("--ele", type=Path, help="Triangle .ele file")
    src.add_argument("--off", type=Path, help="OFF file with z = 0")
    imp.add_argument("--out", type=Path, required=True,
                     help="output path (stem for node/ele output)")
    imp.add_argument("--out-format", choices=("node", "off"),
                     help="output format (default: same as input)")
    imp.add_argument("--strategy", choices=STRATEGIES, default="standard")
    imp.add_argument("--tol-holonomy", type=float, help="holonomy residual tolerance")
    imp.add_argument("--max-iter", type=int, help="iteration cap per optimisation phase")
    imp.add_argument("--svg", type=Path, help="write an SVG drawing of the result")
    imp.add_argument("--report", type=Path, help="write a JSON quality report")
    imp.add_argument("--trace", type=Path, help="write the solver trace as JSON")

    g = sub.add_parser("generate", help="write a synthetic test mesh")
    g.add_argument("model", choices=sorted(GENERATORS))
    g.add_argument("--size", type=int, help="grid resolution (model-specific default)")
    g.add_argument("--jitter", type=float, default=0.0,
                   help="interior vertex noise as a fraction of the cell size")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--format", choices=("node", "off"), default="node")
    g.add_argument("--svg", type=Path)
    return p


def _improve(args):
    try:
        solver = with_overrides(SolverConfig(), holonomy_tolerance=args.tol_holonomy,
                                max_iterations=args.max_iter)
        cfg = PipelineConfig(out=args.out, node=args.node, ele=args.ele, off=args.off,
                             out_format=args.out_format, strategy=args.strategy,
                             solver=solver, svg=args.svg, report=args.report,
                             trace=args.trace)
    except ValueError as exc:
        raise SystemExit(f"hypmesh improve: {exc}") from None
    code, diag = run_pipeline(cfg)
    if diag is not None:
        print(json.dumps(diag, sort_keys=True), file=sys.stderr)
    return code


def _generate(args):
    if args.jitter < 0 or args.jitter >= 0.5:
        raise SystemExit("hypmesh generate: --jitter must lie in [0, 0.5)")
    mesh = GENERATORS[args.model](args.size, args.jitter, args.seed)
    try:
        write_mesh(mesh, args.out, args.format)
        if args.svg is not None:
            write_svg(mesh, args.svg)
    except OSError as exc:
        print(json.dumps({"error": "IOError", "message": str(exc), "exit_code": EXIT_IO}),
              file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "improve":
        return _improve(args)
    return _generate(args)


if __name__ == "__main__":
    sys.exit(main())
