"""Command-line entry point: run one configuration, emit CSV (and figures)."""

import argparse
import sys

from .adaptive import ConfigError, LoopConfig
from .harness import csv_text, run, write_csv
from .mesh import write_mesh
from .problems import get_problem, problem_names
from .solve import SolverError

_DEFAULT_VARIANTS = {
    (1, "m3"): "lambda-res",
    (2, "m3"): "lambda-apx",
    (1, "m3p"): "lambda-osc",
    (2, "m3p"): "lambda-osc",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hh2fem",
        description=(
            "Adaptive two-level FEM benchmark on the L-shaped domain: "
            "solve, estimate, mark, refine; one CSV row per level."
        ),
    )
    parser.add_argument(
        "--problem", required=True, choices=problem_names(),
        help="which boundary value problem to run",
    )
    parser.add_argument("--p", type=int, default=1, choices=(1, 2),
                        help="polynomial degree of the elements")
    parser.add_argument("--mode", default="m3", choices=("m3", "m3p"),
                        help="refinement pattern for marked elements")
    parser.add_argument("--theta", type=float, default=0.5,
                        help="marking parameter in (0, 1]; 1 refines uniformly")
    parser.add_argument(
        "--variant",
        choices=("lambda-res", "lambda-osc", "lambda-apx",
                 "mu-res", "mu-osc", "mu-apx"),
        help="marking indicator; default picks the one matching --p/--mode",
    )
    parser.add_argument("--max-elements", type=int, default=200_000,
                        help="stop once the mesh would exceed this many elements")
    parser.add_argument("--out", help="CSV output path (default: stdout)")
    parser.add_argument("--dump-mesh", help="write the final mesh to this path")
    parser.add_argument("--seed", type=int, default=0,
                        help="reserved; runs are deterministic")
    parser.add_argument("--figures", action="store_true",
                        help="also render PNG figures alongside --out")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    variant = args.variant or _DEFAULT_VARIANTS[(args.p, args.mode)]
    if args.figures and not args.out:
        print("error: --figures requires --out", file=sys.stderr)
        return 2
    try:
        config = LoopConfig(
            theta=args.theta,
            p=args.p,
            mode=args.mode,
            variant=variant,
            max_elements=args.max_elements,
        )
        problem = get_problem(args.problem)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    last_mesh = []

    def keep_mesh(state, record):
        last_mesh[:] = [state.coarse_mesh]

    try:
        records = run(problem, config, on_level=keep_mesh)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3

    if args.out:
        write_csv(records, args.out)
    else:
        sys.stdout.write(csv_text(records))
    if args.dump_mesh and last_mesh:
        write_mesh(last_mesh[0], args.dump_mesh)
    if args.figures:
        from .report import render_figures

        render_figures(
            records, args.out, p=args.p, mode=args.mode,
            title=f"{args.problem} p={args.p} {args.mode} theta={args.theta}",
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
