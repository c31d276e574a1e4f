"""Command-line interface.

Subcommands: design, verify, pools, decode, budget, simulate, heatmap.
Exit codes: 0 success, 2 invalid parameters, 3 design invariant
violation, 4 dimension mismatch between inputs.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .decode import (
    DEFAULT_EPSILON,
    ThresholdPolicy,
    classify_nnlad,
    infected_indices,
    write_result,
)
from .design import (
    DesignParams,
    PoolingDesign,
    budget_disjunct_bound,
    certificate,
    construct_design,
    dorfman_optimal_pool,
    load_design,
    plan_for_population,
    save_design,
    verify_disjunct,
    write_lab_sheet,
)
from .errors import (
    DegenerateS,
    DesignFileError,
    DimensionMismatch,
    GridTooCoarse,
    PoolDesignError,
    TooLargeToVerify,
)
from .simulate import (
    CorruptionKind,
    load_grid_csv,
    region_check,
    run_phase_diagram,
    write_grid_csv,
)
from .heatmap import write_heatmap
from .solver import (
    NnladProblem,
    SolverOptions,
    read_measurements,
    solve_nnlad,
)

EXIT_OK = 0
EXIT_BAD_PARAMS = 2
EXIT_INVARIANT = 3
EXIT_DIMENSION = 4


def parse_grid(text: str) -> np.ndarray:
    """Parse 'start:stop:step' (inclusive endpoints within 1e-12) or a
    single value."""
    if ":" not in text:
        return np.array([float(text)])
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0:
        raise ValueError(f"grid step must be positive, got {step}")
    count = int(np.floor((stop - start) / step + 1e-12)) + 1
    if count < 1:
        raise ValueError(f"empty grid {text!r}")
    return start + step * np.arange(count)


def _design_from_args(args) -> PoolingDesign:
    if (args.q is None) == (args.people is None):
        raise ValueError("give exactly one of --q/--s or --people/--prevalence")
    if args.q is not None:
        if args.s is None:
            raise ValueError("--q requires --s")
        params = DesignParams(q=args.q, s=args.s)
    else:
        if args.prevalence is None:
            raise ValueError("--people requires --prevalence")
        params = plan_for_population(args.people, args.prevalence)
    return construct_design(params)


def cmd_design(args) -> int:
    design = _design_from_args(args)
    save_design(design, args.out)
    rate = design.m / design.n
    print(
        f"q={design.q} s={design.s} m={design.m} n={design.n} "
        f"tests_per_individual={rate:.6f}"
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    design = load_design(args.design)
    cert = certificate(design)
    b = design.matrix_b()
    print(f"q={design.q} s={design.s} m={design.m} n={design.n}")
    print(
        f"column_weight={int(b.sum(axis=0).max())} "
        f"row_weight={int(b.sum(axis=1).max())} coherence={cert.coherence}"
    )
    print(
        f"contraction={cert.contraction:.12g} noise_gain={cert.noise_gain:.12g} "
        f"pinv_norm={cert.pinv_norm:.12g} bound_constant={cert.bound_constant:.12g}"
    )
    if cert.coherence > 1:
        print("invariant violation: column coherence exceeds 1", file=sys.stderr)
        return EXIT_INVARIANT
    if args.check_disjunct:
        try:
            ok = verify_disjunct(design, budget=args.budget, force=args.force)
        except TooLargeToVerify as exc:
            print(f"disjunct: skipped ({exc})")
        else:
            print(f"disjunct: {'yes' if ok else 'NO'}")
            if not ok:
                return EXIT_INVARIANT
    return EXIT_OK


def cmd_pools(args) -> int:
    design = load_design(args.design)
    write_lab_sheet(design, args.out)
    fraction = Fraction(1, design.s + 1)
    print(
        f"tests={design.m} specimens_per_test={design.q} "
        f"volume_fraction={fraction} ({design.scale:.6g})"
    )
    return EXIT_OK


def cmd_decode(args) -> int:
    design = load_design(args.design)
    readout = read_measurements(args.measurements)
    options = SolverOptions(tol=args.tol, max_iters=args.max_iters)
    solution = solve_nnlad(NnladProblem(design, readout), options)
    policy = ThresholdPolicy(epsilon=args.epsilon)
    calls = classify_nnlad(solution, policy)
    cert = certificate(design)
    write_result(args.out, calls, solution, cert, policy)
    infected = infected_indices(calls)
    print(
        f"status={solution.status.value} objective={solution.objective:.6g} "
        f"infected={len(infected)}"
    )
    if infected:
        print("individuals=" + ",".join(str(n) for n in infected))
    return EXIT_OK


def cmd_budget(args) -> int:
    params = plan_for_population(args.people, args.prevalence)
    ours = (params.s + 1) / params.q
    best_k, best_rate = dorfman_optimal_pool(args.prevalence)
    print("method,pool_size,tests_per_individual")
    print(f"circulant,{params.q},{ours:.6f}")
    print(f"dorfman,{best_k},{best_rate:.6f}")
    try:
        bound = budget_disjunct_bound(args.people, args.prevalence)
        print(f"disjunct_bound,n/a,{bound:.6f}")
    except DegenerateS:
        print("disjunct_bound,n/a,n/a")
    return EXIT_OK


def cmd_simulate(args) -> int:
    design = construct_design(DesignParams(q=args.q, s=args.s))
    diagram = run_phase_diagram(
        design,
        parse_grid(args.p_grid),
        parse_grid(args.pe_grid),
        trials=args.trials,
        seed=args.seed,
        kind=CorruptionKind(args.kind),
        options=SolverOptions(tol=args.tol, max_iters=args.max_iters),
        workers=args.workers,
    )
    write_grid_csv(diagram, args.out)
    print(f"cells={diagram.p_grid.size * diagram.pe_grid.size} trials={args.trials}")
    try:
        print(region_check(diagram).summary())
    except GridTooCoarse:
        print("region check skipped: grid coarser than 0.01 or not covering "
              "[0, 0.12] x [0, 0.1]")
    return EXIT_OK


def cmd_heatmap(args) -> int:
    diagram = load_grid_csv(args.grid)
    write_heatmap(diagram, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pooldesign",
        description="Design pooled-testing schemes, decode readouts, and "
        "reproduce recovery phase diagrams.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_design = sub.add_parser("design", help="construct a pooling design file")
    p_design.add_argument("--q", type=int, help="prime pool size")
    p_design.add_argument("--s", type=int, help="guaranteed number of infected")
    p_design.add_argument("--people", type=int, help="population size")
    p_design.add_argument("--prevalence", type=float, help="expected infected fraction")
    p_design.add_argument("--out", required=True, help="output design JSON")
    p_design.set_defaults(func=cmd_design)

    p_verify = sub.add_parser("verify", help="check a design file's invariants")
    p_verify.add_argument("--design", required=True)
    p_verify.add_argument("--check-disjunct", action="store_true")
    p_verify.add_argument("--budget", type=int, default=10**8,
                          help="work budget for the exhaustive disjunct check")
    p_verify.add_argument("--force", action="store_true",
                          help="run the disjunct check even above the budget")
    p_verify.set_defaults(func=cmd_verify)

    p_pools = sub.add_parser("pools", help="export the lab pooling sheet")
    p_pools.add_argument("--design", required=True)
    p_pools.add_argument("--out", required=True, help="output lab-sheet CSV")
    p_pools.set_defaults(func=cmd_pools)

    p_decode = sub.add_parser("decode", help="decode a measurement file")
    p_decode.add_argument("--design", required=True)
    p_decode.add_argument("--measurements", required=True)
    p_decode.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON,
                          help="infection threshold in virus copies")
    p_decode.add_argument("--out", required=True, help="output result JSON")
    p_decode.add_argument("--tol", type=float, default=1e-8)
    p_decode.add_argument("--max-iters", type=int, default=50_000)
    p_decode.add_argument("--seed", type=int, default=None,
                          help="reserved; decoding is deterministic")
    p_decode.set_defaults(func=cmd_decode)

    p_budget = sub.add_parser("budget", help="compare tests-per-individual budgets")
    p_budget.add_argument("--people", type=int, required=True)
    p_budget.add_argument("--prevalence", type=float, required=True)
    p_budget.set_defaults(func=cmd_budget)

    p_sim = sub.add_parser("simulate", help="run a recovery phase-diagram sweep")
    p_sim.add_argument("--q", type=int, required=True)
    p_sim.add_argument("--s", type=int, required=True)
    p_sim.add_argument("--p-grid", default="0:0.12:0.005",
                       help="prevalence grid start:stop:step")
    p_sim.add_argument("--pe-grid", default="0:0.1:0.005",
                       help="corruption grid start:stop:step")
    p_sim.add_argument("--trials", type=int, default=20)
    p_sim.add_argument("--seed", type=int, required=True,
                       help="base seed (required for reproducibility)")
    p_sim.add_argument("--kind", choices=[k.value for k in CorruptionKind],
                       default=CorruptionKind.MIXED.value)
    p_sim.add_argument("--tol", type=float, default=1e-8)
    p_sim.add_argument("--max-iters", type=int, default=50_000)
    p_sim.add_argument("--workers", type=int, default=None,
                       help="thread count (default: POOLDESIGN_THREADS or CPUs)")
    p_sim.add_argument("--out", required=True, help="output grid CSV")
    p_sim.set_defaults(func=cmd_simulate)

    p_heat = sub.add_parser("heatmap", help="render a grid CSV as an SVG heatmap")
    p_heat.add_argument("--grid", required=True)
    p_heat.add_argument("--out", required=True)
    p_heat.set_defaults(func=cmd_heatmap)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DimensionMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except DesignFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (PoolDesignError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_PARAMS


if __name__ == "__main__":
    sys.exit(main())
