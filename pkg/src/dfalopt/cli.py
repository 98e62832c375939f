"""Command line front end: instance generation, reference solves, single
solver runs with CSV traces, and the full benchmark matrix."""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import bench as bench_mod
from .baselines import admm_solve, sadmm_solve
from .dfal import async_dfal_solve, default_params, dfal_solve
from .solvers import apg
from .trace import RunTrace, TraceRow


def _add_instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topology", choices=["star", "clique", "file"], default="star")
    p.add_argument("--edge-file", default=None,
                   help="edge list file (required with --topology file)")
    p.add_argument("--case", type=int, choices=[1, 2], default=1)
    p.add_argument("--nodes", type=int, default=5, help="number of nodes N")
    p.add_argument("--ng", type=int, default=10, help="group size n_g")
    p.add_argument("--groups", type=int, default=10, help="number of groups K")
    p.add_argument("--seed", type=int, default=1)


def _instance(args: argparse.Namespace) -> "bench_mod.ProblemInstance":
    return bench_mod.generate_instance(
        args.case, args.topology, args.nodes, args.ng, args.groups, args.seed,
        edge_file=args.edge_file,
    )


def _cmd_gen(args: argparse.Namespace) -> int:
    instance = _instance(args)
    bench_mod.instance_to_json(instance, args.out)
    print(f"wrote instance (N={instance.N}, n={instance.n}, case {instance.case}) "
          f"to {args.out}")
    return 0


def _cmd_ref(args: argparse.Namespace) -> int:
    if args.instance:
        instance = bench_mod.instance_from_json(args.instance)
    else:
        instance = _instance(args)
    ref = bench_mod.reference_solve(instance, tolerance=args.tolerance)
    with open(args.out, "w") as fh:
        json.dump(
            {
                "F_star": ref.f_star,
                "method": ref.method,
                "converged": ref.converged,
                "x_ref": ref.x_ref.tolist(),
            },
            fh,
        )
    print(f"reference F* = {ref.f_star:.12g} ({ref.method}) -> {args.out}")
    return 0


def _apg_trace(instance, ref) -> RunTrace:
    # centralized run; sensible only for case 1 (shared partition)
    if instance.case != 1:
        raise SystemExit("apg requires --case 1 (shared partition)")
    result = bench_mod._reference_case1(instance, 1e-9)
    trace = RunTrace("apg", config={})
    f = result.f_star
    rel = abs(f - ref.f_star) / abs(ref.f_star) if ref.f_star else abs(f)
    trace.append(TraceRow(1, 0.0, f, rel, 0.0, 0, 0, 0, 0.0, 0, "residual"))
    trace.converged = rel <= 1e-3
    return trace


def _cmd_solve(args: argparse.Namespace) -> int:
    instance = _instance(args)
    ref = bench_mod.reference_solve(instance)
    nodes, graph = instance.nodes, instance.graph
    start = time.monotonic()
    if args.alg == "dfal":
        params = default_params(
            nodes, graph, c=args.c, eps_opt=args.eps_opt,
            eps_feas=args.eps_feas, bx=args.bx,
        )
        if args.lambda1 is not None:
            # rescale the accuracy sequences with the overridden start penalty
            ratio = args.lambda1 / params.lam1
            params.lam1 = args.lambda1
            params.alpha1 *= ratio**2
            params.xi1 *= ratio
        trace = dfal_solve(nodes, graph, params, reference=ref.f_star)
    elif args.alg == "afal":
        params = default_params(
            nodes, graph, c=args.c, outer_cap=40, eps_opt=args.eps_opt,
            eps_feas=args.eps_feas, bx=args.bx,
        )
        trace = async_dfal_solve(
            nodes, graph, params, p=0.1, oracle=args.oracle,
            seed=args.seed, reference=ref.f_star,
        )
    elif args.alg == "sadmm":
        trace = sadmm_solve(
            nodes, graph, c_admm=args.c_admm, iters=args.iters,
            reference=ref.f_star, eps_opt=args.eps_opt,
            eps_feas=args.eps_feas, budget_secs=args.budget_secs,
        )
    elif args.alg == "admm":
        trace = admm_solve(
            nodes, graph, c_admm=args.c_admm, iters=args.iters,
            reference=ref.f_star, eps_opt=args.eps_opt,
            eps_feas=args.eps_feas, budget_secs=args.budget_secs,
        )
    elif args.alg == "apg":
        trace = _apg_trace(instance, ref)
    else:  # pragma: no cover - argparse restricts choices
        raise SystemExit(f"unknown algorithm {args.alg}")
    trace.wall_time = time.monotonic() - start

    trace.write_csv(args.out)
    trace.write_summary(args.out + ".summary.json")
    last = trace.final
    print(
        f"{args.alg}: k={last.k} rel_subopt={last.rel_subopt:.3e} "
        f"CV={last.CV:.3e} converged={trace.converged} -> {args.out}"
    )
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    config = None
    if args.config:
        with open(args.config) as fh:
            config = json.load(fh)
    report = bench_mod.run_benchmark(config)
    report.to_json(args.out)
    print(f"{len(report.rows)} runs, digest {report.config_digest} -> {args.out}")
    for m in report.means:
        print(
            f"  {m['algorithm']:6s} {m['topology']:6s} case {m['case']}: "
            f"rel={m['rel_subopt']:.2e} CV={m['CV']:.2e} "
            f"iters={m['iterations']:.0f} comm/node={m['comm_per_node']:.0f}"
        )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="dfalopt",
        description="Decentralized composite optimization toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate an instance file")
    _add_instance_args(p_gen)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_gen)

    p_ref = sub.add_parser("ref", help="compute and store a reference solution")
    _add_instance_args(p_ref)
    p_ref.add_argument("--instance", default=None, help="instance JSON file")
    p_ref.add_argument("--tolerance", type=float, default=1e-9)
    p_ref.add_argument("--out", required=True)
    p_ref.set_defaults(func=_cmd_ref)

    p_solve = sub.add_parser("solve", help="run one solver, write a CSV trace")
    _add_instance_args(p_solve)
    p_solve.add_argument(
        "--alg", choices=["dfal", "afal", "admm", "sadmm", "apg"], required=True
    )
    p_solve.add_argument("--oracle", choices=["rbcd", "arbcd"], default="rbcd")
    p_solve.add_argument("--c", type=float, default=0.7)
    p_solve.add_argument("--c-admm", type=float, default=1.0)
    p_solve.add_argument("--lambda1", type=float, default=None)
    p_solve.add_argument("--bx", type=float, default=None)
    p_solve.add_argument("--eps-opt", type=float, default=1e-3)
    p_solve.add_argument("--eps-feas", type=float, default=1e-4)
    p_solve.add_argument("--iters", type=int, default=200)
    p_solve.add_argument("--budget-secs", type=float, default=None)
    p_solve.add_argument("--out", required=True)
    p_solve.set_defaults(func=_cmd_solve)

    p_bench = sub.add_parser("bench", help="run the benchmark matrix")
    p_bench.add_argument("--config", default=None, help="JSON config file")
    p_bench.add_argument("--out", default="bench_report.json")
    p_bench.set_defaults(func=_cmd_bench)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
