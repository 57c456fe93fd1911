"""Command-line experiment runner.

Verbs: gen (instances), build (export LP files), solve (mini-milp), oracle
(brute force), heur (local search), bench (full grid), summarize. The
OCSTREE_OUT environment variable sets the default output directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .bench import ExperimentConfig, read_rows_csv, run_experiment, summarize
from .exact import brute_force_optimum
from .formulations import FormulationKind, build, lift
from .heuristics import NeighborhoodSpec, initial_tree, local_search
from .instances import (
    Instance,
    load_instance,
    load_od_matrix,
    random_arborescent_degree_sequence,
    random_connected_submatrix,
    save_instance,
    synthetic_requirements,
)
from .milp import SolveParams, solve_mip
from .model import export_lp, linearize
from .trees import write_tree

ENV_OUT = "OCSTREE_OUT"


def _default_out() -> str:
    return os.environ.get(ENV_OUT, ".")


def _out_dir(args) -> Path:
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parse_kinds(specs: list[str]) -> tuple[FormulationKind, ...]:
    return tuple(FormulationKind.parse(s) for s in specs)


def cmd_gen(args) -> int:
    out = _out_dir(args)
    od = load_od_matrix(args.source) if args.source else None
    written = []
    for n in args.n:
        if od is not None:
            req = random_connected_submatrix(od, n, seed=args.seed + n)
        else:
            req = synthetic_requirements(n, seed=args.seed + n, density=args.density)
        for k in range(args.count):
            degseq = random_arborescent_degree_sequence(
                n, seed=args.seed * 1000 + n * 10 + k
            )
            instance = Instance.build(req, degseq)
            path = out / f"inst_n{n}_s{args.seed}_d{k}.json"
            save_instance(instance, path)
            written.append(path)
    for path in written:
        print(path)
    return 0


def cmd_build(args) -> int:
    out = _out_dir(args)
    instance = load_instance(args.instance)
    for kind in _parse_kinds(args.formulations):
        model = linearize(build(instance, kind))
        safe = kind.label.replace("(", "").replace(")", "").replace("=", "")
        path = out / f"{Path(args.instance).stem}_{safe}.lp"
        path.write_text(export_lp(model))
        print(path)
    return 0


def cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    kind = FormulationKind.parse(args.formulation)
    incumbent = None
    if args.init == "local-search":
        tree = local_search(initial_tree(instance, seed=args.seed), instance)
        incumbent = lift(tree, instance, kind)
    model = linearize(build(instance, kind))
    params = SolveParams(time_limit=args.time_limit, abs_gap_tol=args.gap_tol,
                         incumbent=incumbent)
    result = solve_mip(model, params)
    for entry in result.log:
        record = "-" if entry.record is None else f"{entry.record:.6g}"
        print(f"  t={entry.elapsed:8.3f}s nodes={entry.nodes:6d} "
              f"record={record} bound={entry.bound:.6g} gap={entry.gap:.4g}")
    print(f"status={result.status} objective={result.objective} "
          f"bound={result.bound:.6g} gap={result.gap:.4g} "
          f"nodes={result.nodes} elapsed={result.elapsed:.3f}s")
    return 0 if result.status == "optimal" else 1


def cmd_oracle(args) -> int:
    instance = load_instance(args.instance)
    result = brute_force_optimum(instance, budget=args.budget)
    print(f"cost={result.cost} trees_examined={result.trees_examined} "
          f"elapsed={result.elapsed:.3f}s")
    print(write_tree(result.tree), end="")
    if args.tree_out:
        Path(args.tree_out).write_text(write_tree(result.tree))
    return 0


def cmd_heur(args) -> int:
    instance = load_instance(args.instance)
    spec = NeighborhoodSpec(moves=tuple(args.moves), strategy=args.strategy)
    start = initial_tree(instance, seed=args.seed)
    trace: list = []
    tree = local_search(start, instance, spec, trace=trace)
    print(f"initial cost={instance.cost(start)}")
    for step, move, cost in trace:
        print(f"  step={step} move={move} cost={cost}")
    print(f"final cost={instance.cost(tree)}")
    print(write_tree(tree), end="")
    if args.tree_out:
        Path(args.tree_out).write_text(write_tree(tree))
    return 0


def cmd_bench(args) -> int:
    if args.config:
        config = ExperimentConfig.from_json(args.config)
    else:
        config = ExperimentConfig(
            formulations=_parse_kinds(args.formulations),
            sizes=tuple(args.n),
            degseqs_per_n=args.degseqs,
            instance_files=tuple(args.instances or ()),
            od_source=args.source,
            density=args.density,
            solver=args.solver,
            time_limit=args.time_limit,
            gap_tol=args.gap_tol,
            seed=args.seed,
            init=args.init,
            workers=args.workers,
            out_dir=args.out,
        )
    rows = run_experiment(config)
    for row in rows:
        print(f"{row.instance_id} {row.degseq_id} {row.formulation}: "
              f"status={row.status} record={row.record} elapsed={row.elapsed:.3f}s")
    if config.solver == "mini-milp" and rows:
        print()
        print(summarize(rows).table())
    return 0


def cmd_summarize(args) -> int:
    rows = read_rows_csv(args.rows)
    print(summarize(rows).table())
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ocstree",
        description="Degree-constrained optimum requirement spanning tree workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate instance files")
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--count", type=int, default=1, help="degree sequences per size")
    p.add_argument("--source", help="origin-destination matrix file (else synthetic)")
    p.add_argument("--density", type=float, default=0.8)
    p.add_argument("--seeds", "--seed", dest="seed", type=int, default=0)
    p.add_argument("--out", default=_default_out())
    p.set_defaults(handler=cmd_gen)

    p = sub.add_parser("build", help="export LP files for formulations")
    p.add_argument("--instance", required=True)
    p.add_argument("--formulations", nargs="+", required=True)
    p.add_argument("--out", default=_default_out())
    p.set_defaults(handler=cmd_build)

    p = sub.add_parser("solve", help="solve one cell with the built-in solver")
    p.add_argument("--instance", required=True)
    p.add_argument("--formulation", required=True)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--gap-tol", type=float, default=1e-4)
    p.add_argument("--init", choices=("none", "local-search"), default="none")
    p.add_argument("--seeds", "--seed", dest="seed", type=int, default=0)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("oracle", help="exact optimum by Prüfer enumeration")
    p.add_argument("--instance", required=True)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--tree-out")
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("heur", help="greedy construction plus local search")
    p.add_argument("--instance", required=True)
    p.add_argument("--seeds", "--seed", dest="seed", type=int, default=0)
    p.add_argument("--moves", nargs="+",
                   default=["two-edge-exchange", "equal-degree-label-swap"])
    p.add_argument("--strategy", choices=("best-improvement", "first-improvement"),
                   default="best-improvement")
    p.add_argument("--tree-out")
    p.set_defaults(handler=cmd_heur)

    p = sub.add_parser("bench", help="run a full experiment grid")
    p.add_argument("--config", help="JSON config file (overrides other flags)")
    p.add_argument("--n", type=int, nargs="*", default=[])
    p.add_argument("--degseqs", type=int, default=1)
    p.add_argument("--instances", nargs="*", help="explicit instance files")
    p.add_argument("--formulations", nargs="+", default=["F1L"])
    p.add_argument("--source", help="origin-destination matrix file")
    p.add_argument("--density", type=float, default=0.8)
    p.add_argument("--solver", choices=("mini-milp", "lp-export"), default="mini-milp")
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--gap-tol", type=float, default=1e-4)
    p.add_argument("--seeds", "--seed", dest="seed", type=int, default=0)
    p.add_argument("--init", choices=("none", "local-search"), default="none")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=_default_out())
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("summarize", help="summarize a report.csv")
    p.add_argument("--rows", required=True)
    p.set_defaults(handler=cmd_summarize)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
