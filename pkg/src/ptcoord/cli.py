"""Command-line entry points.

Four subcommands: ``generate`` writes a canonical instance file, ``solve``
runs cut-and-column generation on one, ``oracle`` runs the enumeration
oracle for cross-checking, and ``experiment`` drives grids and the built-in
studies.  Report paths write delimited files plus rendered figures; pass
``--no-figures`` to skip the PNGs.

Exit codes: 0 optimal, 3 infeasible, 4 time limit, 5 exhausted,
1 other errors (argparse reserves 2 for usage problems).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from .ccg import CcgParams, run_ccg, write_trace_csv
from .core import (
    Instance,
    LeaderDecision,
    dumps_instance,
    load_instance,
    validate_instance,
)
from .experiments import (
    BUDGET_STUDY_HEADER,
    BUDGET_SWEEP,
    COMPETITION_HEADER,
    ROW_HEADER,
    SUMMARY_HEADER,
    budget_study,
    class_id_of,
    competition_study,
    rows_as_tuples,
    run_grid,
    summarize,
    write_csv,
)
from .generator import GenConfig, desk_grid, generate_instance, full_grid
from .mip import ENV_BACKEND
from .oracle import OracleLimits, brute_force_bilevel

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 3
EXIT_TIME_LIMIT = 4
EXIT_EXHAUSTED = 5

_STATUS_EXIT = {
    "optimal": EXIT_OK,
    "infeasible": EXIT_INFEASIBLE,
    "time_limit": EXIT_TIME_LIMIT,
    "exhausted": EXIT_EXHAUSTED,
}


def _num_json(x):
    if x is None:
        return None
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else str(x)
    return x


def _leader_json(leader: LeaderDecision | None):
    if leader is None:
        return None
    return {
        "budget": dict(leader.budget),
        "factory_alloc": {k: list(v) for k, v in leader.factory_alloc.items()},
        "eng_alloc": {k: list(v) for k, v in leader.eng_alloc.items()},
    }


def _plans_json(plans):
    if plans is None:
        return None
    return {
        pd_id: {
            "production": {k: list(v) for k, v in plan.production.items()},
            "backorder": {k: list(v) for k, v in plan.backorder.items()},
            "inventory": {k: list(v) for k, v in plan.inventory.items()},
            "dev_complete": {k: list(v) for k, v in plan.dev_complete.items()},
            "cost": _num_json(plan.cost),
        }
        for pd_id, plan in plans.items()
    }


def _result_json(status, objective, relaxation, incumbent, iterations, leader, plans):
    return {
        "status": status,
        "objective": _num_json(objective),
        "relaxation_bound": _num_json(relaxation),
        "incumbent_bound": _num_json(incumbent),
        "iterations": iterations,
        "leader": _leader_json(leader),
        "plans": _plans_json(plans),
    }


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _load_checked(path: str) -> Instance:
    instance = load_instance(path)
    problems = validate_instance(instance)
    if problems:
        raise SystemExit(
            "instance file is invalid:\n  " + "\n  ".join(problems[:10])
        )
    return instance


def _add_common_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", default="1e-6",
                   help="bound-gap tolerance (default 1e-6; 0.5 is a fast exit on integral data)")
    p.add_argument("--time-limit", type=float, default=None, help="total wall-clock limit (s)")
    p.add_argument("--master-time-limit", type=float, default=None,
                   help="per-master-solve limit (s)")
    p.add_argument("--backend", default=None,
                   help=f"MIP backend name (default ${ENV_BACKEND} or 'reference')")
    p.add_argument("--out-dir", default=".", help="directory for result files")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.add_argument("--dump-lp-dir", default=None,
                   help="write every master problem as an LP file into this directory")


def _params(args) -> CcgParams:
    eps = Fraction(args.epsilon)
    return CcgParams(
        epsilon=eps,
        master_time_limit=args.master_time_limit,
        total_time_limit=args.time_limit,
        backend=args.backend,
        lp_dump_dir=args.dump_lp_dir,
    )


def _cmd_generate(args) -> int:
    config = GenConfig(
        horizon=args.horizon,
        n_pds=args.pds,
        products_per_pd=args.products,
        new_per_pd=args.new,
        budget_fraction=Fraction(args.budget_fraction),
        seed=args.seed,
        pi_per_period=args.pi_per_period,
        ensure_capacity_covers_demand=args.ensure_capacity,
    )
    instance = generate_instance(config)
    out = args.out or f"instance-{class_id_of(config)}-s{args.seed}.json"
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_instance(instance))
    print(out)
    return EXIT_OK


def _cmd_solve(args) -> int:
    instance = _load_checked(args.instance)
    result = run_ccg(instance, _params(args))
    os.makedirs(args.out_dir, exist_ok=True)
    stem = os.path.join(args.out_dir, args.name)
    _write_json(
        stem + ".json",
        _result_json(result.status, result.objective, result.relaxation_bound,
                     result.incumbent_bound, result.iterations, result.leader,
                     result.plans),
    )
    write_trace_csv(result, stem + "-trace.csv")
    if not args.no_figures and result.trace:
        from .figures import save_convergence_figure

        save_convergence_figure(result.trace, stem + "-convergence.png")
    print(f"{result.status} objective={_num_json(result.objective)} "
          f"iterations={result.iterations} -> {stem}.json")
    return _STATUS_EXIT.get(result.status, EXIT_ERROR)


def _cmd_oracle(args) -> int:
    instance = _load_checked(args.instance)
    limits = OracleLimits(max_leaves=args.max_leaves)
    objective, leader, plans = brute_force_bilevel(instance, limits)
    os.makedirs(args.out_dir, exist_ok=True)
    stem = os.path.join(args.out_dir, args.name)
    _write_json(
        stem + ".json",
        _result_json("optimal", objective, objective, objective, 0, leader, plans),
    )
    print(f"optimal objective={_num_json(objective)} -> {stem}.json")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    # desk-scale defaults keep unattended grids bounded
    if args.time_limit is None:
        args.time_limit = 120.0
    if args.master_time_limit is None:
        args.master_time_limit = 60.0
    params = _params(args)
    os.makedirs(args.out_dir, exist_ok=True)
    if args.study == "budget":
        rows = budget_study(args.seeds, params)
        path = os.path.join(args.out_dir, "budget_study.csv")
        write_csv(path, BUDGET_STUDY_HEADER, rows)
        if not args.no_figures:
            from .figures import save_budget_figure

            save_budget_figure(rows, os.path.join(args.out_dir, "budget_study.png"))
        print(path)
        return EXIT_OK
    if args.study == "competition":
        rows = competition_study(args.seeds, params, horizon=args.horizon)
        path = os.path.join(args.out_dir, "competition_study.csv")
        write_csv(path, COMPETITION_HEADER, rows)
        if not args.no_figures:
            from .figures import save_competition_figure

            save_competition_figure(rows, os.path.join(args.out_dir, "competition_study.png"))
        print(path)
        return EXIT_OK

    configs = full_grid() if args.grid == "full" else desk_grid()
    rows = run_grid(configs, params, workers=args.workers)
    rows_path = os.path.join(args.out_dir, "grid_rows.csv")
    write_csv(rows_path, ROW_HEADER, rows_as_tuples(rows))
    write_csv(os.path.join(args.out_dir, "grid_summary.csv"), SUMMARY_HEADER,
              summarize(rows))
    print(rows_path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ptcoord",
        description="Bilevel budget and capacity coordination for product transitions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a seeded random instance file")
    p.add_argument("--horizon", "-T", type=int, required=True)
    p.add_argument("--pds", "-J", type=int, required=True)
    p.add_argument("--products", "-N", type=int, required=True, help="products per division")
    p.add_argument("--new", "-P", type=int, required=True, help="new products per division")
    p.add_argument("--budget-fraction", default="0.4")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--pi-per-period", action="store_true",
                   help="redraw unit revenue each period instead of once per product")
    p.add_argument("--ensure-capacity", action="store_true",
                   help="redraw capacities until they cover total demand")
    p.add_argument("--out", default=None, help="output path")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("solve", help="run cut-and-column generation on an instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--name", default="result", help="basename for the output files")
    _add_common_solver_flags(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("oracle", help="run the enumeration oracle on a tiny instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--name", default="oracle", help="basename for the output files")
    p.add_argument("--max-leaves", type=int, default=10**6)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("experiment", help="run a grid or a built-in study")
    p.add_argument("--grid", choices=("desk", "full"), default="desk",
                   help="desk: reduced workstation grid; full: all 36 benchmark classes x 5 seeds")
    p.add_argument("--study", choices=("budget", "competition"), default=None)
    p.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--horizon", type=int, default=12,
                   help="horizon for the competition study classes")
    p.add_argument("--workers", type=int, default=1)
    _add_common_solver_flags(p)
    p.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
