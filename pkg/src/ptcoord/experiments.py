"""Experiment grids and studies with CSV emission.

Grid rows run in a bounded process pool; each row is an independent
generate-and-solve, failures are recorded in the row rather than aborting
the grid, and files are written atomically (temp file + rename).  The
summary is recomputed from the rows it ships with, so the two can always be
cross-checked.
"""

from __future__ import annotations

import csv
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .ccg import CcgParams, CcgResult, run_ccg
from .core import Instance, Num
from .follower import follower_context
from .generator import GenConfig, competition_instances, generate_instance


@dataclass(frozen=True)
class ExperimentRow:
    class_id: str
    horizon: int
    n_pds: int
    products_per_pd: int
    new_per_pd: int
    budget_fraction: Fraction
    seed: int
    status: str
    wall_seconds: float
    iterations: int
    objective: Num | None
    gap: Num | None
    distinct_budgets: int


ROW_HEADER = (
    "class_id", "T", "J", "N_j", "P_j", "Bc", "seed", "status",
    "wall_seconds", "iterations", "objective", "gap", "distinct_budgets",
)

SUMMARY_HEADER = (
    "class_id", "T", "J", "N_j", "P_j", "Bc", "n_runs", "n_unsolved",
    "time_mean", "time_min", "time_max", "iter_mean", "iter_min", "iter_max",
)

BUDGET_STUDY_HEADER = (
    "Bc", "seed", "status", "leader_objective", "pd_id", "pd_cost", "pd_budget_spent",
)

COMPETITION_HEADER = (
    "class_idx", "T", "J", "N_j", "P_j", "seed", "status",
    "leader_objective", "mean_pd_cost",
)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else str(float(x))
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write atomically with a fixed header, UTF-8 and LF endings."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(x) for x in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def class_id_of(config: GenConfig) -> str:
    return (
        f"T{config.horizon}-J{config.n_pds}-N{config.products_per_pd}"
        f"-P{config.new_per_pd}"
    )


def _gap_of(result: CcgResult) -> Num | None:
    if result.relaxation_bound is None or result.incumbent_bound is None:
        return None
    return result.relaxation_bound - result.incumbent_bound


def run_one(config: GenConfig, params: CcgParams) -> ExperimentRow:
    """Generate and solve one grid cell; failures become an ``error`` row."""
    start = time.perf_counter()
    try:
        instance = generate_instance(config)
        result = run_ccg(instance, params)
        return ExperimentRow(
            class_id=class_id_of(config),
            horizon=config.horizon,
            n_pds=config.n_pds,
            products_per_pd=config.products_per_pd,
            new_per_pd=config.new_per_pd,
            budget_fraction=config.budget_fraction,
            seed=config.seed,
            status=result.status,
            wall_seconds=time.perf_counter() - start,
            iterations=result.iterations,
            objective=result.objective,
            gap=_gap_of(result),
            distinct_budgets=result.distinct_budgets,
        )
    except Exception:
        return ExperimentRow(
            class_id=class_id_of(config),
            horizon=config.horizon,
            n_pds=config.n_pds,
            products_per_pd=config.products_per_pd,
            new_per_pd=config.new_per_pd,
            budget_fraction=config.budget_fraction,
            seed=config.seed,
            status="error",
            wall_seconds=time.perf_counter() - start,
            iterations=0,
            objective=None,
            gap=None,
            distinct_budgets=0,
        )


def run_grid(configs: Sequence[GenConfig], params: CcgParams,
             workers: int = 1) -> list[ExperimentRow]:
    """Run every config; rows come back in config order."""
    if workers <= 1:
        return [run_one(c, params) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_one, configs, [params] * len(configs)))


def summarize(rows: Sequence[ExperimentRow]) -> list[tuple]:
    """Per-class mean/min/max time and iterations plus the unsolved count;
    time and iteration statistics cover the optimally solved rows only."""
    by_class: dict[str, list[ExperimentRow]] = {}
    for row in rows:
        by_class.setdefault(row.class_id, []).append(row)
    out = []
    for class_id, members in by_class.items():
        solved = [r for r in members if r.status == "optimal"]
        head = members[0]
        if solved:
            times = [r.wall_seconds for r in solved]
            iters = [r.iterations for r in solved]
            stats = (
                sum(times) / len(times), min(times), max(times),
                sum(iters) / len(iters), min(iters), max(iters),
            )
        else:
            stats = (None,) * 6
        out.append(
            (class_id, head.horizon, head.n_pds, head.products_per_pd,
             head.new_per_pd, head.budget_fraction, len(members),
             len(members) - len(solved), *stats)
        )
    return out


def rows_as_tuples(rows: Sequence[ExperimentRow]) -> list[tuple]:
    return [
        (r.class_id, r.horizon, r.n_pds, r.products_per_pd, r.new_per_pd,
         r.budget_fraction, r.seed, r.status, f"{r.wall_seconds:.3f}",
         r.iterations, r.objective, r.gap, r.distinct_budgets)
        for r in rows
    ]


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------

BUDGET_SWEEP = tuple(Fraction(s) for s in ("0.05", "0.1", "0.2", "0.3", "0.4", "0.5"))
BUDGET_STUDY_CLASS = dict(horizon=6, n_pds=3, products_per_pd=4, new_per_pd=2)


def _budget_spent(instance: Instance, result: CcgResult) -> dict[str, Num]:
    spent = {}
    for pd in instance.pds:
        ctx = follower_context(instance, result.leader, pd.id)
        spent[pd.id] = ctx.spend()
    return spent


def budget_study(seeds: Sequence[int], params: CcgParams,
                 sweep: Sequence[Fraction] = BUDGET_SWEEP,
                 **class_kwargs) -> list[tuple]:
    """Sweep the budget fraction on one class; everything except the total
    budget is identical across the sweep for a given seed.  Emits one row
    per (fraction, seed, division) with the division's cost and spend."""
    shape = {**BUDGET_STUDY_CLASS, **class_kwargs}
    rows = []
    for seed in seeds:
        for bc in sweep:
            config = GenConfig(seed=seed, budget_fraction=Fraction(bc), **shape)
            instance = generate_instance(config)
            result = run_ccg(instance, params)
            spent = _budget_spent(instance, result) if result.leader else {}
            for pd in instance.pds:
                rows.append(
                    (config.budget_fraction, seed, result.status, result.objective,
                     pd.id,
                     result.plans[pd.id].cost if result.plans else None,
                     spent.get(pd.id))
                )
    return rows


def competition_study(seeds: Sequence[int], params: CcgParams,
                      horizon: int = 12,
                      budget_fraction=Fraction("0.4")) -> list[tuple]:
    """Solve the four fixed-pool classes per seed and emit the leader
    objective next to the divisions' mean cost."""
    rows = []
    for seed in seeds:
        for idx, (meta, instance) in enumerate(
            competition_instances(seed, budget_fraction, horizon), start=1
        ):
            result = run_ccg(instance, params)
            if result.plans:
                mean_cost = sum(p.cost for p in result.plans.values()) / len(result.plans)
            else:
                mean_cost = None
            rows.append(
                (idx, meta["T"], meta["J"], meta["N_j"], meta["P_j"], seed,
                 result.status, result.objective, mean_cost)
            )
    return rows
