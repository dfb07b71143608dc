"""Cut-and-column generation driver.

Alternates between the restricted master (an upper bound for this
maximization, since every master is a relaxation of the fully-cut problem)
and exact division re-solves at the master's leader decision (a feasible
bilevel point, hence a lower bound).  The loop stops when the two bounds
meet within the gap tolerance, when the master proves infeasibility, when a
time limit runs out, or when the space of distinct budget vectors is
exhausted.

Each iteration appends one column; generating the same (budget, allocation)
point twice is impossible when the incumbent evaluation is optimistic, so a
duplicate aborts loudly as a cut bug instead of looping.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .core import (
    FollowerSolution,
    Instance,
    LeaderDecision,
    Num,
    budget_vector_count,
    leader_objective,
)
from .follower import follower_context, optimistic_resolve, solve_follower
from .master import Column, build_master, solve_master
from .mip import write_lp


class CcgAbort(RuntimeError):
    """The driver generated a duplicate (budget, allocation) column, which
    indicates broken cuts; aborting beats silent cycling."""


@dataclass(frozen=True)
class CcgParams:
    """Tunables for one run.

    ``epsilon`` is the bound-gap tolerance; on integral data any value below
    1 certifies exact optimality, and 0.5 is a documented fast-exit preset.
    ``optimistic_eval`` re-solves each division among its cost-optimal plans
    for the leader-preferred one; leave it on for correct incumbent bounds.
    """

    epsilon: Num = Fraction(1, 10**6)
    master_time_limit: float | None = None
    total_time_limit: float | None = None
    backend: object = None
    optimistic_eval: bool = True
    lp_dump_dir: str | None = None  # write each master as an LP file (debug)

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        for name in ("master_time_limit", "total_time_limit"):
            val = getattr(self, name)
            if val is not None and val <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    relaxation_bound: Num | None
    incumbent_bound: Num | None
    gap: Num | None
    wall_seconds: float
    n_columns: int
    distinct_budgets: int


@dataclass(frozen=True)
class CcgResult:
    status: str  # optimal | infeasible | time_limit | exhausted
    leader: LeaderDecision | None
    plans: Mapping[str, FollowerSolution] | None
    relaxation_bound: Num | None
    incumbent_bound: Num | None
    objective: Num | None
    iterations: int
    trace: tuple[TraceRow, ...] = field(default_factory=tuple)
    columns: tuple[Column, ...] = field(default_factory=tuple)
    # every master budget vector in iteration order (may repeat)
    observed_budgets: tuple[tuple[int, ...], ...] = field(default_factory=tuple)

    @property
    def distinct_budgets(self) -> int:
        return len(set(self.observed_budgets) | {c.budget_hat for c in self.columns})


def evaluate_incumbent(
    instance: Instance,
    leader: LeaderDecision,
    backend=None,
    optimistic: bool = True,
) -> tuple[Num, dict[str, FollowerSolution]]:
    """True bilevel objective of a feasible leader decision.

    Solves every division exactly at its allocation (which a master-produced
    leader always affords) and evaluates the leader objective at the
    resulting plans; with ``optimistic`` the divisions' cost-tied plans are
    re-solved for maximum revenue first.
    """
    plans: dict[str, FollowerSolution] = {}
    for pd in instance.pds:
        ctx = follower_context(instance, leader, pd.id)
        plan = solve_follower(ctx, backend=backend)
        if optimistic:
            plan = optimistic_resolve(ctx, plan.cost, backend=backend)
        plans[pd.id] = plan
    bound = leader_objective(
        instance,
        {pid: plan.backorder for pid, plan in plans.items()},
        {pid: plan.cost for pid, plan in plans.items()},
    )
    return bound, plans


def run_ccg(instance: Instance, params: CcgParams | None = None) -> CcgResult:
    """Run cut-and-column generation to proven optimality.

    The relaxation bound is non-increasing and the incumbent bound
    non-decreasing; on ``optimal`` they differ by less than ``epsilon``.
    The per-iteration trace is always populated.
    """
    params = params or CcgParams()
    start = time.perf_counter()
    columns: list[Column] = []
    seen_points: set = set()
    trace: list[TraceRow] = []
    best_bound: Num | None = None
    best_leader: LeaderDecision | None = None
    best_plans: dict[str, FollowerSolution] | None = None
    relaxation: Num | None = None
    observed: list[tuple[int, ...]] = []
    budget_space = budget_vector_count(instance.total_budget, instance.n_pds)

    def result(status) -> CcgResult:
        return CcgResult(
            status=status,
            leader=best_leader,
            plans=best_plans,
            relaxation_bound=relaxation,
            incumbent_bound=best_bound,
            objective=best_bound,
            iterations=len(trace),
            trace=tuple(trace),
            columns=tuple(columns),
            observed_budgets=tuple(observed),
        )

    while True:
        distinct = len({c.budget_hat for c in columns})
        if distinct >= budget_space:
            return result("exhausted")
        if params.total_time_limit is not None:
            if time.perf_counter() - start >= params.total_time_limit:
                return result("time_limit")

        mm = build_master(instance, columns)
        if params.lp_dump_dir is not None:
            os.makedirs(params.lp_dump_dir, exist_ok=True)
            write_lp(mm.mip, os.path.join(params.lp_dump_dir,
                                          f"master-{len(trace) + 1:03d}.lp"))
        # the master keeps its full per-solve limit even when the total
        # time allowance is nearly spent
        msol = solve_master(mm, backend=params.backend, time_limit=params.master_time_limit)
        if msol.status == "infeasible":
            relaxation = None
            trace.append(
                TraceRow(len(trace) + 1, None, best_bound, None,
                         time.perf_counter() - start, len(columns), distinct)
            )
            return result("infeasible")
        if msol.status == "time_limit":
            if msol.bound is not None:
                relaxation = msol.bound if relaxation is None else min(relaxation, msol.bound)
            trace.append(
                TraceRow(len(trace) + 1, relaxation, best_bound, None,
                         time.perf_counter() - start, len(columns), distinct)
            )
            return result("time_limit")

        relaxation = msol.objective
        observed.append(tuple(msol.leader.budget[pd.id] for pd in instance.pds))
        bound, plans = evaluate_incumbent(
            instance, msol.leader, backend=params.backend, optimistic=params.optimistic_eval
        )
        if best_bound is None or bound > best_bound:
            best_bound = bound
            best_leader = msol.leader
            best_plans = plans
        gap = relaxation - best_bound
        trace.append(
            TraceRow(len(trace) + 1, relaxation, best_bound, gap,
                     time.perf_counter() - start, len(columns), distinct)
        )
        if gap < params.epsilon:
            return result("optimal")

        col = Column(
            budget_hat=tuple(msol.leader.budget[pd.id] for pd in instance.pds),
            factory_hat=tuple(msol.leader.factory_alloc[pd.id] for pd in instance.pds),
            eng_hat=tuple(msol.leader.eng_alloc[pd.id] for pd in instance.pds),
            cost_star=tuple(plans[pd.id].cost for pd in instance.pds),
        )
        if col.point() in seen_points:
            raise CcgAbort(
                f"duplicate column for budgets {col.budget_hat} after "
                f"{len(trace)} iterations; the separation cuts failed to "
                "exclude an already-generated point"
            )
        seen_points.add(col.point())
        columns.append(col)


TRACE_HEADER = (
    "iter", "relaxation_bound", "incumbent_bound", "gap",
    "wall_seconds", "n_columns", "distinct_budgets",
)


def _csv_num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else str(float(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_trace_csv(result: CcgResult, path) -> None:
    """Convergence trace, one row per iteration (plot-ready)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for row in result.trace:
            writer.writerow([
                row.iteration,
                _csv_num(row.relaxation_bound),
                _csv_num(row.incumbent_bound),
                _csv_num(row.gap),
                f"{row.wall_seconds:.3f}",
                row.n_columns,
                row.distinct_budgets,
            ])
