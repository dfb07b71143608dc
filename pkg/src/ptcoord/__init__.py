"""Bilevel budget and capacity coordination for product transitions.

A leader splits a total budget and shared factory/engineering capacity
across product divisions; each division then plans production, backorders,
inventory and product development to minimize its own cost.  The package
solves the leader's problem to proven optimality by cut-and-column
generation, ships an exact reference MIP solver and an independent
enumeration oracle, and includes a seeded instance generator plus an
experiment harness with CSV and figure output.
"""

from .core import (
    FollowerSolution,
    Instance,
    LeaderAggregate,
    LeaderDecision,
    PDSpec,
    ProductSpec,
    big_m,
    budget_vector_count,
    dumps_instance,
    follower_cost,
    leader_objective,
    load_instance,
    save_instance,
    validate_instance,
    validate_leader_decision,
    weak_composition_count,
)
from .mip import (
    MipModel,
    MipSolution,
    SearchSpaceExceeded,
    get_backend,
    reference_enumerate,
    reference_solve,
    solve,
    write_lp,
)
from .follower import (
    BudgetInfeasibleError,
    CouplingViolationError,
    FollowerContext,
    JointSolution,
    build_equilibrium_problem,
    build_follower_model,
    check_equilibrium,
    follower_context,
    optimistic_resolve,
    plan_revenue,
    solve_equilibrium_problem,
    solve_follower,
    validate_plan,
)
from .master import Column, MasterSolution, build_master, solve_master
from .ccg import CcgAbort, CcgParams, CcgResult, evaluate_incumbent, run_ccg, write_trace_csv
from .generator import (
    GenConfig,
    clamp_instance,
    competition_instances,
    demand_profile,
    desk_grid,
    generate_instance,
    full_grid,
)
from .oracle import OracleLimits, OracleLimitError, brute_force_bilevel

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
