"""Division-level planning problems and the lower-level equilibrium.

Given a leader decision, each division plans production, backorders,
inventory and development completions to minimize its own cost under its
allocated budget and capacities.  The divisions' joint problem with the
capacity totals as shared equality couplings is built by
:func:`build_equilibrium_problem`; :func:`check_equilibrium` verifies a
joint solution by unilateral re-solves.

Division solves for distinct divisions are independent given the leader
decision and may run concurrently; every builder returns a fresh model.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .core import (
    FollowerSolution,
    Instance,
    LeaderAggregate,
    LeaderDecision,
    Num,
    PDSpec,
    follower_cost,
)
from . import mip


class BudgetInfeasibleError(ValueError):
    """The fixed capacity allocation costs more than the division's budget,
    which no plan variable can repair."""


class CouplingViolationError(ValueError):
    """A joint solution does not split the aggregate capacities exactly."""


@dataclass(frozen=True)
class FollowerContext:
    """Everything one division sees: its own data plus the leader's decision for
    it, and the total factory capacity (used by the development gate)."""

    pd: PDSpec
    horizon: int
    budget: int
    factory_alloc: tuple[int, ...]
    eng_alloc: tuple[int, ...]
    factory_cap: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "factory_alloc", tuple(self.factory_alloc))
        object.__setattr__(self, "eng_alloc", tuple(self.eng_alloc))
        object.__setattr__(self, "factory_cap", tuple(self.factory_cap))
        if len(self.factory_alloc) != self.horizon or len(self.eng_alloc) != self.horizon:
            raise ValueError("allocation vectors must have horizon length")
        if any(x < 0 for x in self.factory_alloc) or any(x < 0 for x in self.eng_alloc):
            raise ValueError("allocations must be nonnegative")

    def spend(self) -> Num:
        return (
            sum(self.factory_alloc) * self.pd.factory_unit_cost
            + sum(self.eng_alloc) * self.pd.eng_unit_cost
        )


def follower_context(instance: Instance, decision: LeaderDecision, pd_id: str) -> FollowerContext:
    pd = instance.pd(pd_id)
    return FollowerContext(
        pd=pd,
        horizon=instance.horizon,
        budget=decision.budget[pd_id],
        factory_alloc=decision.factory_alloc[pd_id],
        eng_alloc=decision.eng_alloc[pd_id],
        factory_cap=instance.factory_cap,
    )


@dataclass
class FollowerModel:
    """A built division model plus the variable handles to read it back."""

    mip: mip.MipModel
    ctx: FollowerContext
    x: dict[tuple[str, int], int]
    v: dict[tuple[str, int], int]
    inv: dict[tuple[str, int], int]
    z: dict[tuple[str, int], int]


def _plan_variables(m: mip.MipModel, pd: PDSpec, T: int, x_ub):
    """Declare one division's plan variables in propagation-friendly order."""
    x: dict[tuple[str, int], int] = {}
    v: dict[tuple[str, int], int] = {}
    inv: dict[tuple[str, int], int] = {}
    z: dict[tuple[str, int], int] = {}
    for prod in pd.products:
        if prod.is_new:
            for t in range(T):
                z[prod.id, t] = m.add_var(f"dev[{prod.id},{t + 1}]", 0, 1, branch_high=True)
    for prod in pd.products:
        cum = 0
        total = sum(prod.demand)
        for t in range(T):
            cum += prod.demand[t]
            # producing usually beats backordering, so search high first
            x[prod.id, t] = m.add_var(f"make[{prod.id},{t + 1}]", 0, x_ub(prod, t),
                                      branch_high=True)
            v[prod.id, t] = m.add_var(f"back[{prod.id},{t + 1}]", 0, cum)
            inv[prod.id, t] = m.add_var(f"hold[{prod.id},{t + 1}]", 0, total)
    return x, v, inv, z


def _plan_constraints(m: mip.MipModel, pd: PDSpec, T: int, x, v, inv, z,
                      factory_cap, factory_rhs, eng_rhs):
    """Capacity usage, inventory balance, single completion, development gate.

    ``factory_rhs``/``eng_rhs`` give, per period, either a fixed allocation
    (int) or a variable index term list for the joint/master models.
    """
    for t in range(T):
        terms = [(z[p.id, t], p.dev_factory_req) for p in pd.new_products]
        terms += [(x[p.id, t], 1) for p in pd.products]
        rhs = factory_rhs(t)
        if isinstance(rhs, list):
            m.add_constr(terms + rhs, "<=", 0, f"factory_use[{pd.id},{t + 1}]")
        else:
            m.add_constr(terms, "<=", rhs, f"factory_use[{pd.id},{t + 1}]")
        terms = [(z[p.id, t], p.dev_eng_req) for p in pd.new_products]
        rhs = eng_rhs(t)
        if isinstance(rhs, list):
            m.add_constr(terms + rhs, "<=", 0, f"eng_use[{pd.id},{t + 1}]")
        else:
            m.add_constr(terms, "<=", rhs, f"eng_use[{pd.id},{t + 1}]")
    for prod in pd.products:
        cum = 0
        for t in range(T):
            # inventory balance with zero initial inventory and backorder
            terms = [(inv[prod.id, t], 1), (x[prod.id, t], -1), (v[prod.id, t], -1)]
            if t > 0:
                terms += [(inv[prod.id, t - 1], -1), (v[prod.id, t - 1], 1)]
            m.add_constr(terms, "==", -prod.demand[t], f"balance[{prod.id},{t + 1}]")
            # telescoped form; redundant but propagates across periods
            cum += prod.demand[t]
            m.add_constr(
                [(x[prod.id, tau], 1) for tau in range(t + 1)]
                + [(inv[prod.id, t], -1), (v[prod.id, t], 1)],
                "==", cum, f"cum_balance[{prod.id},{t + 1}]",
            )
    for prod in pd.new_products:
        m.add_constr(
            [(z[prod.id, t], 1) for t in range(T)], "<=", 1, f"develop_once[{prod.id}]"
        )
        for t in range(T):
            # no production before development completes
            terms = [(x[prod.id, t], 1)]
            terms += [(z[prod.id, tau], -factory_cap[t]) for tau in range(t + 1)]
            m.add_constr(terms, "<=", 0, f"dev_gate[{prod.id},{t + 1}]")


def _cost_terms(pd: PDSpec, T: int, x, v, inv) -> list[tuple[int, Num]]:
    terms: list[tuple[int, Num]] = []
    for prod in pd.products:
        for t in range(T):
            terms.append((v[prod.id, t], prod.backorder_cost[t]))
            terms.append((x[prod.id, t], prod.prod_cost[t]))
            terms.append((inv[prod.id, t], prod.holding_cost[t]))
    return terms


def _revenue_terms(pd: PDSpec, T: int, v) -> tuple[list[tuple[int, Num]], Num]:
    """Linear revenue in the backorder variables plus the demand constant."""
    terms: list[tuple[int, Num]] = []
    const: Num = 0
    for prod in pd.products:
        for t in range(T):
            const += prod.revenue[t] * prod.demand[t]
            terms.append((v[prod.id, t], -prod.revenue[t]))
            if t + 1 < T:
                terms.append((v[prod.id, t], prod.revenue[t + 1]))
    return terms, const


def build_follower_model(ctx: FollowerContext) -> FollowerModel:
    """Build one division's cost-minimization problem for a fixed allocation.

    The budget check involves only leader-fixed quantities, so it is
    evaluated up front: an unaffordable allocation raises
    :class:`BudgetInfeasibleError` instead of producing an infeasible model.
    """
    if ctx.spend() > ctx.budget:
        raise BudgetInfeasibleError(
            f"allocation for {ctx.pd.id} costs {ctx.spend()} > budget {ctx.budget}"
        )
    m = mip.MipModel(sense="min")
    T = ctx.horizon
    x, v, inv, z = _plan_variables(m, ctx.pd, T, lambda prod, t: ctx.factory_alloc[t])
    _plan_constraints(
        m, ctx.pd, T, x, v, inv, z, ctx.factory_cap,
        lambda t: ctx.factory_alloc[t], lambda t: ctx.eng_alloc[t],
    )
    m.set_objective(_cost_terms(ctx.pd, T, x, v, inv))
    return FollowerModel(m, ctx, x, v, inv, z)


def _extract_plan(fm: FollowerModel, values) -> FollowerSolution:
    pd = fm.ctx.pd
    T = fm.ctx.horizon
    production = {p.id: tuple(values[fm.x[p.id, t]] for t in range(T)) for p in pd.products}
    backorder = {p.id: tuple(values[fm.v[p.id, t]] for t in range(T)) for p in pd.products}
    inventory = {p.id: tuple(values[fm.inv[p.id, t]] for t in range(T)) for p in pd.products}
    dev = {p.id: tuple(values[fm.z[p.id, t]] for t in range(T)) for p in pd.new_products}
    plan = FollowerSolution(production, backorder, inventory, dev, 0)
    return FollowerSolution(production, backorder, inventory, dev, follower_cost(pd, plan))


def solve_follower(ctx: FollowerContext, backend=None, *,
                   time_limit: float | None = None) -> FollowerSolution:
    """Optimal plan and cost for one division under a fixed allocation."""
    fm = build_follower_model(ctx)
    sol = mip.solve(fm.mip, backend=backend, time_limit=time_limit)
    if sol.status != "optimal":
        raise RuntimeError(f"division solve for {ctx.pd.id} ended with {sol.status}")
    return _extract_plan(fm, sol.values)


def optimistic_resolve(ctx: FollowerContext, cost_star: Num, backend=None, *,
                       time_limit: float | None = None) -> FollowerSolution:
    """Among the division's cost-optimal plans, pick one the leader likes
    best: re-solve with the cost pinned to ``cost_star`` and the revenue
    term as the objective."""
    fm = build_follower_model(ctx)
    T = ctx.horizon
    fm.mip.add_constr(
        _cost_terms(ctx.pd, T, fm.x, fm.v, fm.inv), "==", cost_star, "pinned_cost"
    )
    rev_terms, rev_const = _revenue_terms(ctx.pd, T, fm.v)
    fm.mip.set_objective(rev_terms, constant=rev_const, sense="max")
    sol = mip.solve(fm.mip, backend=backend, time_limit=time_limit)
    if sol.status != "optimal":
        raise RuntimeError(
            f"optimistic re-solve for {ctx.pd.id} ended with {sol.status}; "
            "is cost_star the proven optimum?"
        )
    plan = _extract_plan(fm, sol.values)
    assert plan.cost == cost_star
    return plan


def plan_revenue(pd: PDSpec, plan: FollowerSolution) -> Num:
    """The leader-side revenue contribution of one division's plan."""
    total: Num = 0
    for prod in pd.products:
        prev = 0
        for t in range(len(prod.demand)):
            total += prod.revenue[t] * (prod.demand[t] - plan.backorder[prod.id][t] + prev)
            prev = plan.backorder[prod.id][t]
    return total


def validate_plan(ctx: FollowerContext, plan: FollowerSolution) -> list[str]:
    """Check a plan against the division's own constraints."""
    fm = build_follower_model(ctx)
    values: list[Num] = [0] * len(fm.mip.variables)
    for (pid, t), idx in fm.x.items():
        values[idx] = plan.production[pid][t]
    for (pid, t), idx in fm.v.items():
        values[idx] = plan.backorder[pid][t]
    for (pid, t), idx in fm.inv.items():
        values[idx] = plan.inventory[pid][t]
    for (pid, t), idx in fm.z.items():
        values[idx] = plan.dev_complete.get(pid, (0,) * ctx.horizon)[t]
    return fm.mip.check_values(values)


# ---------------------------------------------------------------------------
# Joint equilibrium problem
# ---------------------------------------------------------------------------


@dataclass
class EquilibriumModel:
    mip: mip.MipModel
    instance: Instance
    budgets: dict[str, int]
    aggregate: LeaderAggregate
    rf: dict[tuple[str, int], int]
    re: dict[tuple[str, int], int]
    followers: dict[str, FollowerModel]


@dataclass(frozen=True)
class JointSolution:
    """A candidate equilibrium: per-division capacity splits and plans."""

    factory_alloc: Mapping[str, tuple[int, ...]]
    eng_alloc: Mapping[str, tuple[int, ...]]
    plans: Mapping[str, FollowerSolution]

    def __post_init__(self):
        object.__setattr__(
            self, "factory_alloc", {k: tuple(v) for k, v in self.factory_alloc.items()}
        )
        object.__setattr__(
            self, "eng_alloc", {k: tuple(v) for k, v in self.eng_alloc.items()}
        )
        object.__setattr__(self, "plans", dict(self.plans))


def build_equilibrium_problem(
    instance: Instance, budgets: Mapping[str, int], aggregate: LeaderAggregate
) -> EquilibriumModel:
    """Joint cost minimization over all divisions with the capacity totals
    as shared equality couplings; its optimum is an equilibrium."""
    T = instance.horizon
    for t in range(T):
        if aggregate.factory_total[t] > instance.factory_cap[t]:
            raise ValueError(f"aggregate factory total exceeds capacity in period {t + 1}")
        if aggregate.eng_total[t] > instance.eng_cap[t]:
            raise ValueError(f"aggregate engineering total exceeds capacity in period {t + 1}")
    m = mip.MipModel(sense="min")
    rf: dict[tuple[str, int], int] = {}
    re: dict[tuple[str, int], int] = {}
    for pd in instance.pds:
        for t in range(T):
            rf[pd.id, t] = m.add_var(f"fcap[{pd.id},{t + 1}]", 0, aggregate.factory_total[t])
        for t in range(T):
            re[pd.id, t] = m.add_var(f"ecap[{pd.id},{t + 1}]", 0, aggregate.eng_total[t])
    followers: dict[str, FollowerModel] = {}
    obj_terms: list[tuple[int, Num]] = []
    for pd in instance.pds:
        x, v, inv, z = _plan_variables(
            m, pd, T, lambda prod, t: aggregate.factory_total[t]
        )
        _plan_constraints(
            m, pd, T, x, v, inv, z, instance.factory_cap,
            lambda t: [(rf[pd.id, t], -1)], lambda t: [(re[pd.id, t], -1)],
        )
        m.add_constr(
            [(rf[pd.id, t], pd.factory_unit_cost) for t in range(T)]
            + [(re[pd.id, t], pd.eng_unit_cost) for t in range(T)],
            "<=",
            budgets[pd.id],
            f"budget[{pd.id}]",
        )
        obj_terms += _cost_terms(pd, T, x, v, inv)
        ctx = FollowerContext(pd, T, budgets[pd.id], (0,) * T, (0,) * T, instance.factory_cap)
        followers[pd.id] = FollowerModel(m, ctx, x, v, inv, z)
    for t in range(T):
        m.add_constr(
            [(rf[pd.id, t], 1) for pd in instance.pds], "==",
            aggregate.factory_total[t], f"factory_split[{t + 1}]",
        )
        m.add_constr(
            [(re[pd.id, t], 1) for pd in instance.pds], "==",
            aggregate.eng_total[t], f"eng_split[{t + 1}]",
        )
    m.set_objective(obj_terms)
    return EquilibriumModel(m, instance, dict(budgets), aggregate, rf, re, followers)


def solve_equilibrium_problem(em: EquilibriumModel, backend=None, *,
                              time_limit: float | None = None) -> JointSolution:
    sol = mip.solve(em.mip, backend=backend, time_limit=time_limit)
    if sol.status != "optimal":
        raise RuntimeError(f"equilibrium problem ended with {sol.status}")
    T = em.instance.horizon
    factory = {
        pd.id: tuple(sol.values[em.rf[pd.id, t]] for t in range(T)) for pd in em.instance.pds
    }
    eng = {
        pd.id: tuple(sol.values[em.re[pd.id, t]] for t in range(T)) for pd in em.instance.pds
    }
    plans = {
        pd.id: _extract_plan(em.followers[pd.id], sol.values) for pd in em.instance.pds
    }
    return JointSolution(factory, eng, plans)


def check_equilibrium(
    instance: Instance,
    budgets: Mapping[str, int],
    aggregate: LeaderAggregate,
    joint: JointSolution,
    backend=None,
    tol: Num = Fraction(1, 10**6),
) -> bool:
    """True iff no division can cut its cost by deviating unilaterally.

    With all rivals' splits fixed, the equality couplings pin the deviating
    division to its current allocation, so the check reduces to one re-solve
    per division at its own (budget, allocation).  A joint solution that
    breaks the couplings or a division's own constraints is an error, not a
    ``False``.
    """
    T = instance.horizon
    for t in range(T):
        if sum(joint.factory_alloc[pd.id][t] for pd in instance.pds) != aggregate.factory_total[t]:
            raise CouplingViolationError(f"factory split does not sum to total in period {t + 1}")
        if sum(joint.eng_alloc[pd.id][t] for pd in instance.pds) != aggregate.eng_total[t]:
            raise CouplingViolationError(f"engineering split does not sum to total in period {t + 1}")
    for pd in instance.pds:
        ctx = FollowerContext(
            pd, T, budgets[pd.id], joint.factory_alloc[pd.id],
            joint.eng_alloc[pd.id], instance.factory_cap,
        )
        bad = validate_plan(ctx, joint.plans[pd.id])
        if bad:
            raise CouplingViolationError(
                f"plan for {pd.id} violates its own constraints: {bad[:3]}"
            )
        current_cost = follower_cost(pd, joint.plans[pd.id])
        best = solve_follower(ctx, backend=backend)
        if current_cost > best.cost + tol:
            return False
    return True
