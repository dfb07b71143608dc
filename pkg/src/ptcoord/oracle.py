"""Independent brute-force bilevel optimizer for tiny instances.

Ground truth for the solver: enumerate every budget split and every
affordable integral capacity allocation, solve each division exactly with
the bundled reference solver, break cost ties optimistically by
exhaustively enumerating the tied plans, and keep the best leader
objective.  The division model here is built by this module itself, deliberately,
so a model-construction bug elsewhere cannot cancel out.

Refuses instances beyond its enumeration limits rather than approximating.
Leaf evaluations are independent and the best-of reduction breaks ties
lexicographically on the leader decision, so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .core import (
    FollowerSolution,
    Instance,
    LeaderDecision,
    Num,
    PDSpec,
)
from . import mip


class OracleLimitError(RuntimeError):
    """The instance needs more enumeration than the configured cap."""


@dataclass(frozen=True)
class OracleLimits:
    max_leaves: int = 10**6
    max_tied_plans: int = 20_000

    def __post_init__(self):
        if self.max_leaves < 1:
            raise ValueError("max_leaves must be positive")


def _pd_model(pd: PDSpec, T: int, factory_alloc, eng_alloc, factory_cap):
    """This module's own build of one division's problem (kept separate from
    the solver-side builders so the oracle stays an independent check).

    Variables are grouped by family per product: production, then
    backorders, then inventory, with development flags last.
    """
    m = mip.MipModel(sense="min")
    x: dict[tuple[str, int], int] = {}
    v: dict[tuple[str, int], int] = {}
    inv: dict[tuple[str, int], int] = {}
    z: dict[tuple[str, int], int] = {}
    totals = []
    cum_rows = []
    for prod in pd.products:
        totals.append(sum(prod.demand))
        running = 0
        cums = []
        for t in range(T):
            running += prod.demand[t]
            cums.append(running)
        cum_rows.append(cums)
        if prod.is_new:
            for t in range(T):
                z[prod.id, t] = m.add_var(f"z[{prod.id},{t}]", 0, 1, branch_high=True)
    for prod, total, cums in zip(pd.products, totals, cum_rows):
        for t in range(T):
            x[prod.id, t] = m.add_var(f"x[{prod.id},{t}]", 0, factory_alloc[t],
                                      branch_high=True)
        for t in range(T):
            v[prod.id, t] = m.add_var(f"v[{prod.id},{t}]", 0, cums[t])
        for t in range(T):
            inv[prod.id, t] = m.add_var(f"i[{prod.id},{t}]", 0, total)

    for t in range(T):
        m.add_constr(
            [(x[p.id, t], 1) for p in pd.products]
            + [(z[p.id, t], p.dev_factory_req) for p in pd.products if p.is_new],
            "<=", factory_alloc[t],
        )
        m.add_constr(
            [(z[p.id, t], p.dev_eng_req) for p in pd.products if p.is_new],
            "<=", eng_alloc[t],
        )
    for prod, cums in zip(pd.products, cum_rows):
        for t in range(T):
            terms = [(inv[prod.id, t], 1), (x[prod.id, t], -1), (v[prod.id, t], -1)]
            if t:
                terms += [(inv[prod.id, t - 1], -1), (v[prod.id, t - 1], 1)]
            m.add_constr(terms, "==", -prod.demand[t])
            m.add_constr(
                [(x[prod.id, tau], 1) for tau in range(t + 1)]
                + [(inv[prod.id, t], -1), (v[prod.id, t], 1)],
                "==", cums[t],
            )
        if prod.is_new:
            m.add_constr([(z[prod.id, t], 1) for t in range(T)], "<=", 1)
            for t in range(T):
                m.add_constr(
                    [(x[prod.id, t], 1)]
                    + [(z[prod.id, tau], -factory_cap[t]) for tau in range(t + 1)],
                    "<=", 0,
                )
    m.set_objective(
        [(v[p.id, t], p.backorder_cost[t]) for p in pd.products for t in range(T)]
        + [(x[p.id, t], p.prod_cost[t]) for p in pd.products for t in range(T)]
        + [(inv[p.id, t], p.holding_cost[t]) for p in pd.products for t in range(T)]
    )
    return m, x, v, inv, z


def _plan_from_values(pd: PDSpec, T: int, values, x, v, inv, z, cost) -> FollowerSolution:
    return FollowerSolution(
        production={p.id: tuple(values[x[p.id, t]] for t in range(T)) for p in pd.products},
        backorder={p.id: tuple(values[v[p.id, t]] for t in range(T)) for p in pd.products},
        inventory={p.id: tuple(values[inv[p.id, t]] for t in range(T)) for p in pd.products},
        dev_complete={
            p.id: tuple(values[z[p.id, t]] for t in range(T)) for p in pd.products if p.is_new
        },
        cost=cost,
    )


def _revenue(pd: PDSpec, T: int, values, v) -> Num:
    total: Num = 0
    for prod in pd.products:
        prev = 0
        for t in range(T):
            bt = values[v[prod.id, t]]
            total += prod.revenue[t] * (prod.demand[t] - bt + prev)
            prev = bt
    return total


def _alloc_vectors(caps, unit_cost: Num, budget: int) -> Iterator[tuple[int, ...]]:
    """All per-period vectors within the period caps costing at most budget,
    in lexicographic order."""
    T = len(caps)

    def rec(t: int, left: Num, prefix: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
        if t == T:
            yield prefix
            return
        top = min(caps[t], int(left // unit_cost))
        for amount in range(top + 1):
            yield from rec(t + 1, left - amount * unit_cost, prefix + (amount,))

    yield from rec(0, budget, ())


def _budget_vectors(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All nonnegative integer vectors with sum at most total, lex order."""
    def rec(i: int, left: int, prefix: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
        if i == parts:
            yield prefix
            return
        for amount in range(left + 1):
            yield from rec(i + 1, left - amount, prefix + (amount,))

    yield from rec(0, total, ())


@dataclass(frozen=True)
class _Option:
    factory: tuple[int, ...]
    eng: tuple[int, ...]
    spend: Num
    cost: Num
    revenue: Num
    plan: FollowerSolution


def _pd_options(instance: Instance, pd: PDSpec, limits: OracleLimits) -> list[_Option]:
    """Solve the division at every affordable allocation; each option stores
    the optimal cost and the best revenue among the cost-tied plans."""
    T = instance.horizon
    budget = instance.total_budget
    options: list[_Option] = []
    for rf in _alloc_vectors(instance.factory_cap, pd.factory_unit_cost, budget):
        left = budget - sum(rf) * pd.factory_unit_cost
        for re_vec in _alloc_vectors(instance.eng_cap, pd.eng_unit_cost, int(left)):
            spend = sum(rf) * pd.factory_unit_cost + sum(re_vec) * pd.eng_unit_cost
            model, x, v, inv, z = _pd_model(pd, T, rf, re_vec, instance.factory_cap)
            sol = mip.reference_solve(model)
            assert sol.status == "optimal"  # a division can always do nothing
            tied = mip.reference_enumerate(
                model, sol.objective, max_solutions=limits.max_tied_plans
            )
            best_rev = None
            best_vals = None
            for vals in tied:
                rev = _revenue(pd, T, vals, v)
                if best_rev is None or rev > best_rev:
                    best_rev = rev
                    best_vals = vals
            plan = _plan_from_values(pd, T, best_vals, x, v, inv, z, sol.objective)
            options.append(_Option(tuple(rf), tuple(re_vec), spend, sol.objective,
                                   best_rev, plan))
            if len(options) > limits.max_leaves:
                raise OracleLimitError(
                    f"division {pd.id} has more than {limits.max_leaves} allocations"
                )
    return options


def brute_force_bilevel(
    instance: Instance, limits: OracleLimits | None = None
) -> tuple[Num, LeaderDecision, dict[str, FollowerSolution]]:
    """Exact bilevel optimum by full enumeration.

    Walks every budget split (spending at most the total) and every joint
    affordable capacity allocation within the shared per-period caps; the
    value of a leaf is the sum over divisions of best-tied-revenue minus
    optimal cost.  Ties between leader decisions resolve to the
    lexicographically smallest (budget vector, then per-division allocation
    vectors in division order).
    """
    limits = limits or OracleLimits()
    T = instance.horizon
    J = instance.n_pds
    per_pd = [_pd_options(instance, pd, limits) for pd in instance.pds]

    best_val: Num | None = None
    best_pick: tuple[_Option, ...] | None = None
    best_budget: tuple[int, ...] | None = None
    leaves = 0

    def rec(j: int, budget_vec, used_f, used_e, picked, value):
        nonlocal best_val, best_pick, best_budget, leaves
        if j == J:
            leaves += 1
            if leaves > limits.max_leaves:
                raise OracleLimitError(f"more than {limits.max_leaves} leader decisions")
            if best_val is None or value > best_val:
                best_val = value
                best_pick = tuple(picked)
                best_budget = budget_vec
            return
        for opt in per_pd[j]:
            if opt.spend > budget_vec[j]:
                continue
            if any(used_f[t] + opt.factory[t] > instance.factory_cap[t] for t in range(T)):
                continue
            if any(used_e[t] + opt.eng[t] > instance.eng_cap[t] for t in range(T)):
                continue
            rec(
                j + 1,
                budget_vec,
                [used_f[t] + opt.factory[t] for t in range(T)],
                [used_e[t] + opt.eng[t] for t in range(T)],
                picked + [opt],
                value + opt.revenue - opt.cost,
            )

    for budget_vec in _budget_vectors(instance.total_budget, J):
        rec(0, budget_vec, [0] * T, [0] * T, [], 0)

    assert best_val is not None  # the all-zero decision always exists
    leader = LeaderDecision(
        budget={pd.id: best_budget[j] for j, pd in enumerate(instance.pds)},
        factory_alloc={pd.id: best_pick[j].factory for j, pd in enumerate(instance.pds)},
        eng_alloc={pd.id: best_pick[j].eng for j, pd in enumerate(instance.pds)},
    )
    plans = {pd.id: best_pick[j].plan for j, pd in enumerate(instance.pds)}
    return best_val, leader, plans
