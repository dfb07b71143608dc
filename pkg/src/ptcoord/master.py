"""Restricted single-level master problem over generated columns.

The master maximizes the leader's contribution over its budget and capacity
variables together with one copy of every division's plan variables, so the
leader directly selects the plans it prefers among each division's feasible
set (the optimistic reading).  Each stored :class:`Column`, a previously
visited (budget, allocation) pair with the divisions' true optimal costs,
contributes a cut block:

* per division, a binary ``bypass`` flag; leaving it at 0 requires the new
  allocation to dominate the column's allocation componentwise and caps the
  division's cost at the column's optimum through a big-M cut;
* setting any flag forces the budget vector to move at least one unit away
  from the column's budget vector (an exact sign-split linearization of the
  absolute deviation, using integer auxiliaries bounded by the total
  budget).

The cost variables themselves are substituted away: wherever the division's
cost appears it is written as its defining linear expression, which keeps
the model pure-integer on integral data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import (
    FollowerSolution,
    Instance,
    LeaderDecision,
    Num,
    big_m,
    follower_cost,
)
from .follower import _cost_terms, _plan_constraints, _plan_variables, _revenue_terms
from . import mip


@dataclass(frozen=True)
class Column:
    """One generated point: a budget vector, its capacity allocations, and
    each division's proven optimal cost there."""

    budget_hat: tuple[int, ...]
    factory_hat: tuple[tuple[int, ...], ...]
    eng_hat: tuple[tuple[int, ...], ...]
    cost_star: tuple[Num, ...]

    def __post_init__(self):
        object.__setattr__(self, "budget_hat", tuple(self.budget_hat))
        object.__setattr__(self, "factory_hat", tuple(tuple(r) for r in self.factory_hat))
        object.__setattr__(self, "eng_hat", tuple(tuple(r) for r in self.eng_hat))
        object.__setattr__(self, "cost_star", tuple(self.cost_star))

    def point(self) -> tuple:
        """The (budget, allocation) identity used for duplicate detection."""
        return (self.budget_hat, self.factory_hat, self.eng_hat)


def validate_column(instance: Instance, column: Column) -> None:
    J = instance.n_pds
    T = instance.horizon
    if not (len(column.budget_hat) == len(column.factory_hat)
            == len(column.eng_hat) == len(column.cost_star) == J):
        raise ValueError("column dimensions do not match the instance")
    if sum(column.budget_hat) > instance.total_budget:
        raise ValueError("column budget vector exceeds the total budget")
    for t in range(T):
        if sum(column.factory_hat[j][t] for j in range(J)) > instance.factory_cap[t]:
            raise ValueError(f"column factory allocation exceeds capacity in period {t + 1}")
        if sum(column.eng_hat[j][t] for j in range(J)) > instance.eng_cap[t]:
            raise ValueError(f"column engineering allocation exceeds capacity in period {t + 1}")
    for j, pd in enumerate(instance.pds):
        if column.cost_star[j] > big_m(instance, pd.id):
            raise ValueError(f"column cost for {pd.id} exceeds its do-nothing bound")


@dataclass
class MasterModel:
    mip: mip.MipModel
    instance: Instance
    columns: tuple[Column, ...]
    b: dict[str, int]
    rf: dict[tuple[str, int], int]
    re: dict[tuple[str, int], int]
    x: dict[tuple[str, int], int]
    v: dict[tuple[str, int], int]
    inv: dict[tuple[str, int], int]
    z: dict[tuple[str, int], int]
    bypass: dict[tuple[int, str], int]
    budget_dev: dict[tuple[int, str], int]
    dev_sign: dict[tuple[int, str], int]


@dataclass(frozen=True)
class MasterSolution:
    """An optimal restricted-master point with cut diagnostics exposed."""

    status: str
    leader: LeaderDecision | None
    plans: Mapping[str, FollowerSolution] | None
    costs: Mapping[str, Num] | None
    bypass: Mapping[tuple[int, str], int] | None
    budget_dev: Mapping[tuple[int, str], int] | None
    dev_sign: Mapping[tuple[int, str], int] | None
    objective: Num | None
    bound: Num | None


def build_master(instance: Instance, columns: Sequence[Column]) -> MasterModel:
    """Assemble the restricted master over the given columns."""
    for col in columns:
        validate_column(instance, col)
    T = instance.horizon
    J = instance.n_pds
    total = instance.total_budget
    m = mip.MipModel(sense="max")

    # generous budget and capacity never hurt the relaxed master: search high
    b = {pd.id: m.add_var(f"budget[{pd.id}]", 0, total, branch_high=True)
         for pd in instance.pds}
    rf: dict[tuple[str, int], int] = {}
    re: dict[tuple[str, int], int] = {}
    for pd in instance.pds:
        for t in range(T):
            rf[pd.id, t] = m.add_var(f"fcap[{pd.id},{t + 1}]", 0, instance.factory_cap[t],
                                     branch_high=True)
        for t in range(T):
            re[pd.id, t] = m.add_var(f"ecap[{pd.id},{t + 1}]", 0, instance.eng_cap[t],
                                     branch_high=True)

    bypass: dict[tuple[int, str], int] = {}
    budget_dev: dict[tuple[int, str], int] = {}
    dev_sign: dict[tuple[int, str], int] = {}
    for g in range(len(columns)):
        for pd in instance.pds:
            bypass[g, pd.id] = m.add_var(f"bypass[{g},{pd.id}]", 0, 1)
            dev_sign[g, pd.id] = m.add_var(f"dev_sign[{g},{pd.id}]", 0, 1)
            budget_dev[g, pd.id] = m.add_var(f"budget_dev[{g},{pd.id}]", 0, total)

    x: dict[tuple[str, int], int] = {}
    v: dict[tuple[str, int], int] = {}
    inv: dict[tuple[str, int], int] = {}
    z: dict[tuple[str, int], int] = {}
    cost_exprs: dict[str, list[tuple[int, Num]]] = {}
    obj_terms: list[tuple[int, Num]] = []
    obj_const: Num = 0
    for pd in instance.pds:
        px, pv, pinv, pz = _plan_variables(
            m, pd, T, lambda prod, t: instance.factory_cap[t]
        )
        x.update(px)
        v.update(pv)
        inv.update(pinv)
        z.update(pz)
        _plan_constraints(
            m, pd, T, px, pv, pinv, pz, instance.factory_cap,
            lambda t: [(rf[pd.id, t], -1)], lambda t: [(re[pd.id, t], -1)],
        )
        m.add_constr(
            [(rf[pd.id, t], pd.factory_unit_cost) for t in range(T)]
            + [(re[pd.id, t], pd.eng_unit_cost) for t in range(T)]
            + [(b[pd.id], -1)],
            "<=", 0, f"budget[{pd.id}]",
        )
        cost_exprs[pd.id] = _cost_terms(pd, T, px, pv, pinv)
        rev_terms, rev_const = _revenue_terms(pd, T, pv)
        obj_terms += rev_terms
        obj_const += rev_const
        obj_terms += [(idx, -c) for idx, c in cost_exprs[pd.id]]

    m.add_constr([(b[pd.id], 1) for pd in instance.pds], "<=", total, "budget_total")
    for t in range(T):
        m.add_constr(
            [(rf[pd.id, t], 1) for pd in instance.pds], "<=",
            instance.factory_cap[t], f"factory_total[{t + 1}]",
        )
        m.add_constr(
            [(re[pd.id, t], 1) for pd in instance.pds], "<=",
            instance.eng_cap[t], f"eng_total[{t + 1}]",
        )

    for g, col in enumerate(columns):
        for j, pd in enumerate(instance.pds):
            for t in range(T):
                hat = col.factory_hat[j][t]
                if hat > 0:
                    m.add_constr(
                        [(rf[pd.id, t], 1), (bypass[g, pd.id], hat)], ">=", hat,
                        f"keep_fcap[{g},{pd.id},{t + 1}]",
                    )
                hat = col.eng_hat[j][t]
                if hat > 0:
                    m.add_constr(
                        [(re[pd.id, t], 1), (bypass[g, pd.id], hat)], ">=", hat,
                        f"keep_ecap[{g},{pd.id},{t + 1}]",
                    )
            bv = b[pd.id]
            dv = budget_dev[g, pd.id]
            sv = dev_sign[g, pd.id]
            hat = col.budget_hat[j]
            m.add_constr([(dv, 1), (bv, -1)], ">=", -hat, f"dev_lo1[{g},{pd.id}]")
            m.add_constr([(dv, 1), (bv, 1)], ">=", hat, f"dev_lo2[{g},{pd.id}]")
            m.add_constr(
                [(dv, 1), (bv, -1), (sv, 2 * total)], "<=", 2 * total - hat,
                f"dev_hi1[{g},{pd.id}]",
            )
            m.add_constr(
                [(dv, 1), (bv, 1), (sv, -2 * total)], "<=", hat,
                f"dev_hi2[{g},{pd.id}]",
            )
            # big-M optimality cut on the division's cost expression
            m.add_constr(
                cost_exprs[pd.id] + [(bypass[g, pd.id], -big_m(instance, pd.id))],
                "<=", col.cost_star[j], f"cost_cut[{g},{pd.id}]",
            )
        # any bypassed division forces the budget vector to move
        m.add_constr(
            [(budget_dev[g, pd.id], J) for pd in instance.pds]
            + [(bypass[g, pd.id], -1) for pd in instance.pds],
            ">=", 0, f"move_budget[{g}]",
        )

    m.set_objective(obj_terms, constant=obj_const)
    return MasterModel(
        m, instance, tuple(columns), b, rf, re, x, v, inv, z, bypass, budget_dev, dev_sign
    )


def solve_master(mm: MasterModel, backend=None, *, time_limit: float | None = None,
                 gap: float | None = None) -> MasterSolution:
    """Solve the restricted master; cut auxiliaries are exposed for
    diagnostics and a time limit yields a distinct status."""
    sol = mip.solve(mm.mip, backend=backend, time_limit=time_limit, gap=gap)
    if sol.status in ("infeasible", "unbounded"):
        return MasterSolution(sol.status, None, None, None, None, None, None, None, None)
    if sol.status == "time_limit" and sol.values is None:
        return MasterSolution("time_limit", None, None, None, None, None, None, None, sol.bound)
    instance = mm.instance
    T = instance.horizon
    values = sol.values
    leader = LeaderDecision(
        budget={pd.id: values[mm.b[pd.id]] for pd in instance.pds},
        factory_alloc={
            pd.id: tuple(values[mm.rf[pd.id, t]] for t in range(T)) for pd in instance.pds
        },
        eng_alloc={
            pd.id: tuple(values[mm.re[pd.id, t]] for t in range(T)) for pd in instance.pds
        },
    )
    plans = {}
    costs = {}
    for pd in instance.pds:
        production = {p.id: tuple(values[mm.x[p.id, t]] for t in range(T)) for p in pd.products}
        backorder = {p.id: tuple(values[mm.v[p.id, t]] for t in range(T)) for p in pd.products}
        inventory = {p.id: tuple(values[mm.inv[p.id, t]] for t in range(T)) for p in pd.products}
        dev = {p.id: tuple(values[mm.z[p.id, t]] for t in range(T)) for p in pd.new_products}
        plan = FollowerSolution(production, backorder, inventory, dev, 0)
        cost = follower_cost(pd, plan)
        plans[pd.id] = FollowerSolution(production, backorder, inventory, dev, cost)
        costs[pd.id] = cost
    return MasterSolution(
        status=sol.status,
        leader=leader,
        plans=plans,
        costs=costs,
        bypass={k: values[i] for k, i in mm.bypass.items()},
        budget_dev={k: values[i] for k, i in mm.budget_dev.items()},
        dev_sign={k: values[i] for k, i in mm.dev_sign.items()},
        objective=sol.objective,
        bound=sol.bound,
    )
