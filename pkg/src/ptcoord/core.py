"""Problem data model and shared quantities.

An :class:`Instance` holds the full deterministic data of the coordination
problem: a planning horizon, shared factory/engineering capacity per period,
a total budget, and one :class:`PDSpec` per product division, each owning a
list of :class:`ProductSpec`.  All domain objects are immutable after
construction and safe to share across workers; the operations in this module
are pure functions.

Monetary data is kept exact: integers or :class:`fractions.Fraction`.  The
bundled instance generator emits integers only, which makes every objective
value in the pipeline an exact integer and allows exact optimality
certificates downstream.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

Num = int | Fraction


def _as_tuple(values: Iterable) -> tuple:
    return tuple(values)


def _is_number(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


@dataclass(frozen=True)
class ProductSpec:
    """One product of a division: demand, prices, costs, development needs.

    Per-period vectors are indexed from period 1 at position 0 and must all
    have the instance horizon as length.  ``dev_factory_req``/``dev_eng_req``
    are the one-shot factory and engineering capacity consumed to complete
    development; they are meaningful only for new products and read as 0 for
    products already on the market.
    """

    id: str
    owner: str
    is_new: bool
    demand: tuple[int, ...]
    revenue: tuple[Num, ...]
    prod_cost: tuple[Num, ...]
    backorder_cost: tuple[Num, ...]
    holding_cost: tuple[Num, ...]
    dev_factory_req: int = 0
    dev_eng_req: int = 0

    def __post_init__(self):
        object.__setattr__(self, "demand", _as_tuple(self.demand))
        object.__setattr__(self, "revenue", _as_tuple(self.revenue))
        object.__setattr__(self, "prod_cost", _as_tuple(self.prod_cost))
        object.__setattr__(self, "backorder_cost", _as_tuple(self.backorder_cost))
        object.__setattr__(self, "holding_cost", _as_tuple(self.holding_cost))


@dataclass(frozen=True)
class PDSpec:
    """A product division: its products and its per-unit capacity prices."""

    id: str
    products: tuple[ProductSpec, ...]
    factory_unit_cost: Num
    eng_unit_cost: Num

    def __post_init__(self):
        object.__setattr__(self, "products", _as_tuple(self.products))

    @property
    def new_products(self) -> tuple[ProductSpec, ...]:
        return tuple(p for p in self.products if p.is_new)


@dataclass(frozen=True)
class Instance:
    """Full problem data for one coordination problem."""

    horizon: int
    pds: tuple[PDSpec, ...]
    factory_cap: tuple[int, ...]
    eng_cap: tuple[int, ...]
    total_budget: int

    def __post_init__(self):
        object.__setattr__(self, "pds", _as_tuple(self.pds))
        object.__setattr__(self, "factory_cap", _as_tuple(self.factory_cap))
        object.__setattr__(self, "eng_cap", _as_tuple(self.eng_cap))

    @property
    def n_pds(self) -> int:
        return len(self.pds)

    def pd(self, pd_id: str) -> PDSpec:
        for pd in self.pds:
            if pd.id == pd_id:
                return pd
        raise KeyError(pd_id)


@dataclass(frozen=True)
class LeaderDecision:
    """The leader's choice: one budget per division plus per-period
    factory/engineering capacity allocations per division."""

    budget: Mapping[str, int]
    factory_alloc: Mapping[str, tuple[int, ...]]
    eng_alloc: Mapping[str, tuple[int, ...]]

    def __post_init__(self):
        object.__setattr__(self, "budget", dict(self.budget))
        object.__setattr__(
            self, "factory_alloc", {k: tuple(v) for k, v in self.factory_alloc.items()}
        )
        object.__setattr__(
            self, "eng_alloc", {k: tuple(v) for k, v in self.eng_alloc.items()}
        )


@dataclass(frozen=True)
class LeaderAggregate:
    """Per-period totals of factory and engineering capacity handed to the
    lower level (the aggregate the divisions then split among themselves)."""

    factory_total: tuple[int, ...]
    eng_total: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "factory_total", _as_tuple(self.factory_total))
        object.__setattr__(self, "eng_total", _as_tuple(self.eng_total))

    @classmethod
    def from_decision(cls, instance: Instance, decision: LeaderDecision) -> "LeaderAggregate":
        T = instance.horizon
        f = tuple(sum(decision.factory_alloc[pd.id][t] for pd in instance.pds) for t in range(T))
        e = tuple(sum(decision.eng_alloc[pd.id][t] for pd in instance.pds) for t in range(T))
        return cls(f, e)


@dataclass(frozen=True)
class FollowerSolution:
    """One division's plan: production, backorder and inventory per product
    and period, development completion flags, and the plan's cost."""

    production: Mapping[str, tuple[int, ...]]
    backorder: Mapping[str, tuple[int, ...]]
    inventory: Mapping[str, tuple[int, ...]]
    dev_complete: Mapping[str, tuple[int, ...]]
    cost: Num

    def __post_init__(self):
        object.__setattr__(self, "production", {k: tuple(v) for k, v in self.production.items()})
        object.__setattr__(self, "backorder", {k: tuple(v) for k, v in self.backorder.items()})
        object.__setattr__(self, "inventory", {k: tuple(v) for k, v in self.inventory.items()})
        object.__setattr__(
            self, "dev_complete", {k: tuple(v) for k, v in self.dev_complete.items()}
        )


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def validate_instance(instance: Instance) -> list[str]:
    """Check every structural invariant of the data model.

    Returns an empty list when the instance is well formed; otherwise one
    human-readable violation per broken rule, each naming the offending
    field.  Violations are data, not exceptions.
    """
    v: list[str] = []
    T = instance.horizon
    if not isinstance(T, int) or T < 1:
        v.append(f"horizon: must be a positive integer, got {T!r}")
        return v
    if not isinstance(instance.total_budget, int) or instance.total_budget < 0:
        v.append(f"total_budget: must be a nonnegative integer, got {instance.total_budget!r}")
    for name, cap in (("factory_cap", instance.factory_cap), ("eng_cap", instance.eng_cap)):
        if len(cap) != T:
            v.append(f"{name}: expected length {T}, got {len(cap)}")
        for t, c in enumerate(cap):
            if not isinstance(c, int) or c < 0:
                v.append(f"{name}[{t}]: must be a nonnegative integer, got {c!r}")
    if len(instance.pds) < 1:
        v.append("pds: at least one product division required")
    pd_ids = [pd.id for pd in instance.pds]
    if len(set(pd_ids)) != len(pd_ids):
        v.append("pds: division ids must be unique")
    seen_products: set[str] = set()
    for j, pd in enumerate(instance.pds):
        prefix = f"pds[{j}]"
        if len(pd.products) < 1:
            v.append(f"{prefix}.products: at least one product required")
        for name, cost in (
            ("factory_unit_cost", pd.factory_unit_cost),
            ("eng_unit_cost", pd.eng_unit_cost),
        ):
            if not _is_number(cost) or cost <= 0:
                v.append(f"{prefix}.{name}: must be strictly positive, got {cost!r}")
        local_ids = [p.id for p in pd.products]
        if len(set(local_ids)) != len(local_ids):
            v.append(f"{prefix}.products: product ids must be unique within the division")
        for n, prod in enumerate(pd.products):
            p = f"{prefix}.products[{n}]"
            if prod.id in seen_products:
                v.append(f"{p}.id: product id {prod.id!r} duplicated across divisions")
            seen_products.add(prod.id)
            if prod.owner != pd.id:
                v.append(f"{p}.owner: expected {pd.id!r}, got {prod.owner!r}")
            for field_name in ("demand", "revenue", "prod_cost", "backorder_cost", "holding_cost"):
                vec = getattr(prod, field_name)
                if len(vec) != T:
                    v.append(f"{p}.{field_name}: expected length {T}, got {len(vec)}")
                    continue
                for t, x in enumerate(vec):
                    if field_name == "demand" and not isinstance(x, int):
                        v.append(f"{p}.demand[{t}]: must be an integer, got {x!r}")
                    elif not _is_number(x) and not isinstance(x, int):
                        v.append(f"{p}.{field_name}[{t}]: must be an exact number, got {x!r}")
                    elif x < 0:
                        v.append(f"{p}.{field_name}[{t}]: must be nonnegative, got {x!r}")
            for field_name in ("dev_factory_req", "dev_eng_req"):
                req = getattr(prod, field_name)
                if not isinstance(req, int) or req < 0:
                    v.append(f"{p}.{field_name}: must be a nonnegative integer, got {req!r}")
                elif not prod.is_new and req != 0:
                    v.append(
                        f"{p}.{field_name}: development requirements only apply to new products"
                    )
    return v


def validate_leader_decision(instance: Instance, decision: LeaderDecision) -> list[str]:
    """Check a leader decision against the shared budget and capacity limits."""
    v: list[str] = []
    T = instance.horizon
    ids = {pd.id for pd in instance.pds}
    for name, mapping in (
        ("budget", decision.budget),
        ("factory_alloc", decision.factory_alloc),
        ("eng_alloc", decision.eng_alloc),
    ):
        if set(mapping) != ids:
            v.append(f"{name}: division keys {sorted(mapping)} do not match instance")
            return v
    for pd in instance.pds:
        if decision.budget[pd.id] < 0:
            v.append(f"budget[{pd.id}]: negative")
        for name in ("factory_alloc", "eng_alloc"):
            vec = getattr(decision, name)[pd.id]
            if len(vec) != T:
                v.append(f"{name}[{pd.id}]: expected length {T}, got {len(vec)}")
            elif any(x < 0 for x in vec):
                v.append(f"{name}[{pd.id}]: negative entry")
    if v:
        return v
    if sum(decision.budget.values()) > instance.total_budget:
        v.append("budget: allocations exceed the total budget")
    for t in range(T):
        if sum(decision.factory_alloc[pd.id][t] for pd in instance.pds) > instance.factory_cap[t]:
            v.append(f"factory_alloc: period {t + 1} exceeds factory capacity")
        if sum(decision.eng_alloc[pd.id][t] for pd in instance.pds) > instance.eng_cap[t]:
            v.append(f"eng_alloc: period {t + 1} exceeds engineering capacity")
    return v


def leader_objective(
    instance: Instance,
    backorders: Mapping[str, Mapping[str, Sequence[int]]],
    costs: Mapping[str, Num],
) -> Num:
    """Evaluate the leader's contribution objective.

    Total revenue over all divisions, products and periods minus the
    divisions' plan costs; each period earns the unit price on demand net
    of the backorder change.  Backorders before period 1 count as zero.
    """
    total: Num = 0
    for pd in instance.pds:
        if pd.id not in backorders or pd.id not in costs:
            raise ValueError(f"missing data for division {pd.id!r}")
        pd_backorders = backorders[pd.id]
        for prod in pd.products:
            if prod.id not in pd_backorders:
                raise ValueError(f"missing backorders for product {prod.id!r}")
            vec = pd_backorders[prod.id]
            if len(vec) != instance.horizon:
                raise ValueError(
                    f"backorders for product {prod.id!r}: expected length "
                    f"{instance.horizon}, got {len(vec)}"
                )
            prev = 0
            for t in range(instance.horizon):
                total += prod.revenue[t] * (prod.demand[t] - vec[t] + prev)
                prev = vec[t]
        total -= costs[pd.id]
    return total


def follower_cost(pd: PDSpec, plan: FollowerSolution) -> Num:
    """Recompute a plan's cost (backorder + production + holding) from its fields."""
    total: Num = 0
    for prod in pd.products:
        x = plan.production[prod.id]
        v = plan.backorder[prod.id]
        i = plan.inventory[prod.id]
        for t in range(len(prod.demand)):
            total += prod.backorder_cost[t] * v[t] + prod.prod_cost[t] * x[t]
            total += prod.holding_cost[t] * i[t]
    return total


def big_m(instance: Instance, pd_id: str) -> Num:
    """A valid upper bound on the optimal cost of one division under any
    leader decision: the cost of the always-feasible do-nothing plan, which
    produces and holds nothing and backorders the cumulative demand.
    """
    pd = instance.pd(pd_id)
    total: Num = 0
    for prod in pd.products:
        running = 0
        for t in range(instance.horizon):
            running += prod.demand[t]
            total += prod.backorder_cost[t] * running
    return total


def weak_composition_count(budget: int, parts: int) -> int:
    """Number of ways to split an integer budget into an ordered tuple of
    ``parts`` nonnegative integers summing to exactly ``budget``.

    Exact for any size thanks to arbitrary-precision integers; invalid
    arguments raise rather than wrap around.
    """
    if not isinstance(budget, int) or budget < 0:
        raise ValueError(f"budget must be a nonnegative integer, got {budget!r}")
    if not isinstance(parts, int) or parts < 1:
        raise ValueError(f"parts must be a positive integer, got {parts!r}")
    return math.comb(budget + parts - 1, parts - 1)


def budget_vector_count(budget: int, parts: int) -> int:
    """Number of ordered nonnegative integer tuples summing to at most
    ``budget``: the size of the leader's budget-allocation space when the
    budget need not be spent in full."""
    if not isinstance(budget, int) or budget < 0:
        raise ValueError(f"budget must be a nonnegative integer, got {budget!r}")
    if not isinstance(parts, int) or parts < 1:
        raise ValueError(f"parts must be a positive integer, got {parts!r}")
    return math.comb(budget + parts, parts)


# ---------------------------------------------------------------------------
# Canonical instance file
# ---------------------------------------------------------------------------


def _num_to_json(x: Num):
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return x.numerator
        return str(x)
    raise TypeError(f"cannot serialize {x!r} exactly")


def _num_from_json(x) -> Num:
    if isinstance(x, bool):
        raise ValueError(f"expected a number, got {x!r}")
    if isinstance(x, int):
        return x
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        raise ValueError(
            f"floats are not accepted in instance files (got {x!r}); "
            "use an integer or a decimal string"
        )
    raise ValueError(f"expected a number, got {x!r}")


def instance_to_dict(instance: Instance) -> dict:
    return {
        "horizon": instance.horizon,
        "total_budget": instance.total_budget,
        "factory_cap": list(instance.factory_cap),
        "eng_cap": list(instance.eng_cap),
        "pds": [
            {
                "id": pd.id,
                "factory_unit_cost": _num_to_json(pd.factory_unit_cost),
                "eng_unit_cost": _num_to_json(pd.eng_unit_cost),
                "products": [
                    {
                        "id": p.id,
                        "is_new": p.is_new,
                        "demand": list(p.demand),
                        "revenue": [_num_to_json(x) for x in p.revenue],
                        "prod_cost": [_num_to_json(x) for x in p.prod_cost],
                        "backorder_cost": [_num_to_json(x) for x in p.backorder_cost],
                        "holding_cost": [_num_to_json(x) for x in p.holding_cost],
                        **(
                            {
                                "dev_factory_req": p.dev_factory_req,
                                "dev_eng_req": p.dev_eng_req,
                            }
                            if p.is_new
                            else {}
                        ),
                    }
                    for p in pd.products
                ],
            }
            for pd in instance.pds
        ],
    }


def instance_from_dict(data: Mapping) -> Instance:
    pds = []
    for pd_data in data["pds"]:
        pd_id = pd_data["id"]
        products = []
        for p in pd_data["products"]:
            products.append(
                ProductSpec(
                    id=p["id"],
                    owner=p.get("owner", pd_id),
                    is_new=bool(p["is_new"]),
                    demand=tuple(int(x) for x in p["demand"]),
                    revenue=tuple(_num_from_json(x) for x in p["revenue"]),
                    prod_cost=tuple(_num_from_json(x) for x in p["prod_cost"]),
                    backorder_cost=tuple(_num_from_json(x) for x in p["backorder_cost"]),
                    holding_cost=tuple(_num_from_json(x) for x in p["holding_cost"]),
                    dev_factory_req=int(p.get("dev_factory_req", 0)),
                    dev_eng_req=int(p.get("dev_eng_req", 0)),
                )
            )
        pds.append(
            PDSpec(
                id=pd_id,
                products=tuple(products),
                factory_unit_cost=_num_from_json(pd_data["factory_unit_cost"]),
                eng_unit_cost=_num_from_json(pd_data["eng_unit_cost"]),
            )
        )
    return Instance(
        horizon=int(data["horizon"]),
        pds=tuple(pds),
        factory_cap=tuple(int(x) for x in data["factory_cap"]),
        eng_cap=tuple(int(x) for x in data["eng_cap"]),
        total_budget=int(data["total_budget"]),
    )


def dumps_instance(instance: Instance) -> str:
    """Serialize to the canonical JSON document (UTF-8, LF, deterministic)."""
    return json.dumps(instance_to_dict(instance), indent=2) + "\n"


def save_instance(instance: Instance, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_instance(instance))


def load_instance(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))
