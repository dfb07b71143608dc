"""Seeded random instance generator.

Reproduces the benchmark families used throughout: four demand markets,
current products whose demand dies out partway through the horizon, new
products whose demand ramps up and stabilizes, capacities drawn around
total demand, development requirements around 40% of the average per-period
capacity share, and a total budget set as a fraction of the cost of buying
every unit of capacity in every period.

Determinism contract: every parameter family draws from its own RNG stream
keyed by (seed, family, product-or-division index), so regenerating with
the same seed is byte-identical and adding a product does not reshuffle the
others' data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .core import Instance, PDSpec, ProductSpec

MARKET_RANGES = {1: (2, 20), 2: (15, 20), 3: (20, 50), 4: (30, 150)}

HOLDING_COST = 1
PROD_COST = 2 * HOLDING_COST
BACKORDER_COST = 10 * HOLDING_COST
PRICE_RANGE = (20, 30)
ENG_CAP_RANGE = (2, 20)
FACTORY_UNIT_COST_RANGE = (1, 10)
ENG_UNIT_COST_RANGE = (50, 100)
CAPACITY_SPREAD = (0.7, 1.3)
DEV_MEAN, DEV_STD, DEV_FLOOR = 0.4, 0.2, 0.05

# stream family tags
_F_MARKET, _F_DEMAND, _F_PRICE, _F_DEV, _F_FCAP, _F_ECAP, _F_COST = range(7)


@dataclass(frozen=True)
class GenConfig:
    """One instance recipe: sizes, budget fraction, and the seed."""

    horizon: int
    n_pds: int
    products_per_pd: int
    new_per_pd: int
    budget_fraction: Fraction
    seed: int
    pi_per_period: bool = False
    ensure_capacity_covers_demand: bool = False

    def __post_init__(self):
        object.__setattr__(self, "budget_fraction", _fraction(self.budget_fraction))
        if self.horizon < 2:
            raise ValueError("horizon must be at least 2")
        if self.n_pds < 1:
            raise ValueError("need at least one product division")
        if not 0 <= self.new_per_pd <= self.products_per_pd:
            raise ValueError("new products per division must not exceed total products")
        if self.budget_fraction <= 0:
            raise ValueError("budget fraction must be positive")


def _fraction(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, *key)))


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def demand_profile(market: int, is_new: bool, horizon: int,
                   rng: np.random.Generator) -> tuple[int, ...]:
    """Draw one product's per-period demand.

    A base level is drawn per period from the market's range.  Current
    products carry the full level until a cutoff somewhere in the 40–70%
    stretch of the horizon and drop to zero after it.  New products are zero
    before a start period drawn from the 30–50% stretch, ramp through 1/3
    and 2/3 of the level over the next two periods, and then run stable.
    """
    if market not in MARKET_RANGES:
        raise ValueError(f"unknown market {market}")
    lo, hi = MARKET_RANGES[market]
    if is_new:
        start = int(rng.integers(math.ceil(0.3 * horizon), math.ceil(0.5 * horizon) + 1))
    else:
        cutoff = int(rng.integers(math.ceil(0.4 * horizon), math.ceil(0.7 * horizon) + 1))
    levels = [int(rng.integers(lo, hi + 1)) for _ in range(horizon)]
    out = []
    for t in range(1, horizon + 1):
        level = levels[t - 1]
        if is_new:
            if t < start:
                out.append(0)
            elif t == start:
                out.append(_round_half_up(level / 3))
            elif t == start + 1:
                out.append(_round_half_up(2 * level / 3))
            else:
                out.append(level)
        else:
            out.append(level if t <= cutoff else 0)
    return tuple(out)


def _draw_product(seed: int, gidx: int, pd_id: str, prod_id: str, is_new: bool,
                  T: int, pi_per_period: bool):
    market = int(_rng(seed, _F_MARKET, gidx).integers(1, 5))
    demand = demand_profile(market, is_new, T, _rng(seed, _F_DEMAND, gidx))
    price_rng = _rng(seed, _F_PRICE, gidx)
    if pi_per_period:
        revenue = tuple(int(price_rng.integers(PRICE_RANGE[0], PRICE_RANGE[1] + 1))
                        for _ in range(T))
    else:
        revenue = (int(price_rng.integers(PRICE_RANGE[0], PRICE_RANGE[1] + 1)),) * T
    return ProductSpec(
        id=prod_id,
        owner=pd_id,
        is_new=is_new,
        demand=demand,
        revenue=revenue,
        prod_cost=(PROD_COST,) * T,
        backorder_cost=(BACKORDER_COST,) * T,
        holding_cost=(HOLDING_COST,) * T,
    )


def _dev_multiplier(seed: int, gidx: int) -> float:
    rng = _rng(seed, _F_DEV, gidx)
    z = float(rng.normal(DEV_MEAN, DEV_STD))
    while z < DEV_FLOOR:
        z = float(rng.normal(DEV_MEAN, DEV_STD))
    return z


def _capacities(seed: int, T: int, total_demand: list[int], ensure_cover: bool,
                attempt: int = 0) -> tuple[list[int], list[int]]:
    fcap_rng = _rng(seed, _F_FCAP, attempt)
    factory = []
    for t in range(T):
        u = float(fcap_rng.uniform(*CAPACITY_SPREAD))
        raw = _round_half_up(u * total_demand[t])
        lo = math.ceil(CAPACITY_SPREAD[0] * total_demand[t])
        hi = math.floor(CAPACITY_SPREAD[1] * total_demand[t])
        factory.append(min(max(raw, lo), hi))
    if ensure_cover and sum(factory) < sum(total_demand):
        return _capacities(seed, T, total_demand, ensure_cover, attempt + 1)
    ecap_rng = _rng(seed, _F_ECAP, attempt)
    eng = [int(ecap_rng.integers(ENG_CAP_RANGE[0], ENG_CAP_RANGE[1] + 1)) for _ in range(T)]
    return factory, eng


def generate_instance(config: GenConfig) -> Instance:
    """Build one instance; a pure function of the config including the seed."""
    T = config.horizon
    J = config.n_pds
    N = config.products_per_pd
    seed = config.seed

    products: list[list[ProductSpec]] = []
    for j in range(J):
        pd_id = f"pd{j}"
        row = []
        for n in range(N):
            gidx = j * N + n
            is_new = n < config.new_per_pd
            row.append(
                _draw_product(seed, gidx, pd_id, f"{pd_id}-p{n}", is_new, T,
                              config.pi_per_period)
            )
        products.append(row)

    total_demand = [sum(p.demand[t] for row in products for p in row) for t in range(T)]
    factory_cap, eng_cap = _capacities(
        seed, T, total_demand, config.ensure_capacity_covers_demand
    )

    # development needs scale off the average per-division period capacity
    avg_f = Fraction(sum(factory_cap), T * J)
    avg_e = Fraction(sum(eng_cap), T * J)
    for j in range(J):
        for n in range(config.new_per_pd):
            gidx = j * N + n
            mult = _dev_multiplier(seed, gidx)
            products[j][n] = replace(
                products[j][n],
                dev_factory_req=max(1, _round_half_up(float(avg_f) * mult)),
                dev_eng_req=max(1, _round_half_up(float(avg_e) * mult)),
            )

    pds = []
    for j in range(J):
        cost_rng = _rng(seed, _F_COST, j)
        pds.append(
            PDSpec(
                id=f"pd{j}",
                products=tuple(products[j]),
                factory_unit_cost=int(
                    cost_rng.integers(FACTORY_UNIT_COST_RANGE[0], FACTORY_UNIT_COST_RANGE[1] + 1)
                ),
                eng_unit_cost=int(
                    cost_rng.integers(ENG_UNIT_COST_RANGE[0], ENG_UNIT_COST_RANGE[1] + 1)
                ),
            )
        )

    full_cost = sum(
        sum(factory_cap) * pd.factory_unit_cost + sum(eng_cap) * pd.eng_unit_cost
        for pd in pds
    )
    budget = math.ceil(config.budget_fraction * full_cost)
    return Instance(
        horizon=T,
        pds=tuple(pds),
        factory_cap=tuple(factory_cap),
        eng_cap=tuple(eng_cap),
        total_budget=int(budget),
    )


def clamp_instance(instance: Instance, *, factory_cap_max: int | None = None,
                   eng_cap_max: int | None = None,
                   budget_max: int | None = None) -> Instance:
    """Cap the shared capacities and budget (used to shrink generated
    instances down to enumeration scale)."""
    factory = tuple(
        min(c, factory_cap_max) if factory_cap_max is not None else c
        for c in instance.factory_cap
    )
    eng = tuple(
        min(c, eng_cap_max) if eng_cap_max is not None else c for c in instance.eng_cap
    )
    budget = (
        min(instance.total_budget, budget_max) if budget_max is not None
        else instance.total_budget
    )
    return Instance(instance.horizon, instance.pds, factory, eng, budget)


# ---------------------------------------------------------------------------
# Benchmark grids
# ---------------------------------------------------------------------------

GRID_HORIZONS = (8, 12, 16)
GRID_N_PDS = (2, 4, 8)
GRID_PRODUCTS = (8, 12)
GRID_NEW = (2, 6)
GRID_SEEDS = 5
GRID_BUDGET_FRACTION = Fraction("0.4")

DESK_HORIZONS = (4, 6)
DESK_N_PDS = (2, 3)
DESK_PRODUCTS = 4
DESK_NEW = 2
DESK_SEEDS = 3


def grid_classes() -> list[tuple[int, int, int, int]]:
    """The 36 benchmark classes as (horizon, divisions, products, new)."""
    return [
        (T, J, N, P)
        for T in GRID_HORIZONS
        for J in GRID_N_PDS
        for N in GRID_PRODUCTS
        for P in GRID_NEW
    ]


def full_grid() -> list[GenConfig]:
    """The full benchmark grid: 36 classes x 5 seeds = 180 configs."""
    return [
        GenConfig(T, J, N, P, GRID_BUDGET_FRACTION, seed)
        for (T, J, N, P) in grid_classes()
        for seed in range(1, GRID_SEEDS + 1)
    ]


def desk_grid() -> list[GenConfig]:
    """A reduced grid sized for quick runs on a workstation."""
    return [
        GenConfig(T, J, DESK_PRODUCTS, DESK_NEW, GRID_BUDGET_FRACTION, seed)
        for T in DESK_HORIZONS
        for J in DESK_N_PDS
        for seed in range(1, DESK_SEEDS + 1)
    ]


# ---------------------------------------------------------------------------
# Competition study pool
# ---------------------------------------------------------------------------

COMPETITION_CLASSES = ((6, 2, 1), (3, 4, 2), (2, 6, 3), (1, 12, 6))
_POOL_SIZE = 12
_POOL_NEW = 6


def competition_instances(seed: int, budget_fraction=Fraction("0.4"),
                          horizon: int = 12) -> list[tuple[dict, Instance]]:
    """Instances for the competition study: one fixed pool of 12 products
    (6 new) split across 6, 3, 2, and finally 1 division.

    The pool is drawn once per seed, so product data does not change with
    the split; only ownership, division unit costs, and hence the budget do.
    New products sit at even pool positions so that every contiguous block
    of the pool holds its share of new products.  Development requirements
    are sized for the finest split (6 divisions) and held fixed.
    """
    budget_fraction = _fraction(budget_fraction)
    T = horizon
    ref_j = max(c[0] for c in COMPETITION_CLASSES)

    pool = []
    for gidx in range(_POOL_SIZE):
        is_new = gidx % 2 == 0
        pool.append((gidx, is_new))

    prods = {
        gidx: _draw_product(seed, gidx, "pool", f"p{gidx}", is_new, T, False)
        for gidx, is_new in pool
    }
    total_demand = [sum(p.demand[t] for p in prods.values()) for t in range(T)]
    factory_cap, eng_cap = _capacities(seed, T, total_demand, False)
    avg_f = Fraction(sum(factory_cap), T * ref_j)
    avg_e = Fraction(sum(eng_cap), T * ref_j)
    for gidx, is_new in pool:
        if is_new:
            mult = _dev_multiplier(seed, gidx)
            prods[gidx] = replace(
                prods[gidx],
                dev_factory_req=max(1, _round_half_up(float(avg_f) * mult)),
                dev_eng_req=max(1, _round_half_up(float(avg_e) * mult)),
            )

    out = []
    for J, N, P in COMPETITION_CLASSES:
        pds = []
        for j in range(J):
            cost_rng = _rng(seed, _F_COST, j)
            members = [
                replace(prods[g], owner=f"pd{j}")
                for g in range(j * N, (j + 1) * N)
            ]
            pds.append(
                PDSpec(
                    id=f"pd{j}",
                    products=tuple(members),
                    factory_unit_cost=int(
                        cost_rng.integers(FACTORY_UNIT_COST_RANGE[0],
                                          FACTORY_UNIT_COST_RANGE[1] + 1)
                    ),
                    eng_unit_cost=int(
                        cost_rng.integers(ENG_UNIT_COST_RANGE[0], ENG_UNIT_COST_RANGE[1] + 1)
                    ),
                )
            )
        full_cost = sum(
            sum(factory_cap) * pd.factory_unit_cost + sum(eng_cap) * pd.eng_unit_cost
            for pd in pds
        )
        instance = Instance(
            horizon=T,
            pds=tuple(pds),
            factory_cap=tuple(factory_cap),
            eng_cap=tuple(eng_cap),
            total_budget=int(math.ceil(budget_fraction * full_cost)),
        )
        meta = {"J": J, "N_j": N, "P_j": P, "T": T, "seed": seed}
        out.append((meta, instance))
    return out
