import random
from fractions import Fraction

import pytest

from ptcoord import (
    GenConfig,
    Instance,
    PDSpec,
    ProductSpec,
    clamp_instance,
    generate_instance,
)


def make_product(pid="a", owner="pd0", is_new=False, demand=(5,), revenue=(20,),
                 prod_cost=(2,), backorder_cost=(10,), holding_cost=(1,),
                 dev_factory_req=0, dev_eng_req=0):
    T = len(demand)
    return ProductSpec(
        id=pid, owner=owner, is_new=is_new, demand=tuple(demand),
        revenue=tuple(revenue) if len(revenue) == T else tuple(revenue) * T,
        prod_cost=tuple(prod_cost) if len(prod_cost) == T else tuple(prod_cost) * T,
        backorder_cost=tuple(backorder_cost) if len(backorder_cost) == T
        else tuple(backorder_cost) * T,
        holding_cost=tuple(holding_cost) if len(holding_cost) == T
        else tuple(holding_cost) * T,
        dev_factory_req=dev_factory_req, dev_eng_req=dev_eng_req,
    )


@pytest.fixture
def one_product_instance():
    """One division, one product, one period: produce 5 or backorder."""
    prod = make_product()
    pd = PDSpec("pd0", (prod,), 1, 50)
    return Instance(1, (pd,), (5,), (1,), 100)


@pytest.fixture
def two_pd_instance():
    """Two divisions sharing two periods of capacity."""
    a = make_product("a", "pd0", demand=(2, 1), revenue=(20, 20), prod_cost=(2, 2),
                     backorder_cost=(10, 10), holding_cost=(1, 1))
    b = make_product("b", "pd1", demand=(1, 2), revenue=(25, 25), prod_cost=(2, 2),
                     backorder_cost=(10, 10), holding_cost=(1, 1))
    pd0 = PDSpec("pd0", (a,), 1, 10)
    pd1 = PDSpec("pd1", (b,), 2, 10)
    return Instance(2, (pd0, pd1), (3, 3), (1, 1), 8)


@pytest.fixture
def dev_instance():
    """One division with a current and a new product needing development."""
    cur = make_product("cur", "pd0", demand=(3, 2, 0), revenue=(20,) * 3,
                       prod_cost=(2,) * 3, backorder_cost=(10,) * 3, holding_cost=(1,) * 3)
    new = make_product("new", "pd0", is_new=True, demand=(0, 2, 3), revenue=(25,) * 3,
                       prod_cost=(2,) * 3, backorder_cost=(10,) * 3, holding_cost=(1,) * 3,
                       dev_factory_req=1, dev_eng_req=1)
    pd = PDSpec("pd0", (cur, new), 1, 2)
    return Instance(3, (pd,), (5, 5, 5), (2, 2, 2), 40)


def tiny_config(seed: int) -> GenConfig:
    """The seeded tiny-instance family used for oracle cross-checks."""
    T = 2 if seed % 2 == 1 else 3
    N = 2 if seed % 4 < 2 else 3
    return GenConfig(horizon=T, n_pds=2, products_per_pd=N, new_per_pd=1,
                     budget_fraction=Fraction("0.4"), seed=seed)


def tiny_instance(seed: int) -> Instance:
    return clamp_instance(
        generate_instance(tiny_config(seed)),
        factory_cap_max=6, eng_cap_max=3, budget_max=8,
    )


def random_bounded_model(rng: random.Random, max_vars: int = 6):
    """A random small all-integer model plus its bounds, for enumeration."""
    from ptcoord.mip import MipModel

    n = rng.randint(1, max_vars)
    m = MipModel(sense=rng.choice(["min", "max"]))
    bounds = []
    for i in range(n):
        lo = rng.randint(-3, 2)
        hi = lo + rng.randint(0, 4)
        m.add_var(f"x{i}", lo, hi)
        bounds.append((lo, hi))
    for _ in range(rng.randint(0, 5)):
        k = rng.randint(1, n)
        terms = [(i, rng.randint(-4, 4)) for i in rng.sample(range(n), k)]
        m.add_constr(terms, rng.choice(["<=", ">=", "=="]), rng.randint(-8, 8))
    m.set_objective([(i, rng.randint(-5, 5)) for i in range(n)],
                    constant=rng.randint(-3, 3))
    return m, bounds


def enumerate_optimum(model, bounds):
    """Exhaustive enumeration ground truth for random_bounded_model."""
    import itertools

    best = None
    feasible = False
    for point in itertools.product(*[range(lo, hi + 1) for lo, hi in bounds]):
        if model.check_values(point):
            continue
        feasible = True
        val = model.objective_value(point)
        if best is None or (model.sense == "max" and val > best) or (
            model.sense == "min" and val < best
        ):
            best = val
    return ("optimal", best) if feasible else ("infeasible", None)
