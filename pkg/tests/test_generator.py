import math
from fractions import Fraction

import numpy as np
import pytest

from ptcoord import (
    GenConfig,
    competition_instances,
    demand_profile,
    desk_grid,
    dumps_instance,
    generate_instance,
    full_grid,
    validate_instance,
)
from ptcoord.generator import MARKET_RANGES, grid_classes


def cfg(seed=1, **kw):
    defaults = dict(horizon=6, n_pds=2, products_per_pd=3, new_per_pd=1,
                    budget_fraction=Fraction("0.4"), seed=seed)
    defaults.update(kw)
    return GenConfig(**defaults)


class TestDemandProfile:
    def test_market_range_respected_before_cutoff(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            profile = demand_profile(2, False, 10, np.random.default_rng(rng.integers(1 << 30)))
            lo, hi = MARKET_RANGES[2]
            nonzero = [d for d in profile if d > 0]
            assert nonzero and all(lo <= d <= hi for d in nonzero)

    def test_current_product_dies_out(self):
        for seed in range(30):
            profile = demand_profile(3, False, 10, np.random.default_rng(seed))
            cutoff = max(t for t, d in enumerate(profile) if d > 0) + 1
            assert math.ceil(0.4 * 10) <= cutoff <= math.ceil(0.7 * 10)
            assert all(d == 0 for d in profile[cutoff:])
            assert all(d > 0 for d in profile[:cutoff])

    def test_new_product_ramps_then_stabilizes(self):
        lo, hi = MARKET_RANGES[2]
        for seed in range(30):
            profile = demand_profile(2, True, 10, np.random.default_rng(seed))
            start = next(t for t, d in enumerate(profile) if d > 0) + 1
            assert math.ceil(0.3 * 10) <= start <= math.ceil(0.5 * 10)
            # ramp periods sit below the market floor, stable periods inside it
            assert profile[start - 1] <= math.ceil(2 * hi / 3)
            assert all(lo <= d <= hi for d in profile[start + 1:])

    def test_deterministic(self):
        a = demand_profile(4, True, 8, np.random.default_rng(42))
        b = demand_profile(4, True, 8, np.random.default_rng(42))
        assert a == b

    def test_unknown_market(self):
        with pytest.raises(ValueError):
            demand_profile(5, False, 4, np.random.default_rng(0))


class TestGenerateInstance:
    def test_validates(self):
        for seed in range(1, 6):
            assert validate_instance(generate_instance(cfg(seed))) == []

    def test_byte_identical_regeneration(self):
        for seed in (1, 7):
            first = dumps_instance(generate_instance(cfg(seed)))
            second = dumps_instance(generate_instance(cfg(seed)))
            assert first == second

    def test_capacity_tracks_demand(self):
        inst = generate_instance(cfg(3))
        for t in range(inst.horizon):
            demand = sum(p.demand[t] for pd in inst.pds for p in pd.products)
            if demand:
                ratio = inst.factory_cap[t] / demand
                assert 0.7 <= ratio <= 1.3
            else:
                assert inst.factory_cap[t] == 0

    def test_parameter_ranges(self):
        inst = generate_instance(cfg(2))
        for t in range(inst.horizon):
            assert 2 <= inst.eng_cap[t] <= 20
        for pd in inst.pds:
            assert 1 <= pd.factory_unit_cost <= 10
            assert 50 <= pd.eng_unit_cost <= 100
            for p in pd.products:
                assert all(c == 1 for c in p.holding_cost)
                assert all(c == 2 for c in p.prod_cost)
                assert all(c == 10 for c in p.backorder_cost)
                assert all(20 <= r <= 30 for r in p.revenue)
                assert len({r for r in p.revenue}) == 1  # constant by default
                if p.is_new:
                    assert p.dev_factory_req >= 1 and p.dev_eng_req >= 1
                else:
                    assert p.dev_factory_req == 0 and p.dev_eng_req == 0

    def test_budget_formula(self):
        inst = generate_instance(cfg(4))
        full = sum(
            sum(inst.factory_cap) * pd.factory_unit_cost
            + sum(inst.eng_cap) * pd.eng_unit_cost
            for pd in inst.pds
        )
        assert inst.total_budget == math.ceil(Fraction(2, 5) * full)

    def test_pi_per_period_flag(self):
        inst = generate_instance(cfg(5, pi_per_period=True))
        assert any(
            len(set(p.revenue)) > 1 for pd in inst.pds for p in pd.products
        )

    def test_adding_a_product_keeps_existing_streams(self):
        small = generate_instance(cfg(6, products_per_pd=2))
        large = generate_instance(cfg(6, products_per_pd=3))
        # same number of divisions: each division's first products coincide
        # in demand (development reqs depend on capacities, which shift)
        assert large.pds[0].products[0].demand == small.pds[0].products[0].demand
        assert large.pds[0].products[1].demand == small.pds[0].products[1].demand

    def test_ensure_capacity_flag(self):
        inst = generate_instance(cfg(8, ensure_capacity_covers_demand=True))
        total_demand = sum(p.demand[t] for pd in inst.pds for p in pd.products
                           for t in range(inst.horizon))
        assert sum(inst.factory_cap) >= total_demand

    def test_config_validation(self):
        with pytest.raises(ValueError):
            cfg(new_per_pd=5)
        with pytest.raises(ValueError):
            cfg(horizon=1)
        with pytest.raises(ValueError):
            cfg(budget_fraction=0)


class TestGrids:
    def test_grid_shape(self):
        classes = grid_classes()
        assert len(classes) == 36
        assert classes[0] == (8, 2, 8, 2)
        configs = full_grid()
        assert len(configs) == 180
        assert configs[0].horizon == 8 and configs[0].n_pds == 2
        assert all(c.budget_fraction == Fraction(2, 5) for c in configs[:10])

    def test_desk_grid(self):
        configs = desk_grid()
        assert len(configs) == 2 * 2 * 3
        assert all(c.products_per_pd == 4 and c.new_per_pd == 2 for c in configs)


class TestCompetitionPool:
    def test_four_classes_share_products(self):
        rows = competition_instances(seed=2, horizon=6)
        assert [meta["J"] for meta, _ in rows] == [6, 3, 2, 1]
        by_id = {}
        for meta, inst in rows:
            assert validate_instance(inst) == []
            assert sum(len(pd.products) for pd in inst.pds) == 12
            assert sum(len(pd.new_products) for pd in inst.pds) == 6
            for pd in inst.pds:
                for p in pd.products:
                    by_id.setdefault(p.id, []).append(p)
        for pid, versions in by_id.items():
            assert len(versions) == 4
            assert len({v.demand for v in versions}) == 1
            assert len({v.revenue for v in versions}) == 1
            assert len({(v.dev_factory_req, v.dev_eng_req) for v in versions}) == 1

    def test_equal_split_per_class(self):
        for meta, inst in competition_instances(seed=1, horizon=6):
            for pd in inst.pds:
                assert len(pd.products) == meta["N_j"]
                assert len(pd.new_products) == meta["P_j"]
