import numpy as np
import pytest

from renofriendly.montecarlo import Estimate, estimate, monte_carlo
from renofriendly.sim import BottleneckSpec, SimConfig, normalized_rates, run

from helpers import RENO, creno, scenario

SC = scenario([RENO, creno()])


def test_estimate_t_interval():
    e = estimate([1.0, 2.0, 3.0])
    # t(0.975, 2) = 4.3027
    assert e.mean == 2.0
    assert e.half_width == pytest.approx(4.302652729911275 * 1 / np.sqrt(3))
    assert estimate([5.0]).half_width == 0.0


def test_estimate_overlap():
    assert Estimate(1.0, 0.1).overlaps(Estimate(1.15, 0.06))
    assert not Estimate(1.0, 0.1).overlaps(Estimate(1.2, 0.05))
    assert Estimate(1.0, 0.1).contains(1.1)


def test_synchronized_run_has_zero_width_interval():
    bn = BottleneckSpec("taildrop", "all")
    res = monte_carlo(SC, bn, seeds=3, duration=20)
    det = normalized_rates(run(SimConfig(SC, bn, measure_time=20)), count=20).mean(axis=0)
    for i, e in enumerate(res.flows):
        assert e.half_width == pytest.approx(0.0, abs=1e-12)
        assert e.mean == pytest.approx(det[i], rel=1e-12)


def test_seeds_derive_from_master_and_reproduce():
    bn = BottleneckSpec("taildrop", "probabilistic")
    a = monte_carlo(SC, bn, seeds=3, duration=20, master_seed=4)
    b = monte_carlo(SC, bn, seeds=3, duration=20, master_seed=4)
    c = monte_carlo(SC, bn, seeds=3, duration=20, master_seed=5)
    assert a.seeds == b.seeds and np.array_equal(a.per_seed, b.per_seed)
    assert a.seeds != c.seeds


def test_explicit_seed_list_and_workers_agree():
    bn = BottleneckSpec("taildrop", "probabilistic")
    a = monte_carlo(SC, bn, seeds=[1, 2, 3], duration=10)
    b = monte_carlo(SC, bn, seeds=[1, 2, 3], duration=10, workers=2)
    assert np.array_equal(a.per_seed, b.per_seed)


def test_group_ratio_and_means():
    bn = BottleneckSpec("taildrop", "probabilistic")
    res = monte_carlo(SC, bn, seeds=4, duration=30)
    g = res.group_means(SC)
    assert len(g) == 2
    assert res.group_ratio(SC, 1, 0).mean == pytest.approx(res.rate_ratio(1, 0).mean)
    # conservation: the two means add up to the link share total
    assert g[0].mean + g[1].mean == pytest.approx(2.0, abs=1e-9)


def test_pie_1v1_near_fair():
    res = monte_carlo(SC, BottleneckSpec("pie"), seeds=4, duration=100)
    for e in res.group_means(SC):
        assert abs(e.mean - 1) < 0.15
