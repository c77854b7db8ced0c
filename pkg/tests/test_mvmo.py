import math

import numpy as np
import pytest

from dentreg.errors import FitnessError, InvalidConfig
from dentreg.mvmo import OptimizerConfig, SearchSpace, best_of_restarts, mapping_h, optimize

BOX = SearchSpace([-150] * 7, [150] * 7)


def sphere(x):
    return float(np.sum(np.asarray(x) ** 2))


def scalar_h(xbar, s1, s2, x):
    def h(u):
        return xbar * (1 - math.exp(-u * s1)) + (1 - xbar) * math.exp(-(1 - u) * s2)
    return h(x) + (1 - h(1) + h(0)) * x - h(0)


def test_mapping_identity_when_unshaped(rng):
    x = rng.random(20)
    np.testing.assert_allclose(mapping_h(rng.random(20), 0.0, 0.0, x), x, atol=1e-15)


@pytest.mark.parametrize("s", [0.5, 3.0, 40.0])
def test_mapping_symmetric_fixed_point(s):
    assert mapping_h(0.5, s, s, 0.5) == pytest.approx(0.5, abs=1e-15)


def test_mapping_scalar_oracle():
    assert mapping_h(0.3, 10.0, 10.0, 0.5) == pytest.approx(scalar_h(0.3, 10.0, 10.0, 0.5), abs=1e-14)


def test_mapping_stays_in_unit_interval(rng):
    v = mapping_h(rng.random(1000), rng.uniform(0, 50, 1000), rng.uniform(0, 50, 1000), rng.random(1000))
    assert v.min() >= 0 and v.max() <= 1


def test_sphere_converges():
    res = optimize(sphere, BOX, OptimizerConfig(seed=3))
    assert res.best_value < 1e-2


def test_best_so_far_is_monotone():
    res = optimize(sphere, BOX, OptimizerConfig(generations=200, seed=1))
    assert np.all(np.diff(res.trace) <= 0)
    assert res.trace[-1] == res.best_value


def test_same_seed_is_bit_identical():
    cfg = OptimizerConfig(generations=150, seed=9)
    a, b = optimize(sphere, BOX, cfg), optimize(sphere, BOX, cfg)
    assert a.best_value == b.best_value and a.evaluations_used == b.evaluations_used
    np.testing.assert_array_equal(a.best_point, b.best_point)
    np.testing.assert_array_equal(a.trace, b.trace)


def test_single_generation_budget():
    res = optimize(sphere, BOX, OptimizerConfig(generations=1, particles=1, local_search_probability=0))
    assert res.evaluations_used == 1
    for seed in range(30):
        res = optimize(sphere, BOX, OptimizerConfig(generations=1, particles=1, seed=seed))
        assert res.evaluations_used == 1 + res.local_search_evaluations
        assert res.local_search_evaluations <= 2 * BOX.dim


def test_budget_accounting_over_a_run():
    cfg = OptimizerConfig(generations=50, particles=5)
    res = optimize(sphere, BOX, cfg)
    assert res.evaluations_used == 50 * 5 + res.local_search_evaluations


def test_infinite_and_nan_fitness_are_tolerated():
    def f(x):
        if x[0] > 0:
            return math.inf
        if x[1] > 100:
            return math.nan
        return sphere(x)
    res = optimize(f, BOX, OptimizerConfig(generations=100))
    assert math.isfinite(res.best_value) and res.best_point[0] <= 0


def test_fitness_exception_is_wrapped():
    def f(x):
        raise RuntimeError("boom")
    with pytest.raises(FitnessError) as err:
        optimize(f, BOX, OptimizerConfig(generations=2))
    assert len(err.value.point) == 7


def test_config_validation():
    with pytest.raises(InvalidConfig):
        optimize(sphere, BOX, OptimizerConfig(archive_size=1))
    with pytest.raises(InvalidConfig):
        optimize(sphere, BOX, OptimizerConfig(m_initial=8))
    with pytest.raises(InvalidConfig):
        optimize(sphere, BOX, OptimizerConfig(local_search_min_step=0.0))
    with pytest.raises(InvalidConfig):
        SearchSpace([0, 1], [1, 1])


def test_restarts_keep_the_best_run():
    cfg = OptimizerConfig(generations=60, seed=20)
    singles = [optimize(sphere, BOX, OptimizerConfig(generations=60, seed=20 + k)) for k in range(3)]
    best = best_of_restarts(sphere, BOX, cfg, 3)
    assert best.best_value == min(r.best_value for r in singles)
    assert [s for s, _ in best.extra["runs"]] == [20, 21, 22]
    assert best.extra["total_evaluations"] == sum(r.evaluations_used for r in singles)


def test_one_restart_equals_optimize():
    cfg = OptimizerConfig(generations=40, seed=5)
    a, b = best_of_restarts(sphere, BOX, cfg, 1), optimize(sphere, BOX, cfg)
    assert a.best_value == b.best_value
    np.testing.assert_array_equal(a.best_point, b.best_point)


def test_restart_ties_go_to_lower_seed():
    res = best_of_restarts(lambda x: 1.0, BOX, OptimizerConfig(generations=3, seed=4), 3)
    assert res.seed == 4
