import math

import numpy as np
import pytest

from fpplab.chain import continuize, solve_discrete, solve_hitting
from fpplab.graphs import path_graph
from fpplab.growth import (
    CoverageConfig,
    GrowthConfig,
    RateMonotonicityError,
    coverage_chain_spec,
    coverage_simulate,
    growth_sample,
    growth_simulate,
    neighbor_count_rate,
    prop1_check,
    prop3_check,
    site_weighted_rate,
    validate_rate_monotone,
)


def test_rate_builtins_respect_bounds():
    rng = np.random.default_rng(0)
    fn, lo, hi = site_weighted_rate(0.5, 2.0)
    for v in ((0, 0), (3, -2), (-7, 5)):
        r = fn({(0, 0)}, v)
        assert lo <= r <= hi
    validate_rate_monotone(fn, rng)
    fn, lo, hi = neighbor_count_rate(0.7)
    assert fn({(0, 0)}, (1, 0)) == 0.7
    assert fn({(0, 0), (1, 1), (0, 2)}, (0, 1)) == pytest.approx(2.1)
    validate_rate_monotone(fn, np.random.default_rng(1))


def test_validate_rate_monotone_catches_decreasing():
    def bad_rate(S, v):
        return 1.0 / len(S)  # shrinks as the cluster grows

    with pytest.raises(RateMonotonicityError):
        validate_rate_monotone(bad_rate, np.random.default_rng(2))


def test_growth_config_validation():
    with pytest.raises(ValueError):
        GrowthConfig.builtin(3, [[0, 0]], "constant", c=1.0)  # origin in target
    with pytest.raises(ValueError):
        GrowthConfig.builtin(2, [[5, 0]], "constant", c=1.0)  # outside the box
    with pytest.raises(ValueError):
        GrowthConfig.builtin(3, [[1, 0]], "no-such-rate")


def test_growth_first_jump_law():
    # target adjacent to the origin, constant rate c: the frontier has 4
    # sites, so the chance the first jump hits the target is 1/4 and the
    # jump time is Exp(4c)
    cfg = GrowthConfig.builtin(4, [[1, 0], [-1, 0], [0, 1], [0, -1]], "constant", c=2.0)
    rng = np.random.default_rng(3)
    ts = np.array([growth_sample(cfg, rng).T for _ in range(4000)])
    assert abs(ts.mean() - 1.0 / 8.0) < 4.0 * ts.std(ddof=1) / math.sqrt(len(ts))


def test_growth_boundary_invalidates_and_resample_recovers():
    cfg = GrowthConfig.builtin(1, [[0, 1]], "constant", c=1.0)
    rng = np.random.default_rng(4)
    saw_invalid = False
    for _ in range(200):
        run = growth_simulate(cfg, rng)
        saw_invalid = saw_invalid or not run.valid
    assert saw_invalid  # radius-1 box is touched all the time
    run = growth_sample(cfg, np.random.default_rng(5))
    assert run.valid


def test_prop1_check_passes():
    cfg = GrowthConfig.builtin(5, [[2, 0], [-2, 0], [0, 2], [0, -2]],
                               "site_weighted", c_lo=0.5, c_hi=2.0)
    rep = prop1_check(cfg, 2000, seed=6)
    assert rep.holds
    with pytest.raises(ValueError):
        prop1_check(cfg, 10, seed=0)


def test_coverage_config_allows_disconnected():
    cfg = CoverageConfig(n=3, edges=())
    assert cfg.closed_neighborhoods() == [1, 2, 4]
    with pytest.raises(ValueError):
        CoverageConfig(n=2, edges=((0, 2),))


def test_coverage_path3_exact():
    # P3: drawing the middle vertex covers everything; ends cover two
    cfg = CoverageConfig.from_graph(path_graph(3))
    mean, var = solve_discrete(coverage_chain_spec(cfg))
    assert abs(mean - 2.0) < 1e-12
    assert abs(var - 1.0) < 1e-12
    rng = np.random.default_rng(7)
    draws = np.array([coverage_simulate(cfg, rng) for _ in range(20000)])
    se = draws.std(ddof=1) / math.sqrt(len(draws))
    assert abs(draws.mean() - mean) < 4.0 * se


def test_coverage_edgeless_is_coupon_collector():
    cfg = CoverageConfig(n=3)
    mean, _ = solve_discrete(coverage_chain_spec(cfg))
    assert abs(mean - 3.0 * (1 + 1 / 2 + 1 / 3)) < 1e-12


def test_coverage_single_vertex():
    cfg = CoverageConfig(n=1)
    assert coverage_simulate(cfg, np.random.default_rng(0)) == 1


def test_continuized_coverage_mean_matches_discrete():
    cfg = CoverageConfig.from_graph(path_graph(4))
    spec = coverage_chain_spec(cfg)
    d_mean, _ = solve_discrete(spec)
    c = solve_hitting(continuize(spec))
    # jump rates equal the move probabilities, so the mean holding time in a
    # state equals the mean geometric step count there
    assert abs(c.E_T - d_mean) < 1e-10


def test_prop3_check_passes():
    cfg = CoverageConfig.from_graph(path_graph(5))
    rep = prop3_check(cfg, 3000, seed=8)
    assert rep.holds
