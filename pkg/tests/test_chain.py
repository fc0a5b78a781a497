import math

import numpy as np
import pytest

from fpplab.chain import (
    ChainSpec,
    ChainValidationError,
    DiscreteChainSpec,
    UnreachableTargetError,
    continuization_check,
    continuize,
    lemma1_bound,
    lemma2_bound,
    solve_discrete,
    solve_hitting,
    variance_by_first_step,
)
from fpplab.fpp import fpp_chain_spec
from fpplab.graphs import CapacityError, WeightedGraph, complete_graph, path_graph


def weighted_path(rates):
    names = tuple(f"v{i}" for i in range(len(rates) + 1))
    edges = tuple((i, i + 1) for i in range(len(rates)))
    return WeightedGraph(names, edges, tuple(rates))


def test_single_edge_closed_form():
    for w in (0.25, 1.0, 3.5):
        sol = solve_hitting(fpp_chain_spec(weighted_path([w]), 0, 1))
        assert abs(sol.E_T - 1.0 / w) < 1e-12
        assert abs(sol.var_T - 1.0 / w**2) < 1e-12


def test_path_sums_closed_form():
    rates = [0.5, 2.0, 1.0, 4.0]
    sol = solve_hitting(fpp_chain_spec(weighted_path(rates), 0, len(rates)))
    assert abs(sol.E_T - sum(1.0 / w for w in rates)) < 1e-10
    assert abs(sol.var_T - sum(1.0 / w**2 for w in rates)) < 1e-10
    assert abs(sol.kappa - max(1.0 / w for w in rates)) < 1e-12


def test_triangle_anchor_values():
    # unit K3 from one corner to another: E T = 3/4, var T = 7/16
    sol = solve_hitting(fpp_chain_spec(complete_graph(3), 0, 1))
    assert abs(sol.E_T - 0.75) < 1e-12
    assert abs(sol.var_T - 0.4375) < 1e-12
    assert abs(sol.kappa - 0.75) < 1e-12


def test_occupation_variance_matches_first_step_recursion():
    rng = np.random.default_rng(42)
    for _ in range(25):
        n = int(rng.integers(2, 7))
        from fpplab.graphs import random_gnp_graph

        g = random_gnp_graph(n, 0.6, (0.3, 3.0), rng)
        spec = fpp_chain_spec(g, 0, n - 1)
        sol = solve_hitting(spec)
        mean2, var2 = variance_by_first_step(spec)
        assert abs(sol.E_T - mean2) < 1e-10 * max(1.0, mean2)
        assert abs(sol.var_T - var2) < 1e-10 * max(1.0, var2)


def test_identity_and_monotonicity():
    sol = solve_hitting(fpp_chain_spec(complete_graph(4), 0, 3))
    assert sol.max_identity_error() < 1e-12
    assert sol.monotone_h()
    # visit probabilities of target states account for all the mass
    assert abs(sum(sol.visit_prob[t] for t in sol.targets) - 1.0) < 1e-12


def test_lemma1_and_lemma2_on_triangle():
    sol = solve_hitting(fpp_chain_spec(complete_graph(3), 0, 1))
    rep1 = lemma1_bound(sol)
    assert rep1.holds
    assert abs(rep1.var_over_mean - 7.0 / 12.0) < 1e-12
    rep2 = lemma2_bound(sol, 0.1, 0.1)
    assert rep2.holds
    assert abs(rep2.lhs - 7.0 / 9.0) < 1e-12
    assert abs(rep2.rhs - 1.3) < 1e-12  # 0.2 + 0.1 + (3/4)/(3/4)


def test_lemma2_rejects_nonpositive_grid():
    sol = solve_hitting(fpp_chain_spec(complete_graph(3), 0, 1))
    with pytest.raises(ValueError):
        lemma2_bound(sol, 0.0, 0.1)
    with pytest.raises(ValueError):
        lemma2_bound(sol, 0.1, -1.0)


def test_solve_discrete_geometric():
    # one nonabsorbing state with escape probability p: N ~ Geometric(p)
    for p in (0.2, 0.5, 0.9):
        spec = DiscreteChainSpec(
            initial=0,
            transitions=lambda m, p=p: [(1, p)],
            is_target=lambda m: m == 1,
        )
        mean, var = solve_discrete(spec)
        assert abs(mean - 1.0 / p) < 1e-12
        assert abs(var - (1.0 - p) / p**2) < 1e-12


def test_continuization_geometric_exponential():
    # continuized geometric(p) is Exp(p): mean preserved, variance gains E T
    p = 0.3
    spec = DiscreteChainSpec(0, lambda m: [(1, p)], lambda m: m == 1)
    sol = solve_hitting(continuize(spec))
    assert abs(sol.E_T - 1.0 / p) < 1e-12
    d_mean, d_var = solve_discrete(spec)
    assert abs(sol.var_T - (d_var + d_mean)) < 1e-12


def test_continuization_check_random_chains():
    from fpplab.cli import _random_discrete_chain

    rng = np.random.default_rng(5)
    for _ in range(20):
        rep = continuization_check(_random_discrete_chain(rng, bits=6))
        assert rep.holds
        assert rep.mean_error <= 1e-10 and rep.var_error <= 1e-10


def test_continuization_check_rejects_self_loops():
    spec = DiscreteChainSpec(0, lambda m: [(1, 0.5)], lambda m: m == 1)
    with pytest.raises(ChainValidationError):
        continuization_check(spec)


def test_validation_errors():
    with pytest.raises(ChainValidationError):
        solve_hitting(ChainSpec(0, lambda m: [(1, -1.0)], lambda m: m == 1))
    with pytest.raises(ChainValidationError):
        # transition does not strictly increase the state
        solve_hitting(ChainSpec(1, lambda m: [(1, 1.0)], lambda m: False))
    with pytest.raises(UnreachableTargetError):
        solve_hitting(ChainSpec(0, lambda m: [], lambda m: False))


def test_state_capacity():
    # a chain adding any one of 25 bits exceeds a tiny cap quickly
    spec = ChainSpec(
        initial=0,
        transitions=lambda m: [(m | (1 << b), 1.0) for b in range(25) if not (m >> b) & 1],
        is_target=lambda m: m == (1 << 25) - 1,
        state_cap=1000,
    )
    with pytest.raises(CapacityError):
        solve_hitting(spec)


def test_to_json_dict_round_trips_scalars():
    sol = solve_hitting(fpp_chain_spec(complete_graph(3), 0, 1))
    d = sol.to_json_dict()
    assert d["E_T"] == sol.E_T and d["var_T"] == sol.var_T
    assert str(sol.initial) in d["states"]
