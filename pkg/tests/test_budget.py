import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from napgnn import budget
from conftest import make_graph


def test_reusable_ratio_path(path3):
    adj = path3.adjacency()
    ranks = np.array([1, 2, 3])
    # N(1) = {0, 2}, rank sum 1 + 3
    assert budget.reusable_ratio(0, 1, ranks, adj) == 0.25
    assert budget.reusable_ratio(2, 1, ranks, adj) == 0.75
    assert budget.reusable_ratio(1, 0, ranks, adj) == 1.0
    with pytest.raises(ValueError, match="not adjacent"):
        budget.reusable_ratio(0, 2, ranks, adj)


def test_weight_coefficients_path_by_hand(path3):
    # node 0: 1/4 * (3 - 2) + 1; node 2: 3/4 * (3 - 2) + 1;
    # node 1: min(D_max / D_1, 1 * (3 - 1) + 1) = 1.5
    beta = budget.weight_coefficients(path3.adjacency(), np.array([1, 2, 3]), 3)
    assert beta.tolist() == [1.25, 1.5, 1.75]
    lhs = budget.budget_bound_lhs(path3.adjacency(), beta)
    assert lhs.tolist() == [2.75, 6.0, 3.25]


def test_regular_graph_is_tight():
    cycle = make_graph(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    beta = budget.weight_coefficients(cycle.adjacency(), np.arange(1, 5), 2)
    assert beta.tolist() == [1.0] * 4
    assert budget.budget_bound_lhs(cycle.adjacency(), beta).tolist() == [4.0] * 4


def test_star_bounded_and_literal(star3):
    adj = star3.adjacency()
    ranks = np.array([4, 1, 2, 3])
    assert budget.weight_coefficients(adj, ranks, 3).tolist() == [1.0] * 4
    literal = budget.weight_coefficients(adj, ranks, 3, rule="literal")
    assert literal.tolist() == [3.0, 1.0, 1.0, 1.0]
    # centre: 3 * 3 + 3 * 1 = 12 > 2 * D_max
    assert budget.budget_bound_lhs(adj, literal)[0] == 12.0


def test_isolated_nodes_get_dmax():
    g = make_graph(3, [(0, 1)])
    beta = budget.weight_coefficients(g.adjacency(), np.array([1, 2, 3]), 4)
    assert beta[2] == 4.0


def test_degree_over_cap_rejected(star3):
    with pytest.raises(ValueError, match="max_degree"):
        budget.weight_coefficients(star3.adjacency(), np.arange(1, 5), 2)
    with pytest.raises(ValueError):
        budget.weight_coefficients(star3.adjacency(), np.arange(1, 5), 3, rule="other")


def test_allocate():
    plan = budget.allocate(2.0, np.array([1.0, 1.5]), 4)
    assert plan.eps.tolist() == [2.0, 3.0]
    assert plan.sensitivity == 8.0
    assert plan.noise_scale().tolist() == [4.0, 8.0 / 3.0]
    with pytest.raises(ValueError):
        budget.allocate(0.0, np.ones(2), 4)
    assert budget.equal_plan(1.0, 3, 2).beta.tolist() == [1.0, 1.0, 1.0]


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 30), st.floats(0.0, 1.0), st.integers(0, 3), st.integers(0, 10**6))
def test_bound_and_floor_property(n, density, extra_cap, seed):
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < density
    g = make_graph(n, np.column_stack([iu[keep], ju[keep]]))
    cap = max(int(g.degrees().max(initial=0)), 1) + extra_cap
    beta = budget.weight_coefficients(g.adjacency(), rng.permutation(n) + 1, cap)
    assert np.all(beta >= 1.0)
    assert np.all(budget.budget_bound_lhs(g.adjacency(), beta) <= 2 * cap + 1e-9)
