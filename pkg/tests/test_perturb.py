import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from napgnn import budget, graph, perturb
from conftest import make_graph


def test_flip_probability_hand_value():
    assert perturb.flip_probability(np.log(3.0)) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        perturb.flip_probability(0.0)


def test_pair_index_is_bijective():
    n = 7
    i, j = perturb._pair_from_index(np.arange(n * (n - 1) // 2), n)
    assert np.all(i < j)
    assert sorted(zip(i.tolist(), j.tolist())) == [(a, b) for a in range(n) for b in range(a + 1, n)]


def test_sum_aggregate(path3):
    x = np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]])
    assert perturb.sum_aggregate(path3.adjacency(), x).tolist() == [[0.5, 0.5], [1.0, 1.0],
                                                                    [0.5, 0.5]]


def test_laplace_aggregate_checks(path3):
    plan = budget.equal_plan(1.0, 3, 2)
    assert np.array_equal(perturb.laplace_aggregate(path3, plan, 0, noise=False),
                          [[1.0], [2.0], [1.0]])
    with pytest.raises(ValueError, match="row-normalized"):
        perturb.laplace_aggregate(make_graph(3, [(0, 1)], features=np.full((3, 1), 2.0)),
                                  plan, 0)
    with pytest.raises(ValueError, match="max_degree"):
        perturb.laplace_aggregate(path3, budget.equal_plan(1.0, 3, 1), 0)


def test_laplace_aggregate_deterministic_per_seed(path3):
    plan = budget.equal_plan(1.0, 3, 2)
    a = perturb.laplace_aggregate(path3, plan, 5)
    assert np.array_equal(a, perturb.laplace_aggregate(path3, plan, 5))
    assert not np.array_equal(a, perturb.laplace_aggregate(path3, plan, 6))


def test_small_noise_mean_error():
    g = graph.normalize_graph(graph.generate_power_law(8, 2, 3, 2, 0.5, seed=0))
    cap = int(g.degrees().max())
    plan = budget.allocate(100.0, np.ones(g.n), cap)
    rng = np.random.default_rng(0)
    noise = perturb.laplace_noise(plan.noise_scale(), 3, rng, draws=2000)
    assert np.abs(noise.mean(axis=0)).max() < 0.01


def test_edge_randomize_infinite_budget_is_identity(path3):
    noisy = perturb.edge_randomize(path3, np.inf, 0)
    assert noisy.flip == 0.0 and (noisy.adj != path3.adjacency()).nnz == 0


def test_edge_randomize_symmetric_no_self_loops():
    g = graph.generate_power_law(80, 2, 4, 2, 0.5, seed=0)
    adj = perturb.edge_randomize(g, 1.0, 3).adj
    assert (adj != adj.T).nnz == 0
    assert adj.diagonal().sum() == 0


def test_expected_randomized_degree_monte_carlo():
    g = graph.generate_power_law(30, 2, 4, 2, 0.5, seed=1)
    eps_b = 1.0
    flip = perturb.flip_probability(eps_b)
    trials = 3000
    total = sum(perturb.edge_randomize(g, eps_b, s).degrees() for s in range(trials))
    expected = perturb.expected_randomized_degree(g.adjacency(), flip)
    # each degree is a sum of independent bits, so var <= (n - 1) / 4
    tol = 4 * np.sqrt(29 / 4 / trials)
    assert np.abs(total / trials - expected).max() < tol


def test_closed_form_times_sampling_probability_is_degree():
    deg = np.array([1.0, 3.0, 10.0])
    for keep in (0.0, 0.3, 0.9):
        p = perturb.sample_probability(deg, 50, keep)
        assert np.allclose(p * perturb.closed_form_randomized_degree(deg, 50, keep), deg)


def test_no_flip_sampling_is_noop():
    g = graph.generate_power_law(50, 2, 4, 2, 0.5, seed=0)
    noisy = perturb.edge_randomize(g, np.inf, 0)
    assert np.all(perturb.sample_probability(g.degrees(), g.n, 1.0) == 1.0)
    out = perturb.degree_preserving_sample(noisy, g.degrees(), 0)
    assert np.array_equal(out.degrees(), g.degrees())
    assert out.sampled


def test_sampling_probability_at_most_one():
    deg = np.arange(0, 40)
    for keep in (0.0, 0.5, 0.99):
        assert perturb.sample_probability(deg, 40, keep).max() <= 1.0


def test_keep_probability():
    assert perturb.keep_probability(1.0, 7) == pytest.approx(np.e / (np.e + 6))
    assert perturb.keep_probability(0.0, 2) == 0.5
    assert perturb.keep_probability(np.inf, 5) == 1.0


def test_randomized_response_edges():
    labels = np.arange(5)
    assert np.array_equal(perturb.randomized_response(labels, np.inf, 5, 0), labels)
    with pytest.raises(ValueError):
        perturb.randomized_response(labels, -1.0, 5, 0)
    with pytest.raises(ValueError):
        perturb.randomized_response(np.array([5]), 1.0, 5, 0)
    with pytest.raises(ValueError):
        perturb.randomized_response(np.array([0]), 1.0, 1, 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.floats(0.0, 6.0), st.integers(0, 10**6))
def test_randomized_response_range(m, eps, seed):
    labels = np.random.default_rng(seed).integers(m, size=200)
    out = perturb.randomized_response(labels, eps, m, seed)
    assert out.min() >= 0 and out.max() < m


def test_randomized_response_frequencies():
    labels = np.zeros(200_000, dtype=np.int64)
    out = perturb.randomized_response(labels, 1.0, 4, 0)
    p = perturb.keep_probability(1.0, 4)
    sigma = np.sqrt(p * (1 - p) / len(labels))
    assert abs(np.mean(out == 0) - p) < 4 * sigma
    other = np.bincount(out[out != 0], minlength=4)[1:] / np.sum(out != 0)
    assert np.allclose(other, 1 / 3, atol=0.01)
