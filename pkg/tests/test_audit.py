import json

import numpy as np
import pytest

from napgnn import audit, budget
from conftest import make_graph


def test_path_removal_hits_the_bound(path3):
    # middle node: its own aggregate (2) plus one unit to each neighbour
    delta = audit.aggregation_change(path3, audit.remove_node(path3, 1))
    assert delta == 4.0 == 2 * 2


def test_edgeless_graph_has_zero_change():
    g = make_graph(3, [])
    assert audit.aggregation_change(g, audit.remove_node(g, 0)) == 0.0
    assert audit.aggregation_change(g, audit.replace_features(g, 0, np.zeros(1))) == 0.0


def test_replacement_change_is_degree_times_row_distance(star3):
    g = make_graph(4, star3.edges, features=np.tile([1.0, 0.0], (4, 1)))
    delta = audit.aggregation_change(g, audit.replace_features(g, 0, np.array([0.0, 1.0])))
    assert delta == 3 * 2.0


def test_brute_force_small_run():
    report = audit.brute_force_sensitivity(6, 2, 60, seed=1)
    assert report.passed and report.details["violations"] == 0
    assert report.details["max_delta_removal"] > 0
    with pytest.raises(ValueError):
        audit.brute_force_sensitivity(9, 1, 1)


def test_budget_sweep_reports_literal_violations():
    report = audit.budget_bound_sweep(100, 20, seed=0)
    assert report.passed
    assert report.details["literal_rule_violations"] > 0


def test_privacy_ratio_identical_pair_is_zero(star3):
    pair = audit.NeighborPair(star3, star3, 0)
    report = audit.mc_privacy_ratio(pair, budget.equal_plan(1.0, 4, 3), trials=20_000)
    assert report.estimate == 0.0 and report.passed


def test_privacy_ratio_scales_with_epsilon():
    pair = audit.star_pair()
    one = audit.mc_privacy_ratio(pair, budget.equal_plan(1.0, 4, 3), trials=200_000)
    two = audit.mc_privacy_ratio(pair, budget.equal_plan(2.0, 4, 3), trials=200_000)
    assert one.passed and two.passed
    assert 1.6 < two.estimate / one.estimate < 2.4


def test_star_pair_is_worst_case():
    pair = audit.star_pair()
    assert audit.aggregation_change(pair.g, pair.g_prime) == 6.0


def test_neighbor_pair_requires_aligned_nodes(star3, path3):
    with pytest.raises(ValueError):
        audit.NeighborPair(star3, path3, 0)


def test_unbiasedness_suite_small():
    # 400 resamplings: a degree-6 node has a standard error near 2%
    laplace, degrees = audit.unbiasedness_suite(20_000, 400, seed=0, degree_tol=0.1)
    assert laplace.passed and degrees.passed
    assert "closed_form_discrepancy" in degrees.details


@pytest.mark.parametrize("m, eps", [(2, 0.0), (5, 1.0)])
def test_rr_audit(m, eps):
    report = audit.rr_transition_audit(m, eps, trials=100_000, seed=0)
    assert report.passed
    assert report.details["keep_probability"] == pytest.approx(np.exp(eps) / (np.exp(eps) + m - 1))


def test_write_reports(tmp_path):
    reports = [audit.rr_transition_audit(3, 1.0, 10_000, 0)]
    audit.write_reports(tmp_path / "audit_report.json", reports)
    data = json.loads((tmp_path / "audit_report.json").read_text())
    assert data["passed"] is True
    assert data["reports"][0]["claim"].startswith("randomized response")
    assert {"estimate", "bound", "passed", "trials", "seed"} <= set(data["reports"][0])


def test_audits_deterministic_per_seed():
    a = audit.budget_bound_sweep(30, 10, seed=4).to_dict()
    b = audit.budget_bound_sweep(30, 10, seed=4).to_dict()
    a.pop("seconds"), b.pop("seconds")
    assert a == b
