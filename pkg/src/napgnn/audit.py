"""Empirical checks of the mechanism's guarantees.

Each audit returns an :class:`AuditReport` and is deterministic for a given
seed. ``run_all`` bundles them for the ``audit`` subcommand.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from napgnn import budget, perturb
from napgnn._rng import substream
from napgnn.graph import UNLABELED, Graph, generate_power_law, row_normalize


@dataclass
class AuditReport:
    claim: str
    estimate: float
    bound: float
    passed: bool
    trials: int
    seed: int
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self):
        return _jsonable(asdict(self))


@dataclass(frozen=True)
class NeighborPair:
    """Two graphs on the same node set that differ only at ``node``."""

    g: Graph
    g_prime: Graph
    node: int

    def __post_init__(self):
        if self.g.n != self.g_prime.n:
            raise ValueError("neighbouring graphs must share the node set")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_reports(path, reports):
    payload = {"passed": all(r.passed for r in reports), "reports": [r.to_dict() for r in reports]}
    with Path(path).open("w") as fh:
        json.dump(payload, fh, indent=2)
    return payload


# --------------------------------------------------------------------------
# sensitivity of the first sum aggregation

def _random_graph(rng, n, d, zero_row_prob=0.15):
    density = rng.uniform(0.0, 1.0)
    iu, ju = np.triu_indices(n, k=1)
    mask = rng.random(len(iu)) < density
    edges = np.column_stack([iu[mask], ju[mask]])
    x = rng.random((n, d)) * (rng.random((n, d)) < 0.7)
    x[rng.random(n) < zero_row_prob] = 0.0
    return _unlabeled(n, edges, row_normalize(x))


def _unlabeled(n, edges, x):
    return Graph(n=n, edges=edges, features=x, labels=np.full(n, UNLABELED), num_classes=1)


def remove_node(g, k):
    """Drop every edge at ``k`` and zero its feature row; ids stay aligned."""
    keep = (g.edges[:, 0] != k) & (g.edges[:, 1] != k)
    x = g.features.copy()
    x[k] = 0.0
    return Graph(n=g.n, edges=g.edges[keep], features=x, labels=g.labels,
                 num_classes=g.num_classes)


def replace_features(g, k, row):
    x = g.features.copy()
    x[k] = row
    return Graph(n=g.n, edges=g.edges, features=x, labels=g.labels, num_classes=g.num_classes)


def _replacement_rows(x_k, d, rng):
    """Candidate new rows for node ``k``: zero, disjoint one-hots, random."""
    rows = [np.zeros(d)]
    for j in range(d):
        e = np.zeros(d)
        e[j] = 1.0
        rows.append(e)
    rows.append(row_normalize(rng.random((1, d)))[0])
    return rows


def aggregation_change(g, g_prime):
    """``||A X - A' X'||_1`` over all nodes and coordinates."""
    h = perturb.sum_aggregate(g.adjacency(), g.features)
    h_prime = perturb.sum_aggregate(g_prime.adjacency(), g_prime.features)
    return float(np.abs(h - h_prime).sum())


def brute_force_sensitivity(n_max=8, d=1, trials=500, seed=0):
    """Largest L1 change of ``A X`` over random small graphs, against ``2 D_max``.

    For every graph and every node both neighbouring relations are tried:
    removing the node (edges and features) and replacing its feature row.
    ``D_max`` is the graph's own maximum degree, the tightest valid cap.
    """
    if n_max > 8:
        raise ValueError("n_max must be <= 8")
    start = time.perf_counter()
    rng = substream(seed, "audit-sensitivity")
    worst = {"removal": 0.0, "replacement": 0.0}
    worst_ratio = 0.0
    violations = 0
    for _ in range(trials):
        n = int(rng.integers(1, n_max + 1))
        g = _random_graph(rng, n, d)
        d_max = max(int(g.degrees().max(initial=0)), 1)
        bound = 2.0 * d_max
        for k in range(n):
            deltas = [("removal", aggregation_change(g, remove_node(g, k)))]
            for row in _replacement_rows(g.features[k], d, rng):
                deltas.append(("replacement", aggregation_change(g, replace_features(g, k, row))))
            for reading, delta in deltas:
                worst[reading] = max(worst[reading], delta)
                worst_ratio = max(worst_ratio, delta / bound)
                if delta > bound + 1e-9:
                    violations += 1
    return AuditReport(
        claim="first-layer sensitivity <= 2 D_max",
        estimate=worst_ratio, bound=1.0, passed=violations == 0, trials=trials, seed=seed,
        details={"max_delta_removal": worst["removal"],
                 "max_delta_replacement": worst["replacement"],
                 "max_delta_over_bound": worst_ratio, "violations": violations,
                 "n_max": n_max, "d": d},
        seconds=time.perf_counter() - start)


# --------------------------------------------------------------------------
# budget bound

def budget_bound_sweep(trials=1000, n_max=50, seed=0):
    """Check ``D_k beta_k + sum_{i in N(k)} beta_i <= 2 D_max`` and ``beta >= 1``.

    Random graphs with random rank permutations and a random cap at or above
    the maximum degree. The literal variant of the coefficient rule is
    evaluated on the same graphs and its violations are only reported.
    """
    start = time.perf_counter()
    rng = substream(seed, "audit-budget")
    violations = below_one = literal_violations = 0
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, n_max + 1))
        g = _random_graph(rng, n, 1)
        adj = g.adjacency()
        d_max = max(int(g.degrees().max(initial=0)), 1) + int(rng.integers(0, 3))
        ranks = rng.permutation(n) + 1
        beta = budget.weight_coefficients(adj, ranks, d_max)
        lhs = budget.budget_bound_lhs(adj, beta)
        worst = max(worst, float(lhs.max() / (2.0 * d_max)))
        violations += int(np.sum(lhs > 2.0 * d_max + 1e-9))
        below_one += int(np.sum(beta < 1.0 - 1e-12))
        lit = budget.weight_coefficients(adj, ranks, d_max, rule="literal")
        literal_violations += int(np.sum(budget.budget_bound_lhs(adj, lit) > 2.0 * d_max + 1e-9))
    return AuditReport(
        claim="per-node budget bound", estimate=worst, bound=1.0,
        passed=violations == 0 and below_one == 0, trials=trials, seed=seed,
        details={"violations": violations, "beta_below_one": below_one,
                 "max_lhs_over_bound": worst, "literal_rule_violations": literal_violations},
        seconds=time.perf_counter() - start)


# --------------------------------------------------------------------------
# Monte-Carlo privacy ratio

def star_pair(leaves=3):
    """Star with unit features against the same star with its centre removed."""
    n = leaves + 1
    edges = np.column_stack([np.zeros(leaves, dtype=np.int64), np.arange(1, n)])
    g = _unlabeled(n, edges, np.ones((n, 1)))
    return NeighborPair(g, remove_node(g, 0), 0)


def _log_ratio_stat(x, mu, mu_prime, scale):
    """Privacy loss ``log p(x | mu) - log p(x | mu')`` under Laplace noise."""
    return ((np.abs(x - mu_prime) - np.abs(x - mu)) / scale[:, None]).sum(axis=(-2, -1))


def _hist_eps(a, b, edges, min_hits):
    ca, _ = np.histogram(a, bins=edges)
    cb, _ = np.histogram(b, bins=edges)
    ok = (ca >= min_hits) & (cb >= min_hits)
    if not ok.any():
        raise ValueError("no histogram bin has enough mass on both sides")
    pa, pb = ca[ok] / len(a), cb[ok] / len(b)
    logr = np.abs(np.log(pa / pb))
    sigma = np.sqrt((1 - pa) / (len(a) * pa) + (1 - pb) / (len(b) * pb))
    i = int(np.argmax(logr))
    return float(logr[i]), float(3.0 * sigma[i]), int(ok.sum())


def mc_privacy_ratio(pair, plan, bins=60, trials=1_000_000, seed=0, min_hits=100):
    """Histogram estimate of the privacy loss between two neighbouring graphs.

    Both graphs go through the Laplace aggregation with the same plan. The
    headline estimate histograms the log-likelihood-ratio statistic of the
    full output; any event defined through it is a valid test set, and it
    collects the worst-case outputs into its outer bins. The per-node
    marginal of the altered node is reported as well, with equal-width bins
    over the central +-6b range.
    """
    start = time.perf_counter()
    scale = plan.noise_scale()
    d = pair.g.num_features
    mu = perturb.sum_aggregate(pair.g.adjacency(), pair.g.features)
    mu_prime = perturb.sum_aggregate(pair.g_prime.adjacency(), pair.g_prime.features)
    rng = substream(seed, "audit-privacy")
    out = mu + perturb.laplace_noise(scale, d, rng, draws=trials)
    out_prime = mu_prime + perturb.laplace_noise(scale, d, rng, draws=trials)

    stat = _log_ratio_stat(out, mu, mu_prime, scale)
    stat_prime = _log_ratio_stat(out_prime, mu, mu_prime, scale)
    lo = min(stat.min(), stat_prime.min())
    hi = max(stat.max(), stat_prime.max())
    if hi - lo < 1e-12:
        eps_hat, slack, used = 0.0, 0.0, 1
    else:
        eps_hat, slack, used = _hist_eps(stat, stat_prime, np.linspace(lo, hi, bins + 1), min_hits)

    k = pair.node
    b = scale[k]
    centre = 0.5 * (mu[k, 0] + mu_prime[k, 0])
    marg_edges = np.linspace(centre - 6 * b, centre + 6 * b, bins + 1)
    marg_eps, marg_slack, _ = _hist_eps(out[:, k, 0], out_prime[:, k, 0], marg_edges, min_hits)
    return AuditReport(
        claim="Laplace aggregation is eps_A-DP", estimate=eps_hat, bound=plan.eps_a + slack,
        passed=eps_hat <= plan.eps_a + slack, trials=trials, seed=seed,
        details={"eps_a": plan.eps_a, "slack": slack, "bins_used": used,
                 "marginal_eps": marg_eps, "marginal_slack": marg_slack,
                 "l1_change": float(np.abs(mu - mu_prime).sum())},
        seconds=time.perf_counter() - start)


# --------------------------------------------------------------------------
# unbiasedness

def laplace_unbiasedness(g, plan, trials=100_000, seed=0, chunk=10_000):
    """Per-coordinate Monte-Carlo mean of the noisy aggregation vs ``A X``.

    Tolerance per node is ``4 * sqrt(2) b_u / sqrt(trials)``, four standard
    errors of a Laplace mean with scale ``b_u = 2 D_max / eps_u``.
    """
    exact = perturb.sum_aggregate(g.adjacency(), g.features)
    rng = substream(seed, "audit-laplace-mean")
    scale = plan.noise_scale()
    total = np.zeros_like(exact)
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        total += perturb.laplace_noise(scale, g.num_features, rng, draws=m).sum(axis=0)
        done += m
    err = np.abs(total / trials)
    tol = 4.0 * np.sqrt(2.0) * scale[:, None] / np.sqrt(trials) * np.ones_like(exact)
    return err, tol


def degree_preservation(g, eps_b, trials=10_000, seed=0):
    """Empirical mean degree after randomization + sampling, per node."""
    adj = g.adjacency()
    deg = g.degrees()
    total = np.zeros(g.n)
    for s in substream(seed, "audit-degree").integers(0, 2**63, size=trials):
        noisy = perturb.edge_randomize(g, eps_b, int(s))
        total += perturb.degree_preserving_sample(noisy, deg, int(s)).degrees()
    empirical = total / trials
    expected = perturb.expected_sampled_degree(adj, perturb.flip_probability(eps_b))
    return empirical, expected


def unbiasedness_suite(trials=100_000, degree_trials=10_000, seed=0, degree_tol=0.02):
    """Laplace mean check and the degree-preservation check, as two reports.

    ``degree_tol`` is the allowed relative gap between empirical and exact
    mean sampled degree; 2% needs on the order of 10^4 resamplings.
    """
    start = time.perf_counter()
    rng = substream(seed, "audit-unbiased-fixture")
    g = _random_graph(rng, 6, 3, zero_row_prob=0.0)
    d_max = max(int(g.degrees().max()), 1)
    beta = budget.weight_coefficients(g.adjacency(), rng.permutation(g.n) + 1, d_max)
    plan = budget.allocate(1.0, beta, d_max)
    err, tol = laplace_unbiasedness(g, plan, trials, seed)
    laplace = AuditReport(
        claim="noisy aggregation is unbiased", estimate=float((err / tol).max()), bound=1.0,
        passed=bool(np.all(err <= tol)), trials=trials, seed=seed,
        details={"max_abs_error": float(err.max()), "max_tolerance": float(tol.max())},
        seconds=time.perf_counter() - start)

    start = time.perf_counter()
    fixture = generate_power_law(200, 6, 5, 2, 0.5, seed)
    eps_b = 2.0
    empirical, expected = degree_preservation(fixture, eps_b, degree_trials, seed)
    rel = np.abs(empirical / expected - 1.0)
    deg = fixture.degrees()
    flip = perturb.flip_probability(eps_b)
    ratio = empirical / deg
    closed = perturb.closed_form_randomized_degree(deg, fixture.n, 1.0 - flip)
    exact_randomized = perturb.expected_randomized_degree(fixture.adjacency(), flip)
    degrees = AuditReport(
        claim="sampled degrees match the implemented process", estimate=float(rel.max()),
        bound=degree_tol, passed=bool(rel.max() <= degree_tol), trials=degree_trials, seed=seed,
        details={
            "eps_b": eps_b, "n": fixture.n,
            "ratio_to_original_mean": float(ratio.mean()),
            "ratio_to_original_min": float(ratio.min()),
            "ratio_to_original_max": float(ratio.max()),
            "closed_form_randomized_degree_mean": float(closed.mean()),
            "exact_randomized_degree_mean": float(exact_randomized.mean()),
            "closed_form_discrepancy": (
                "The closed-form randomized degree 0.5(D + N - N s + D s) treats every true "
                "edge as surviving randomization and every non-edge as turning on with "
                "probability (1 - s)/2. Under keep-or-fair-coin resampling a true edge "
                "survives with probability 1 - (1 - s)/2, so the exact mean is "
                "s D + (1 - s)(N - 1)/2. The sampling probability derived from the closed "
                "form therefore does not return E[D'] = D; the ratio above is the outcome."),
        },
        seconds=time.perf_counter() - start)
    return [laplace, degrees]


# --------------------------------------------------------------------------
# randomized response

def rr_transition_audit(num_classes, eps_c, trials=1_000_000, seed=0):
    """Randomized-response frequencies against 3-sigma binomial bounds.

    Two pooled checks: the overall keep rate, and the distribution of the
    offset ``(reported - true) mod M`` among changed labels, which must be
    uniform over ``1..M-1``. Per-cell z-scores of the full transition matrix
    are reported too.
    """
    start = time.perf_counter()
    rng = substream(seed, "audit-rr-labels")
    labels = rng.integers(num_classes, size=trials)
    out = perturb.randomized_response(labels, eps_c, num_classes, seed)
    p = perturb.keep_probability(eps_c, num_classes)
    kept = out == labels
    keep_z = (kept.mean() - p) / np.sqrt(p * (1 - p) / trials)
    checks = [abs(keep_z)]
    offsets = (out - labels)[~kept] % num_classes
    m = len(offsets)
    q = 1.0 / (num_classes - 1)
    counts = np.bincount(offsets, minlength=num_classes)[1:]
    if m and num_classes > 2:
        off_z = (counts / m - q) / np.sqrt(q * (1 - q) / m)
    else:  # with two classes the only possible offset is 1
        off_z = np.zeros(num_classes - 1)
    checks.extend(np.abs(off_z))

    cells = np.zeros((num_classes, num_classes))
    np.add.at(cells, (labels, out), 1)
    row_n = cells.sum(axis=1, keepdims=True)
    expect = np.full((num_classes, num_classes), (1 - p) / (num_classes - 1))
    np.fill_diagonal(expect, p)
    cell_z = (cells / row_n - expect) / np.sqrt(expect * (1 - expect) / row_n)
    worst = float(max(checks))
    return AuditReport(
        claim="randomized response transition frequencies", estimate=worst, bound=3.0,
        passed=worst <= 3.0, trials=trials, seed=seed,
        details={"num_classes": num_classes, "eps_c": eps_c, "keep_probability": p,
                 "keep_rate": float(kept.mean()), "keep_z": float(keep_z),
                 "offset_z": off_z, "max_cell_z": float(np.nanmax(np.abs(cell_z)))},
        seconds=time.perf_counter() - start)


# --------------------------------------------------------------------------

def run_all(seed=0, quick=False):
    """Every audit at full size (or reduced trial counts with ``quick``)."""
    scale = 10 if quick else 1
    reports = [
        brute_force_sensitivity(8, 1, 500, seed),
        budget_bound_sweep(1000 // scale, 50, seed),
    ]
    pair = star_pair()
    plan = budget.allocate(1.0, budget.weight_coefficients(pair.g.adjacency(), np.arange(1, 5), 3), 3)
    reports.append(mc_privacy_ratio(pair, plan, trials=1_000_000 // scale, seed=seed))
    reports.extend(unbiasedness_suite(100_000 // scale, 10_000 // scale, seed,
                                      0.05 if quick else 0.02))
    for m, eps_c in ((2, 0.0), (7, 1.0), (10, 4.0)):
        reports.append(rr_transition_audit(m, eps_c, 1_000_000 // scale, seed))
    return reports
