"""Privacy mechanisms: adaptive Laplace aggregation, edge randomization with
degree-preserving resampling, and randomized response on labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from napgnn._rng import substream
from napgnn.graph import adjacency_to_edges, edges_to_adjacency, is_row_normalized


# --------------------------------------------------------------------------
# Laplace mechanism on the first sum aggregation

def sum_aggregate(adj, features):
    """Exact first-layer sum aggregation ``A X``."""
    return np.asarray(adj @ features)


def laplace_aggregate(g, plan, seed, noise=True):
    """Release ``A X`` with per-node Laplace noise of scale ``2 D_max / eps_u``.

    Noise is independent across nodes and coordinates. ``noise=False`` is a
    debugging switch that returns the exact aggregation.
    """
    if not is_row_normalized(g.features):
        raise ValueError("features must be row-normalized (unit L1 rows) before aggregation")
    if g.degrees().max(initial=0) > plan.max_degree:
        raise ValueError("graph degree exceeds the plan's max_degree")
    if len(plan.eps) != g.n:
        raise ValueError("budget plan does not match node count")
    exact = sum_aggregate(g.adjacency(), g.features)
    if not noise:
        return exact
    rng = substream(seed, "laplace")
    return exact + laplace_noise(plan.noise_scale(), g.num_features, rng)


def laplace_noise(scales, d, rng, draws=None):
    """Laplace noise with row ``u`` at scale ``scales[u]``.

    Shape is ``(n, d)``, or ``(draws, n, d)`` when ``draws`` is given.
    """
    scales = np.asarray(scales, dtype=np.float64)
    shape = (len(scales), d) if draws is None else (draws, len(scales), d)
    return rng.laplace(0.0, 1.0, size=shape) * scales[:, None]


# --------------------------------------------------------------------------
# edge randomization

@dataclass(frozen=True)
class NoisyAdjacency:
    """Randomized adjacency.

    ``flip`` is the resampling probability ``2 / (e^eps_B + 1)`` (each
    upper-triangular bit is replaced by a fair coin with this probability)
    and ``keep = 1 - flip`` is the probability the true bit is retained.
    """

    adj: sp.csr_matrix
    flip: float
    eps_b: float
    sampled: bool = False

    @property
    def keep(self):
        return 1.0 - self.flip

    @property
    def n(self):
        return self.adj.shape[0]

    def degrees(self):
        return np.diff(self.adj.indptr)


def flip_probability(eps_b):
    if not eps_b > 0:
        raise ValueError("eps_B must be positive")
    return 2.0 / (np.exp(eps_b) + 1.0)


def _pair_from_index(t, n):
    """Map linear upper-triangle indices to ``(i, j)`` with ``i < j``."""
    t = np.asarray(t, dtype=np.int64)
    i = n - 2 - np.floor(np.sqrt(-8.0 * t + 4.0 * n * (n - 1) - 7) / 2.0 - 0.5).astype(np.int64)
    j = t + i + 1 - n * (n - 1) // 2 + (n - i) * (n - i - 1) // 2
    return i, j


def edge_randomize(g, eps_b, seed):
    """Keep each adjacency bit w.p. ``keep``, else replace it by a fair coin.

    Sampled exactly without touching all ``n^2`` entries: a true edge
    survives w.p. ``1 - flip/2`` and each non-edge turns on w.p. ``flip/2``.
    """
    flip = 0.0 if np.isinf(eps_b) else flip_probability(eps_b)
    n = g.n
    edges = g.edges
    if flip == 0.0:
        return NoisyAdjacency(g.adjacency(), flip, float(eps_b))
    rng = substream(seed, "edge")
    survive = rng.random(len(edges)) >= flip / 2.0
    total = n * (n - 1) // 2
    count = rng.binomial(total, flip / 2.0)
    picked = rng.choice(total, size=count, replace=False)
    i, j = _pair_from_index(picked, n)
    true_index = edges[:, 0] * n + edges[:, 1]
    fresh = ~np.isin(i * n + j, true_index)
    noisy = np.concatenate([edges[survive], np.column_stack([i[fresh], j[fresh]])])
    return NoisyAdjacency(edges_to_adjacency(noisy, n), flip, float(eps_b))


# --------------------------------------------------------------------------
# degree-preserving resampling

def sample_probability(degree, n, keep):
    """Per-node resampling probability ``2D / (D + N - N s + D s)``."""
    degree = np.asarray(degree, dtype=np.float64)
    denom = degree + n - n * keep + degree * keep
    return np.divide(2.0 * degree, denom, out=np.zeros_like(degree), where=denom > 0)


def edge_keep_probability(p_u, p_v):
    return np.minimum(1.0, np.sqrt(p_u * p_v))


def degree_preserving_sample(noisy, degree, seed):
    """Thin a randomized adjacency so expected degrees track the originals.

    ``degree`` are the pre-randomization degrees. Each noisy edge survives
    with probability ``min(1, sqrt(p_u p_v))``, decided once per edge.
    """
    degree = np.asarray(degree)
    p = sample_probability(degree, noisy.n, noisy.keep)
    edges = adjacency_to_edges(noisy.adj)
    rng = substream(seed, "edge-sample")
    keep = rng.random(len(edges)) < edge_keep_probability(p[edges[:, 0]], p[edges[:, 1]])
    return NoisyAdjacency(edges_to_adjacency(edges[keep], noisy.n), noisy.flip, noisy.eps_b,
                          sampled=True)


def expected_randomized_degree(adj, flip):
    """Exact ``E[D_bar_u]`` for the keep/resample process (self pair excluded)."""
    n = adj.shape[0]
    deg = np.diff(sp.csr_matrix(adj).indptr)
    return deg * (1.0 - flip) + 0.5 * flip * (n - 1)


def closed_form_randomized_degree(deg, n, keep):
    """``0.5 D + 0.5 N - 0.5 N s + 0.5 D s``, the closed form whose product
    with the resampling probability is exactly ``D``."""
    deg = np.asarray(deg, dtype=np.float64)
    return 0.5 * deg + 0.5 * n - 0.5 * n * keep + 0.5 * deg * keep


def expected_sampled_degree(adj, flip):
    """Exact ``E[D_bar'_u]`` after randomization plus resampling."""
    adj = sp.csr_matrix(adj)
    n = adj.shape[0]
    deg = np.diff(adj.indptr)
    root = np.sqrt(sample_probability(deg, n, 1.0 - flip))
    fake = 0.5 * flip * root * (root.sum() - root)
    true = (1.0 - flip) * root * np.asarray(adj @ root).ravel()
    return fake + true


# --------------------------------------------------------------------------
# randomized response

def keep_probability(eps_c, num_classes):
    if np.isinf(eps_c):
        return 1.0
    return float(np.exp(eps_c) / (np.exp(eps_c) + num_classes - 1))


def randomized_response(labels, eps_c, num_classes, seed):
    """Report the true label w.p. ``e^eps / (e^eps + M - 1)``, else a uniform other one."""
    if num_classes < 2:
        raise ValueError("randomized response needs at least two classes")
    if not eps_c >= 0:
        raise ValueError("eps_C must be non-negative")
    labels = np.asarray(labels, dtype=np.int64)
    if np.any((labels < 0) | (labels >= num_classes)):
        raise ValueError("labels out of range")
    rng = substream(seed, "rr")
    change = rng.random(labels.shape) >= keep_probability(eps_c, num_classes)
    shift = rng.integers(1, num_classes, size=labels.shape)
    return np.where(change, (labels + shift) % num_classes, labels)
