"""Importance-grained Laplace budget allocation.

Every node ``k`` with degree below the cap leaves ``D_max - D_k`` units of
unused sensitivity. That slack is shared among ``k``'s neighbours in
proportion to their importance rank, and a node's weight coefficient is the
tightest share it receives::

    r(u, k) = R(u) / sum_{j in N(k)} R(j)
    beta_u  = min( D_max / D_u,  min_{k in N(u)} r(u, k) (D_max - D_k) + 1 )

so that ``D_k beta_k + sum_{i in N(k)} beta_i <= 2 D_max`` for every node,
which is what keeps the per-node budgets ``eps_A * beta_u`` within an
overall ``eps_A`` guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BudgetPlan:
    eps_a: float
    beta: np.ndarray
    eps: np.ndarray
    max_degree: int

    @property
    def sensitivity(self):
        return 2.0 * self.max_degree

    def noise_scale(self):
        """Per-node Laplace scale ``2 D_max / eps_u``."""
        return self.sensitivity / self.eps


def _rank_sums(adj, ranks):
    return np.asarray(adj @ ranks.astype(np.float64)).ravel()


def reusable_ratio(u, k, ranks, adj):
    """Share of node ``k``'s slack granted to its neighbour ``u``."""
    row = adj.indices[adj.indptr[k]:adj.indptr[k + 1]]
    if u not in row:
        raise ValueError(f"node {u} is not adjacent to {k}")
    ranks = np.asarray(ranks)
    return float(ranks[u] / ranks[row].sum())


def weight_coefficients(adj, ranks, max_degree, rule="bounded"):
    """Per-node weight coefficients ``beta``.

    ``rule="bounded"`` caps each node by its own degree (``D_max / D_u``);
    ``rule="literal"`` uses the neighbour's degree ``D_max / D_k`` inside the
    minimum instead. Only the bounded rule guarantees the per-node budget
    bound; the literal one is kept so audits can show where it breaks.
    Isolated nodes get ``beta = D_max``.
    """
    if rule not in ("bounded", "literal"):
        raise ValueError(f"unknown rule {rule!r}")
    adj = adj.tocsr()
    ranks = np.asarray(ranks, dtype=np.float64)
    deg = np.diff(adj.indptr)
    if deg.max(initial=0) > max_degree:
        raise ValueError("graph degree exceeds max_degree; bound degrees first")
    rank_sum = _rank_sums(adj, ranks)

    coo = adj.tocoo()
    u, k = coo.row, coo.col
    share = ranks[u] / rank_sum[k] * (max_degree - deg[k]) + 1.0
    if rule == "literal":
        share = np.minimum(share, max_degree / deg[k])
    beta = np.full(adj.shape[0], np.inf)
    np.minimum.at(beta, u, share)
    if rule == "bounded":
        with np.errstate(divide="ignore"):
            beta = np.minimum(beta, max_degree / deg.astype(np.float64))
    beta[deg == 0] = float(max_degree)
    return beta


def budget_bound_lhs(adj, beta):
    """``D_k beta_k + sum_{i in N(k)} beta_i`` for every node ``k``."""
    adj = adj.tocsr()
    deg = np.diff(adj.indptr)
    return deg * beta + np.asarray(adj @ beta).ravel()


def allocate(eps_a, beta, max_degree):
    if not eps_a > 0:
        raise ValueError("eps_A must be positive")
    beta = np.asarray(beta, dtype=np.float64)
    return BudgetPlan(eps_a=float(eps_a), beta=beta, eps=eps_a * beta, max_degree=int(max_degree))


def equal_plan(eps_a, n, max_degree):
    return allocate(eps_a, np.ones(n), max_degree)
