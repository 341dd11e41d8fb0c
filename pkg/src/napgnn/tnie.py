"""Topology-based node importance estimation (TNIE).

A score network maps each feature row to an ``r``-dimensional code, the
codes are propagated ``T`` times over the symmetric-normalised adjacency
(no self loops), and a learnable shifted log-degree rescales the summed
code before a logistic squashing::

    s(u) = sigmoid((lam * log(D_u + alpha) + phi) * sum_j f_u^T[j])

The model is fit by full-batch Adam on the mean squared error against known
importance scores of a node subset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from napgnn._optim import Adam, TrainingDivergedError
from napgnn._rng import substream


@dataclass
class TNIEConfig:
    hidden: int | None = 64
    out_dim: int = 16
    depth: int = 1
    alpha: float = 1.0
    epochs: int = 300
    lr: float = 1e-2
    init_lam: float = 1.0
    init_phi: float = 0.0
    init_code: float = 1.0
    init_scale: float = 0.1


@dataclass
class TNIEModel:
    params: dict
    alpha: float = 1.0
    depth: int = 2

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")

    @property
    def out_dim(self):
        return self.params["W2" if "W2" in self.params else "W1"].shape[1]

    def copy(self):
        return TNIEModel({k: v.copy() for k, v in self.params.items()}, self.alpha, self.depth)


@dataclass
class ImportanceState:
    scores: np.ndarray
    ranks: np.ndarray
    model: TNIEModel | None = None
    loss_trace: list = field(default_factory=list)


def init_model(num_features, cfg=TNIEConfig(), seed=0):
    rng = substream(seed, "tnie-init")
    params = {}
    if cfg.hidden:
        params["W1"] = rng.normal(0.0, cfg.init_scale * np.sqrt(2.0 / num_features),
                                  (num_features, cfg.hidden))
        params["b1"] = np.zeros(cfg.hidden)
        params["W2"] = rng.normal(0.0, cfg.init_scale * np.sqrt(1.0 / cfg.hidden),
                                  (cfg.hidden, cfg.out_dim))
        params["b2"] = np.full(cfg.out_dim, cfg.init_code / cfg.out_dim)
    else:
        params["W1"] = rng.normal(0.0, cfg.init_scale * np.sqrt(1.0 / num_features),
                                  (num_features, cfg.out_dim))
        params["b1"] = np.full(cfg.out_dim, cfg.init_code / cfg.out_dim)
    params["lam"] = np.array([cfg.init_lam], dtype=np.float64)
    params["phi"] = np.array([cfg.init_phi], dtype=np.float64)
    return TNIEModel(params, alpha=cfg.alpha, depth=cfg.depth)


def propagation_matrix(adj):
    """``D^-1/2 A D^-1/2`` without self loops; isolated rows are zero."""
    adj = sp.csr_matrix(adj, dtype=np.float64)
    deg = np.asarray(adj.sum(axis=1)).ravel()
    inv = np.zeros_like(deg)
    np.divide(1.0, np.sqrt(deg), out=inv, where=deg > 0)
    scale = sp.diags(inv)
    return (scale @ adj @ scale).tocsr()


def score_computing(x, model):
    """Score network forward pass; ``x`` is a row or an ``n x d`` matrix."""
    return _score_forward(np.asarray(x, dtype=np.float64), model.params)[0]


def _score_forward(x, p):
    if x.shape[-1] != p["W1"].shape[0]:
        raise ValueError(f"feature dimension {x.shape[-1]} != model input {p['W1'].shape[0]}")
    if "W2" not in p:
        return x @ p["W1"] + p["b1"], None
    pre = x @ p["W1"] + p["b1"]
    hidden = np.maximum(pre, 0.0)
    return hidden @ p["W2"] + p["b2"], (pre, hidden)


def propagate_scores(f0, adj, depth):
    """Apply the neighbour-only normalised aggregation ``depth`` times."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    f = np.asarray(f0, dtype=np.float64)
    if depth == 0:
        return f.copy()
    prop = propagation_matrix(adj)
    for _ in range(depth):
        f = prop @ f
    return f


def shifting_degree(degree, model):
    return model.params["lam"][0] * np.log(np.asarray(degree, dtype=np.float64) + model.alpha) \
        + model.params["phi"][0]


def estimate_score(f_t, degree, model):
    """Logistic importance score from a propagated code and a node degree."""
    f_t = np.asarray(f_t, dtype=np.float64)
    return expit(shifting_degree(degree, model) * f_t.sum(axis=-1))


def predict(model, features, adj):
    degree = np.asarray(sp.csr_matrix(adj).sum(axis=1)).ravel()
    f_t = propagate_scores(score_computing(features, model), adj, model.depth)
    return estimate_score(f_t, degree, model)


def loss_and_grads(model, features, adj, nodes, targets, prop=None):
    """MSE loss on ``nodes`` and its gradient for every parameter."""
    p = model.params
    if prop is None:
        prop = propagation_matrix(adj)
    degree = np.asarray(sp.csr_matrix(adj).sum(axis=1)).ravel()
    log_deg = np.log(degree + model.alpha)

    f0, cache = _score_forward(features, p)
    f = f0
    for _ in range(model.depth):
        f = prop @ f
    summed = f.sum(axis=1)
    shift = p["lam"][0] * log_deg + p["phi"][0]
    s = expit(shift * summed)

    err = s[nodes] - targets
    loss = float(np.mean(err ** 2))

    dz = np.zeros(len(s))
    np.add.at(dz, nodes, 2.0 * err / len(nodes))
    dz *= s * (1.0 - s)
    grads = {
        "lam": np.array([np.sum(dz * summed * log_deg)]),
        "phi": np.array([np.sum(dz * summed)]),
    }
    df = np.repeat((dz * shift)[:, None], f.shape[1], axis=1)
    for _ in range(model.depth):
        df = prop.T @ df
    if "W2" in p:
        pre, hidden = cache
        grads["W2"] = hidden.T @ df
        grads["b2"] = df.sum(axis=0)
        dh = (df @ p["W2"].T) * (pre > 0)
        grads["W1"] = features.T @ dh
        grads["b1"] = dh.sum(axis=0)
    else:
        grads["W1"] = features.T @ df
        grads["b1"] = df.sum(axis=0)
    return loss, grads


def train_tnie(features, adj, nodes, targets, cfg=TNIEConfig(), seed=0, model=None):
    """Fit TNIE on the known scores ``targets`` of ``nodes``.

    Returns the trained model and the per-epoch loss trace.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.float64)
    if len(nodes) == 0:
        raise ValueError("TNIE needs at least one node with known importance")
    if np.any((targets < 0) | (targets > 1)):
        raise ValueError("importance targets must lie in [0, 1]")
    if model is None:
        model = init_model(features.shape[1], cfg, seed)
    prop = propagation_matrix(adj)
    opt = Adam(model.params, lr=cfg.lr)
    trace = []
    for epoch in range(cfg.epochs):
        loss, grads = loss_and_grads(model, features, adj, nodes, targets, prop)
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"TNIE loss became {loss} at epoch {epoch}; "
                f"lam={model.params['lam'][0]:.3g} phi={model.params['phi'][0]:.3g}")
        trace.append(loss)
        opt.step(grads)
    trace.append(loss_and_grads(model, features, adj, nodes, targets, prop)[0])
    return model, trace


def rank_importance(scores):
    """Ranks ``1..n``; ``n`` is the highest score, ties go to the lower id first."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("importance scores must be finite")
    order = np.lexsort((np.arange(len(scores)), scores))
    ranks = np.empty(len(scores), dtype=np.int64)
    ranks[order] = np.arange(1, len(scores) + 1)
    return ranks


# --------------------------------------------------------------------------
# ground-truth importance providers

def _minmax(x):
    x = np.asarray(x, dtype=np.float64)
    span = x.max() - x.min()
    if span == 0:
        return np.full_like(x, 0.5)
    return (x - x.min()) / span


def pagerank_importance(g, damping=0.85, log_scale=True):
    """PageRank scores min-max scaled to [0, 1].

    With ``log_scale`` the scaling is applied to log-PageRank; raw PageRank
    on a power-law graph puts almost every target next to zero.
    """
    nxg = nx.Graph()
    nxg.add_nodes_from(range(g.n))
    nxg.add_edges_from(g.edges.tolist())
    pr = nx.pagerank(nxg, alpha=damping, tol=1e-10)
    pr = np.array([pr[u] for u in range(g.n)])
    return _minmax(np.log(pr) if log_scale else pr)


def degree_importance(g):
    return _minmax(g.degrees())


def estimate_importance(g, known_nodes, known_scores, cfg=TNIEConfig(), seed=0):
    """Train TNIE on the known nodes and rank every node.

    Known nodes keep their given score; the rest get the TNIE estimate.

    Training targets are lifted to [0.5, 1]. With a positive code every logit
    is positive, so targets near zero can only be fit by flipping the code's
    sign, which reverses the degree ordering. Predictions are mapped back.
    """
    adj = g.adjacency()
    known_scores = np.asarray(known_scores, dtype=np.float64)
    model, trace = train_tnie(g.features, adj, known_nodes, 0.5 + 0.5 * known_scores, cfg, seed)
    scores = np.clip(2.0 * predict(model, g.features, adj) - 1.0, 0.0, 1.0)
    scores[known_nodes] = known_scores
    return ImportanceState(scores=scores, ranks=rank_importance(scores), model=model,
                           loss_trace=trace)
