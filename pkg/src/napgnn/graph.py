"""Graph container, CSV ingestion, synthetic generation and preprocessing."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from napgnn._rng import substream

logger = logging.getLogger(__name__)

UNLABELED = -1


@dataclass(frozen=True)
class Graph:
    """Undirected, unweighted attributed graph.

    ``edges`` holds each undirected edge once as a row ``(u, v)`` with
    ``u < v``. ``labels`` uses ``-1`` for unlabeled nodes.
    """

    n: int
    edges: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(edges):
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loops are not allowed")
            if edges.min() < 0 or edges.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            edges = np.sort(edges, axis=1)
            edges = np.unique(edges, axis=0)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        if self.features.shape[0] != self.n or self.labels.shape != (self.n,):
            raise ValueError("features/labels do not match node count")

    @property
    def num_features(self):
        return self.features.shape[1]

    def degrees(self):
        deg = np.zeros(self.n, dtype=np.int64)
        np.add.at(deg, self.edges.ravel(), 1)
        return deg

    def adjacency(self):
        """Symmetric 0/1 CSR matrix with zero diagonal."""
        return edges_to_adjacency(self.edges, self.n)

    def neighbors(self):
        """List of sorted neighbour index arrays, one per node."""
        adj = self.adjacency()
        return [adj.indices[adj.indptr[i]:adj.indptr[i + 1]] for i in range(self.n)]

    def labeled_nodes(self):
        return np.flatnonzero(self.labels != UNLABELED)

    def with_edges(self, edges):
        return replace(self, edges=edges)


@dataclass(frozen=True)
class Splits:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def as_dict(self):
        return {"train": self.train, "val": self.val, "test": self.test}


def edges_to_adjacency(edges, n):
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    data = np.ones(len(rows))
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def adjacency_to_edges(adj):
    upper = sp.triu(sp.csr_matrix(adj), k=1).tocoo()
    return np.column_stack([upper.row, upper.col]).astype(np.int64)


# --------------------------------------------------------------------------
# ingestion

def _read_rows(path, header_prefix):
    if not path.exists():
        raise FileNotFoundError(f"missing dataset file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:len(header_prefix)]] != header_prefix:
            raise ValueError(f"{path.name}: expected header starting with {','.join(header_prefix)}")
        return header, [row for row in reader if row]


def _node_id(text, n, path):
    try:
        value = int(text)
    except ValueError:
        raise ValueError(f"{path.name}: non-integer node id {text!r}") from None
    if not 0 <= value < n:
        raise ValueError(f"{path.name}: node id {value} out of range [0, {n})")
    return value


def load_graph(directory):
    """Load ``edges.csv``, ``features.csv`` and ``labels.csv`` from a directory.

    Features are returned as stored; call :func:`row_normalize` before any
    privacy mechanism. Duplicate edges are dropped with a warning, self-loops
    are rejected.
    """
    directory = Path(directory)
    fpath = directory / "features.csv"
    header, rows = _read_rows(fpath, ["node_id"])
    n = len(rows)
    d = len(header) - 1
    features = np.zeros((n, d))
    seen = np.zeros(n, dtype=bool)
    for row in rows:
        u = _node_id(row[0], n, fpath)
        if len(row) != d + 1:
            raise ValueError(f"{fpath.name}: node {u} has {len(row) - 1} features, expected {d}")
        features[u] = [float(v) for v in row[1:]]
        seen[u] = True
    if not seen.all():
        raise ValueError(f"{fpath.name}: node ids must cover 0..{n - 1}")

    epath = directory / "edges.csv"
    _, rows = _read_rows(epath, ["src", "dst"])
    pairs = set()
    duplicates = 0
    for row in rows:
        u, v = _node_id(row[0], n, epath), _node_id(row[1], n, epath)
        if u == v:
            raise ValueError(f"{epath.name}: self-loop on node {u}")
        key = (min(u, v), max(u, v))
        if key in pairs:
            duplicates += 1
        pairs.add(key)
    if duplicates:
        logger.warning("%s: dropped %d duplicate edges", epath.name, duplicates)
    edges = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)

    lpath = directory / "labels.csv"
    _, rows = _read_rows(lpath, ["node_id", "label"])
    labels = np.full(n, UNLABELED, dtype=np.int64)
    for row in rows:
        u = _node_id(row[0], n, lpath)
        try:
            labels[u] = int(row[1])
        except ValueError:
            raise ValueError(f"{lpath.name}: non-integer label {row[1]!r}") from None
    if np.any(labels < UNLABELED):
        raise ValueError(f"{lpath.name}: negative class id")
    num_classes = int(labels.max()) + 1 if (labels >= 0).any() else 0
    return Graph(n, edges, features, labels, num_classes)


def load_importance(path, n):
    """Read ``importance.csv`` into ``(nodes, scores)``."""
    path = Path(path)
    _, rows = _read_rows(path, ["node_id", "score"])
    nodes = np.array([_node_id(r[0], n, path) for r in rows], dtype=np.int64)
    scores = np.array([float(r[1]) for r in rows])
    if np.any((scores < 0) | (scores > 1)):
        raise ValueError(f"{path.name}: scores must lie in [0, 1]")
    return nodes, scores


def save_graph(g, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with (directory / "edges.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst"])
        w.writerows(g.edges.tolist())
    with (directory / "features.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id"] + [f"f{j}" for j in range(g.num_features)])
        for u in range(g.n):
            w.writerow([u] + [repr(float(x)) for x in g.features[u]])
    with (directory / "labels.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "label"])
        w.writerows([u, int(y)] for u, y in enumerate(g.labels) if y != UNLABELED)


# --------------------------------------------------------------------------
# synthetic data

def generate_power_law(n, attach, d, num_classes, homophily, seed, *,
                       words=4, topic_prob=0.5):
    """Preferential-attachment graph with planted homophilous labels.

    Node ``attach`` links to all seed nodes ``0..attach-1``; every later node
    links to ``attach`` distinct earlier nodes chosen with probability
    proportional to ``degree + 1``. With probability ``homophily`` a target
    is drawn from same-label nodes only. Features are bag-of-words counts:
    each of ``words`` draws hits the node's class topic with probability
    ``topic_prob`` and a uniformly random dimension otherwise.
    """
    if not (n > attach >= 1):
        raise ValueError("need n > attach >= 1")
    if not 0.0 <= homophily <= 1.0:
        raise ValueError("homophily must lie in [0, 1]")
    if num_classes < 1 or d < num_classes:
        raise ValueError("need d >= num_classes >= 1")
    rng = substream(seed, "generate")
    labels = rng.integers(num_classes, size=n)
    weight = np.ones(n)
    weight[attach:] = 0.0
    edges = []
    for u in range(attach, n):
        if u == attach:
            targets = list(range(attach))
        else:
            targets = []
            pool = weight[:u].copy()
            same = labels[:u] == labels[u]
            while len(targets) < attach:
                w = pool * same if rng.random() < homophily else pool
                if w.sum() <= 0:
                    w = pool
                v = int(rng.choice(u, p=w / w.sum()))
                targets.append(v)
                pool[v] = 0.0
        for v in targets:
            edges.append((v, u))
            weight[v] += 1.0
        weight[u] = attach + 1.0

    topic_size = d // num_classes
    features = np.zeros((n, d))
    for u in range(n):
        on_topic = rng.random(words) < topic_prob
        dims = np.where(on_topic,
                        labels[u] * topic_size + rng.integers(topic_size, size=words),
                        rng.integers(d, size=words))
        np.add.at(features[u], dims, 1.0)
    return Graph(n, np.array(edges, dtype=np.int64), features, labels, num_classes)


def edge_homophily(g):
    if len(g.edges) == 0:
        return float("nan")
    return float(np.mean(g.labels[g.edges[:, 0]] == g.labels[g.edges[:, 1]]))


# --------------------------------------------------------------------------
# preprocessing

def row_normalize(features):
    """Scale every nonzero row to unit L1 norm; zero rows stay zero."""
    features = np.asarray(features, dtype=np.float64)
    if np.any(features < 0):
        raise ValueError("row_normalize requires non-negative features")
    norms = features.sum(axis=1, keepdims=True)
    return np.divide(features, norms, out=np.zeros_like(features), where=norms > 0)


def is_row_normalized(features, atol=1e-9):
    norms = np.abs(features).sum(axis=1)
    return bool(np.all((norms <= atol) | (np.abs(norms - 1.0) <= atol)) and np.all(features >= 0))


def normalize_graph(g):
    return replace(g, features=row_normalize(g.features))


def bound_degree(g, max_degree, seed):
    """Drop random incident edges until every degree is at most ``max_degree``.

    Nodes are visited by id; an over-full node keeps a uniform random subset
    of its current incident edges.
    """
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    deg = g.degrees()
    if deg.max(initial=0) <= max_degree:
        return g
    rng = substream(seed, "bound-degree")
    alive = np.ones(len(g.edges), dtype=bool)
    incident = [[] for _ in range(g.n)]
    for i, (u, v) in enumerate(g.edges):
        incident[u].append(i)
        incident[v].append(i)
    for u in range(g.n):
        if deg[u] <= max_degree:
            continue
        current = [i for i in incident[u] if alive[i]]
        drop = rng.choice(len(current), size=len(current) - max_degree, replace=False)
        for j in drop:
            i = current[j]
            alive[i] = False
            a, b = g.edges[i]
            deg[a] -= 1
            deg[b] -= 1
    return g.with_edges(g.edges[alive])


def sym_norm_adj(adj):
    """``D^-1/2 (A + I) D^-1/2`` with ``D`` the self-loop-augmented degree."""
    if isinstance(adj, Graph):
        adj = adj.adjacency()
    adj = sp.csr_matrix(adj, dtype=np.float64)
    a_hat = adj + sp.identity(adj.shape[0], format="csr")
    inv_sqrt = 1.0 / np.sqrt(np.asarray(a_hat.sum(axis=1)).ravel())
    scale = sp.diags(inv_sqrt)
    return (scale @ a_hat @ scale).tocsr()


def split_nodes(g, ratios=(0.5, 0.25, 0.25), seed=0):
    """Stratified random train/val/test split over the labeled nodes.

    Per class every split gets ``floor(ratio * class_size)`` nodes plus at
    most one of the class's leftovers, which are routed to whichever split
    is furthest below its global target.
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    if len(ratios) != 3 or np.any(ratios < 0) or not np.isclose(ratios.sum(), 1.0):
        raise ValueError("ratios must be three non-negative fractions summing to 1")
    rng = substream(seed, "split")
    labeled = g.labeled_nodes()
    labels = g.labels[labeled]
    targets = _largest_remainder(ratios * len(labeled))
    classes = [rng.permutation(labeled[labels == c]) for c in np.unique(labels)]
    for c, members in zip(np.unique(labels), classes):
        if len(members) < 3:
            raise ValueError(f"class {c} has {len(members)} nodes, fewer than the 3 splits")
    floors = [np.floor(ratios * len(m)).astype(np.int64) for m in classes]
    counts = np.sum(floors, axis=0)
    parts = [[], [], []]
    for members, floor in zip(classes, floors):
        share = floor.copy()
        for _ in range(len(members) - share.sum()):
            deficit = np.where(share > floor, -np.inf, targets - counts)
            j = int(np.argmax(deficit))
            share[j] += 1
            counts[j] += 1
        bounds = np.cumsum(share)[:-1]
        for part, chunk in zip(parts, np.split(members, bounds)):
            part.extend(chunk.tolist())
    train, val, test = (np.sort(np.array(p, dtype=np.int64)) for p in parts)
    return Splits(train=train, val=val, test=test)


def _largest_remainder(quotas):
    base = np.floor(quotas).astype(np.int64)
    order = np.argsort(-(quotas - base), kind="stable")
    base[order[:int(round(quotas.sum())) - base.sum()]] += 1
    return base
