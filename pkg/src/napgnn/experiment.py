"""End-to-end private training runs, ablations and parameter sweeps."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from napgnn import amp, budget, classifier, graph, perturb, tnie
from napgnn._rng import substream

logger = logging.getLogger(__name__)

SPLIT_PRESETS = {
    "even": (1.0, 1.0, 1.0),
    "2-1-1": (2.0, 1.0, 1.0),
    # most of the budget on edges: below e_B ~ 5 a 1000-node graph is mostly fake edges
    "edge-heavy": (1.0, 16.0, 5.0),
}


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names which one."""

    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {exc}")
        self.stage = stage


@dataclass
class SyntheticSpec:
    n: int = 1000
    attach: int = 3
    d: int = 128
    num_classes: int = 5
    homophily: float = 0.8
    seed: int = 0
    words: int = 4
    topic_prob: float = 0.5


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    eps_total: float = 12.0
    split: str = "edge-heavy"
    max_degree: int = 16
    tnie_depth: int = 1
    hops: int = 4
    tau: float = 0.1
    importance: str = "tnie"
    budget_mode: str = "adaptive"
    edge_sample: bool = True
    mode: str = "nap"
    noise: bool = True
    seeds: tuple = (0,)
    node_ratios: tuple = (0.5, 0.25, 0.25)
    tnie_epochs: int = 300
    head: classifier.TrainConfig = field(default_factory=classifier.TrainConfig)

    def __post_init__(self):
        if self.importance not in ("tnie", "degree", "file"):
            raise ValueError(f"unknown importance mode {self.importance!r}")
        if self.budget_mode not in ("adaptive", "equal"):
            raise ValueError(f"unknown budget mode {self.budget_mode!r}")
        if self.mode not in ("nap", "mlp"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.eps_total > 0:
            raise ValueError("eps_total must be positive")
        if self.max_degree < 1 or self.hops < 0 or self.tau < 0 or self.tnie_depth < 0:
            raise ValueError("max_degree >= 1, hops >= 0, tau >= 0 and tnie depth >= 0 required")
        split_budget(self.eps_total, self.split)

    def budgets(self):
        return split_budget(self.eps_total, self.split)

    def to_dict(self):
        out = asdict(self)
        out["seeds"] = list(self.seeds)
        out["node_ratios"] = list(self.node_ratios)
        return out

    def config_hash(self):
        payload = self.to_dict()
        payload.pop("seeds")
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def split_budget(eps_total, split):
    """Divide ``eps_total`` into ``(eps_A, eps_B, eps_C)`` that sum exactly to it.

    ``split`` is a preset name or comma-separated positive weights.
    """
    if split in SPLIT_PRESETS:
        weights = SPLIT_PRESETS[split]
    else:
        try:
            weights = tuple(float(w) for w in str(split).split(","))
        except ValueError:
            raise ValueError(f"bad budget split {split!r}") from None
    if len(weights) != 3 or min(weights) <= 0:
        raise ValueError("budget split needs three positive weights")
    total = sum(weights)
    # on the ulp(eps_total) grid every partial sum below is exact
    q = math.ulp(eps_total)
    eps_a = round(eps_total * weights[0] / total / q) * q
    eps_b = round(eps_total * weights[1] / total / q) * q
    eps_c = eps_total - eps_a - eps_b
    if eps_a <= 0 or eps_b <= 0 or eps_c <= 0 or eps_a + eps_b + eps_c != eps_total:
        raise ValueError(f"cannot split eps_total={eps_total} exactly as {split}")
    return eps_a, eps_b, eps_c


# --------------------------------------------------------------------------

def load_dataset(cfg):
    if cfg.dataset:
        return graph.load_graph(cfg.dataset)
    s = cfg.synthetic
    return graph.generate_power_law(s.n, s.attach, s.d, s.num_classes, s.homophily, s.seed,
                                    words=s.words, topic_prob=s.topic_prob)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def importance_ranks(g, train, cfg, seed):
    """Ranks from TNIE (trained on ``train``), from a score file, or from degree."""
    if cfg.importance == "degree":
        return tnie.ImportanceState(scores=g.degrees().astype(float),
                                    ranks=tnie.rank_importance(g.degrees()))
    if cfg.importance == "file":
        path = Path(cfg.dataset or ".") / "importance.csv"
        nodes, scores = graph.load_importance(path, g.n)
    else:
        nodes = train
        scores = tnie.pagerank_importance(g)[train]
    tcfg = tnie.TNIEConfig(depth=cfg.tnie_depth, epochs=cfg.tnie_epochs)
    return tnie.estimate_importance(g, nodes, scores, tcfg, seed)


def run_single(g, cfg, seed, emit=None):
    """One full private run on an already loaded (raw) graph."""
    eps_a, eps_b, eps_c = cfg.budgets()
    g = _stage("preprocess", graph.normalize_graph, g)
    g = _stage("preprocess", graph.bound_degree, g, cfg.max_degree, seed)
    splits = _stage("split", graph.split_nodes, g, cfg.node_ratios, seed)
    known = np.concatenate([splits.train, splits.val])
    labels = g.labels

    noisy_labels = np.full(g.n, graph.UNLABELED, dtype=np.int64)
    if cfg.noise:
        noisy_labels[known] = _stage("label-perturb", perturb.randomized_response,
                                     labels[known], eps_c, g.num_classes, seed)
    else:
        noisy_labels[known] = labels[known]

    extra = {}
    if cfg.mode == "mlp":
        h = g.features
        if cfg.noise:
            rng = substream(seed, "laplace")
            h = h + perturb.laplace_noise(np.full(g.n, 2.0 / (eps_a + eps_b)), g.num_features, rng)
    else:
        state = _stage("importance", importance_ranks, g, splits.train, cfg, seed)
        if cfg.budget_mode == "adaptive":
            beta = _stage("budget", budget.weight_coefficients, g.adjacency(), state.ranks,
                          cfg.max_degree)
        else:
            beta = np.ones(g.n)
        plan = budget.allocate(eps_a, beta, cfg.max_degree)
        h0 = _stage("laplace", perturb.laplace_aggregate, g, plan, seed, noise=cfg.noise)

        if cfg.noise:
            noisy = _stage("edge-perturb", perturb.edge_randomize, g, eps_b, seed)
            if cfg.edge_sample:
                noisy = _stage("edge-sample", perturb.degree_preserving_sample, noisy,
                               g.degrees(), seed)
            private_adj = noisy.adj
        else:
            private_adj = g.adjacency()
        a_norm = graph.sym_norm_adj(private_adj)
        h, gammas = _stage("amp", amp.amp_propagate, h0, a_norm, cfg.hops, cfg.tau,
                           return_gamma=True)
        extra["mean_gamma"] = [float(gm.mean()) for gm in gammas]
        extra["mean_beta"] = float(beta.mean())
        if emit is not None:
            emit(seed, state, plan)

    model = _stage("train", classifier.train_head, h, noisy_labels, splits.train, splits.val,
                   g.num_classes, cfg.head, seed)
    metrics = _stage("evaluate", classifier.evaluate, model, h, labels, splits.test, seed=seed)
    return metrics, model.loss_trace, extra


def run_experiment(cfg, out_dir=None, emit_intermediates=False, g=None):
    """Run every seed in ``cfg`` and collect a metrics record.

    With ``out_dir`` the record is written to ``metrics.json`` (plus
    ``importance_out.csv`` / ``budget_out.csv`` for the first seed when
    ``emit_intermediates`` is set).
    """
    if g is None:
        g = _stage("load", load_dataset, cfg)
    out_dir = Path(out_dir) if out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    def emit(seed, state, plan):
        if not (out_dir and emit_intermediates) or seed != cfg.seeds[0]:
            return
        write_importance(out_dir / "importance_out.csv", state)
        write_budget(out_dir / "budget_out.csv", plan)

    eps_a, eps_b, eps_c = cfg.budgets()
    per_seed = []
    for seed in cfg.seeds:
        metrics, trace, extra = run_single(g, cfg, seed, emit)
        logger.info("seed %d: accuracy %.4f", seed, metrics.accuracy)
        per_seed.append({"seed": seed, **metrics.as_dict(), "per_epoch_loss": trace, **extra})
    accs = np.array([r["accuracy"] for r in per_seed])
    if len(accs) > 1:
        ci = classifier.bootstrap_ci(accs, seed=cfg.seeds[0])
    else:
        ci = tuple(per_seed[0]["ci95"])
    record = {
        "accuracy": float(accs.mean()),
        "median_accuracy": float(np.median(accs)),
        "ci95": list(ci),
        "seeds": list(cfg.seeds),
        "config_hash": cfg.config_hash(),
        "eps_A": eps_a,
        "eps_B": eps_b,
        "eps_C": eps_c,
        "eps_total": eps_a + eps_b + eps_c,
        "accounted": bool(cfg.noise),
        "per_epoch_loss": per_seed[0]["per_epoch_loss"],
        "runs": [{k: v for k, v in r.items() if k != "per_epoch_loss"} for r in per_seed],
        "config": cfg.to_dict(),
    }
    if out_dir:
        with (out_dir / "metrics.json").open("w") as fh:
            json.dump(record, fh, indent=2)
    return record


SWEEP_AXES = {"epsilon": "eps_total", "dmax": "max_degree", "hops": "hops"}


def sweep(cfg, axis, values, out_dir=None, g=None):
    """Run the experiment once per value of ``axis``; returns CSV-ready rows."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
    if not values:
        raise ValueError("sweep needs at least one value")
    if g is None:
        g = _stage("load", load_dataset, cfg)
    rows = []
    for value in values:
        run_cfg = replace(cfg, **{SWEEP_AXES[axis]: type(getattr(cfg, SWEEP_AXES[axis]))(value)})
        record = run_experiment(run_cfg, g=g)
        for run in record["runs"]:
            rows.append({"axis_value": value, "seed": run["seed"], "accuracy": run["accuracy"],
                         "ci_lo": run["ci95"][0], "ci_hi": run["ci95"][1]})
    if out_dir:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "results.csv").open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["axis_value", "seed", "accuracy", "ci_lo", "ci_hi"])
            w.writeheader()
            w.writerows(rows)
    return rows


def median_by_value(rows):
    values = list(dict.fromkeys(r["axis_value"] for r in rows))
    return values, [float(np.median([r["accuracy"] for r in rows if r["axis_value"] == v]))
                    for v in values]


def write_importance(path, state):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "score", "rank"])
        for u, (s, r) in enumerate(zip(state.scores, state.ranks)):
            w.writerow([u, repr(float(s)), int(r)])


def write_budget(path, plan):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "beta", "epsilon"])
        for u, (b, e) in enumerate(zip(plan.beta, plan.eps)):
            w.writerow([u, repr(float(b)), repr(float(e))])
