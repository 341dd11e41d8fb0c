"""Two-layer softmax head trained on private embeddings, plus evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_softmax, softmax

from napgnn._optim import Adam, TrainingDivergedError, ReduceOnPlateau
from napgnn._rng import substream


@dataclass
class TrainConfig:
    hidden: int = 128
    dropout: float = 0.2
    lr: float = 1e-3
    max_epochs: int = 1500
    plateau_patience: int = 20
    plateau_factor: float = 0.5
    early_stop: int = 100

    def __post_init__(self):
        if not (self.hidden > 0 and self.lr > 0 and self.max_epochs > 0):
            raise ValueError("hidden, lr and max_epochs must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")


@dataclass
class HeadModel:
    params: dict
    mean: np.ndarray
    scale: np.ndarray
    loss_trace: list = field(default_factory=list)

    def logits(self, x):
        return forward(self.params, self.standardize(x))[0]

    def predict_proba(self, x):
        return softmax(self.logits(x), axis=1)

    def predict(self, x):
        return np.argmax(self.logits(x), axis=1)

    def standardize(self, x):
        return (np.asarray(x) - self.mean) / self.scale


@dataclass
class Metrics:
    accuracy: float
    ci95: tuple
    n_test: int

    def as_dict(self):
        return {"accuracy": self.accuracy, "ci95": list(self.ci95), "n_test": self.n_test}


def init_params(d, hidden, num_classes, rng):
    return {
        "W1": rng.normal(0.0, np.sqrt(2.0 / d), (d, hidden)),
        "b1": np.zeros(hidden),
        "W2": rng.normal(0.0, np.sqrt(1.0 / hidden), (hidden, num_classes)),
        "b2": np.zeros(num_classes),
    }


def forward(params, x, mask=None):
    pre = x @ params["W1"] + params["b1"]
    hidden = np.maximum(pre, 0.0)
    if mask is not None:
        hidden = hidden * mask
    return hidden @ params["W2"] + params["b2"], (pre, hidden)


def loss_and_grads(params, x, y, mask=None):
    """Mean cross-entropy and its gradients; ``mask`` is a scaled dropout mask."""
    logits, (pre, hidden) = forward(params, x, mask)
    logp = log_softmax(logits, axis=1)
    m = len(y)
    loss = -float(np.mean(logp[np.arange(m), y]))
    dlogits = np.exp(logp)
    dlogits[np.arange(m), y] -= 1.0
    dlogits /= m
    grads = {"W2": hidden.T @ dlogits, "b2": dlogits.sum(axis=0)}
    dh = dlogits @ params["W2"].T
    if mask is not None:
        dh = dh * mask
    dh *= pre > 0
    grads["W1"] = x.T @ dh
    grads["b1"] = dh.sum(axis=0)
    return loss, grads


def train_head(h, noisy_labels, train, val, num_classes, cfg=TrainConfig(), seed=0):
    """Fit the head on ``h`` against randomized labels.

    ``noisy_labels`` is indexed by node id and must be randomized on both
    ``train`` and ``val``; validation loss against those labels drives the
    learning-rate plateau schedule and early stopping.
    """
    h = np.asarray(h, dtype=np.float64)
    mean = h.mean(axis=0)
    scale = h.std(axis=0)
    scale[scale == 0] = 1.0
    x = (h - mean) / scale
    rng = substream(seed, "head-init")
    params = init_params(h.shape[1], cfg.hidden, num_classes, rng)
    drop_rng = substream(seed, "head-dropout")
    opt = Adam(params, lr=cfg.lr)
    plateau = ReduceOnPlateau(opt, cfg.plateau_patience, cfg.plateau_factor)

    x_tr, y_tr = x[train], noisy_labels[train]
    x_va, y_va = x[val], noisy_labels[val]
    best = (np.inf, {k: v.copy() for k, v in params.items()})
    stale = 0
    trace = []
    keep = 1.0 - cfg.dropout
    for epoch in range(cfg.max_epochs):
        mask = None
        if cfg.dropout > 0:
            mask = (drop_rng.random((len(train), cfg.hidden)) < keep) / keep
        loss, grads = loss_and_grads(params, x_tr, y_tr, mask)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"head loss became {loss} at epoch {epoch}")
        opt.step(grads)
        val_loss = loss_and_grads(params, x_va, y_va)[0] if len(val) else loss
        trace.append(loss)
        plateau.step(val_loss)
        if val_loss < best[0]:
            best = (val_loss, {k: v.copy() for k, v in params.items()})
            stale = 0
        else:
            stale += 1
            if stale >= cfg.early_stop:
                break
    return HeadModel(best[1], mean, scale, trace)


def bootstrap_ci(values, resamples=2000, seed=0, level=0.95):
    """Percentile bootstrap interval for the mean of ``values``."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) == 0:
        raise ValueError("cannot bootstrap an empty sample")
    rng = substream(seed, "bootstrap")
    idx = rng.integers(len(values), size=(resamples, len(values)))
    means = values[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


def evaluate(model, h, labels, test, resamples=2000, seed=0):
    """Test accuracy against clean labels with a bootstrap 95% interval."""
    test = np.asarray(test)
    if len(test) == 0:
        raise ValueError("empty test set")
    correct = (model.predict(h[test]) == labels[test]).astype(np.float64)
    return Metrics(float(correct.mean()), bootstrap_ci(correct, resamples, seed), len(test))
