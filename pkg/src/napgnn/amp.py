"""Adaptive residual multi-hop propagation over the noisy graph."""

import numpy as np

_EPS = 1e-12


def residual_weight(message, anchor, tau):
    """``max(1 - tau / ||M_u - H0_u||_2, 0)``; zero where the deviation vanishes."""
    dev = np.linalg.norm(message - anchor, axis=1)
    gamma = np.zeros_like(dev)
    live = dev >= _EPS
    gamma[live] = np.maximum(1.0 - tau / dev[live], 0.0)
    return gamma


def amp_propagate(h0, a_norm, hops, tau, return_gamma=False):
    """Run ``hops`` rounds of aggregation anchored on the noisy ``h0``.

    Each round computes ``M = a_norm @ H``, a per-node weight ``gamma`` from
    the distance between ``M`` and ``h0``, and ``H = (1 - gamma) h0 + gamma M``.
    ``a_norm`` must come only from the privatized adjacency.
    """
    if hops < 0:
        raise ValueError("hops must be >= 0")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    h = h0
    gammas = []
    for _ in range(hops):
        message = np.asarray(a_norm @ h)
        gamma = residual_weight(message, h0, tau)
        h = (1.0 - gamma)[:, None] * h0 + gamma[:, None] * message
        gammas.append(gamma)
    if return_gamma:
        return h, gammas
    return h
