"""Seeded synthetic weighted graphs with structure-dependent weights.

Nodes get a latent position and an activity level.  Links are sampled with
probability increasing in both activities and decreasing in latent distance;
the weight of a link grows with the same quantities plus log-normal noise, so
it is partly predictable from the surrounding weighted topology.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graph import WeightedGraph


@dataclass(frozen=True)
class GraphProfile:
    name: str
    nodes: int
    edges: int
    weight_min: float
    weight_max: float
    integer_weights: bool = True


# Sizes and weight ranges of the four benchmark networks.
PROFILES = {
    "neural": GraphProfile("neural", 296, 2137, 1, 72),
    "celegans": GraphProfile("celegans", 453, 2025, 1, 114),
    "netscience": GraphProfile("netscience", 575, 1028, 0.0526, 2.5, integer_weights=False),
    "ucnet": GraphProfile("ucnet", 1899, 13828, 1, 184),
}


def latent_space_graph(nodes, edges, weight_min=1.0, weight_max=50.0, integer_weights=True,
                       seed=0, communities=8, noise=0.5):
    if nodes < 2 or edges < 1 or edges > nodes * (nodes - 1) // 2:
        raise ValidationError(f"cannot place {edges} links on {nodes} nodes")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(0, 1, size=(communities, 2))
    member = rng.integers(communities, size=nodes)
    pos = centers[member] + rng.normal(scale=0.08, size=(nodes, 2))
    log_act = rng.normal(scale=0.8, size=nodes)

    iu, iv = np.triu_indices(nodes, 1)
    dist = np.linalg.norm(pos[iu] - pos[iv], axis=1)
    logit = log_act[iu] + log_act[iv] - dist / 0.12
    # Gumbel top-k: sample ``edges`` pairs without replacement, P ~ exp(logit)
    keys = logit + rng.gumbel(size=logit.shape)
    pick = np.argpartition(-keys, edges - 1)[:edges]
    iu, iv, dist = iu[pick], iv[pick], dist[pick]

    strength = 0.9 * (log_act[iu] + log_act[iv]) - dist / 0.2 + rng.normal(scale=noise, size=edges)
    z = (strength - strength.mean()) / strength.std()
    if integer_weights:
        # heavy-tailed counts: most links weigh 1-3, a few reach weight_max
        w = np.floor(weight_min * np.exp(1.1 * np.maximum(z + 0.6, 0.0)))
        w = np.clip(w, weight_min, weight_max)
        w[np.argmax(z)] = weight_max
    else:
        lo, hi = np.log(weight_min), np.log(weight_max)
        w = np.exp(lo + (hi - lo) * (z - z.min()) / (z.max() - z.min()))
    edges_out = [(int(a), int(b), float(c)) for a, b, c in zip(iu, iv, w)]
    g = WeightedGraph.from_edges(nodes, edges_out)
    return g


def profile_graph(name, seed=0, scale=1.0):
    """Synthetic stand-in matching a benchmark's size and weight range.

    ``scale`` < 1 shrinks node and link counts proportionally.
    """
    prof = PROFILES[name]
    nodes = max(10, int(round(prof.nodes * scale)))
    edges = max(10, int(round(prof.edges * scale)))
    return latent_space_graph(nodes, edges, prof.weight_min, prof.weight_max,
                              prof.integer_weights, seed=seed)


def random_graph(nodes, p, seed, weight_range=(0.1, 0.9)):
    """Erdos-Renyi topology with uniform weights, for property tests."""
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((nodes, nodes)) < p, 1)
    W = np.where(upper, rng.uniform(*weight_range, size=(nodes, nodes)), 0.0)
    W = W + W.T
    return WeightedGraph((W > 0).astype(np.int8), W)
