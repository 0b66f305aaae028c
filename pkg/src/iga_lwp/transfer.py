"""Stand-alone link weight predictors used to measure attack transferability.

DeepWalk / Node2Vec: (biased) random walks -> skip-gram with negative sampling
-> Hadamard edge features -> logistic regression on the observed weights.
GCN: symmetric-normalised weighted propagation, bilinear edge decoder.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch
from scipy.optimize import minimize

from .errors import TrainingError, ValidationError

log = logging.getLogger(__name__)


@dataclass
class EmbeddingConfig:
    dim: int = 32
    walks_per_node: int = 10
    walk_length: int = 40
    window: int = 5
    negatives: int = 5
    p: float = 1.0
    q: float = 1.0
    epochs: int = 200
    learning_rate: float = 0.1
    seed: int = 0
    weighted: bool = True

    def __post_init__(self):
        for name in ("dim", "walks_per_node", "walk_length", "window", "negatives", "epochs"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.p <= 0 or self.q <= 0 or self.learning_rate <= 0:
            raise ValidationError("p, q and learning_rate must be positive")


def deepwalk_config(**kw):
    return EmbeddingConfig(**{"p": 1.0, "q": 1.0, **kw})


def node2vec_config(**kw):
    return EmbeddingConfig(**{"p": 1.0, "q": 0.5, **kw})


def _padded_neighbors(g, weighted):
    A = np.asarray(g.adjacency, dtype=bool)
    deg = A.sum(axis=1)
    width = max(1, int(deg.max()) if len(deg) else 1)
    nbr = np.full((g.node_count, width), -1, dtype=np.int64)
    wts = np.zeros((g.node_count, width))
    for u in range(g.node_count):
        ks = np.flatnonzero(A[u])
        nbr[u, :len(ks)] = ks
        wts[u, :len(ks)] = g.weights[u, ks] if weighted else 1.0
    return A, nbr, wts


def transition_weights(A, nbr, wts, prev, cur, p, q):
    """Unnormalised node2vec transition weights from ``cur`` having come from ``prev``.

    ``prev < 0`` marks the first step (no return/in-out bias).
    """
    cand = nbr[cur]
    w = wts[cur].copy()
    has_prev = prev >= 0
    if has_prev.any():
        pv = np.where(has_prev, prev, 0)[:, None]
        safe = np.where(cand >= 0, cand, 0)
        bias = np.where(cand == pv, 1.0 / p, np.where(A[pv, safe], 1.0, 1.0 / q))
        w = np.where(has_prev[:, None], w * bias, w)
    return np.where(cand >= 0, w, 0.0)


def random_walks(g, cfg):
    """``walks_per_node`` walks from every node; isolated nodes yield ``[node]``."""
    rng = np.random.default_rng(cfg.seed)
    A, nbr, wts = _padded_neighbors(g, cfg.weighted)
    n = g.node_count
    starts = np.tile(np.arange(n), cfg.walks_per_node)
    walks = np.full((len(starts), cfg.walk_length), -1, dtype=np.int64)
    walks[:, 0] = starts
    alive = A[starts].any(axis=1)
    prev = np.full(len(starts), -1, dtype=np.int64)
    for step in range(1, cfg.walk_length):
        idx = np.flatnonzero(alive)
        if len(idx) == 0:
            break
        cur = walks[idx, step - 1]
        w = transition_weights(A, nbr, wts, prev[idx], cur, cfg.p, cfg.q)
        total = w.sum(axis=1)
        ok = total > 0
        cdf = np.cumsum(w, axis=1) / np.where(ok, total, 1.0)[:, None]
        r = rng.random(len(idx))[:, None]
        choice = np.minimum((cdf < r).sum(axis=1), cdf.shape[1] - 1)
        nxt = nbr[cur, choice]
        walks[idx[ok], step] = nxt[ok]
        prev[idx] = cur
        alive[idx[~ok]] = False
    return [row[row >= 0] for row in walks]


def cooccurrence(walks, n, window):
    """Symmetric counts of (centre, context) pairs within ``window`` steps."""
    length = max(len(w) for w in walks)
    mat = np.full((len(walks), length), -1, dtype=np.int64)
    for r, w in enumerate(walks):
        mat[r, :len(w)] = w
    counts = np.zeros(n * n)
    for d in range(1, min(window, length - 1) + 1):
        a, b = mat[:, :-d].ravel(), mat[:, d:].ravel()
        ok = (a >= 0) & (b >= 0)
        a, b = a[ok], b[ok]
        counts += np.bincount(a * n + b, minlength=n * n)
        counts += np.bincount(b * n + a, minlength=n * n)
    return counts.reshape(n, n)


class SkipGram:
    """Skip-gram with negative sampling, trained full-batch on pair counts.

    Negatives enter through their expected counts under the unigram^0.75
    noise distribution, which makes the objective deterministic, so plain
    gradient descent on it is monotone for a small enough step.
    """

    def __init__(self, walks, n, cfg):
        if not walks or all(len(w) == 0 for w in walks):
            raise ValidationError("empty walk corpus")
        self.cfg = cfg
        pos = cooccurrence(walks, n, cfg.window)
        freq = np.bincount(np.concatenate(walks), minlength=n).astype(np.float64) ** 0.75
        noise = freq / freq.sum()
        neg = cfg.negatives * np.outer(pos.sum(axis=1), noise)
        per_node = max(pos.sum(), 1.0) / n  # loss is averaged per node
        self.pos = torch.as_tensor(pos / per_node)
        self.neg = torch.as_tensor(neg / per_node)
        rng = np.random.default_rng(cfg.seed)
        self.inp = torch.tensor((rng.random((n, cfg.dim)) - 0.5) / cfg.dim, requires_grad=True)
        self.ctx = torch.tensor((rng.random((n, cfg.dim)) - 0.5) / cfg.dim, requires_grad=True)

    def loss(self):
        s = self.inp @ self.ctx.T
        f = torch.nn.functional.logsigmoid
        return -(self.pos * f(s)).sum() - (self.neg * f(-s)).sum()

    def fit(self):
        trace = []
        for epoch in range(self.cfg.epochs):
            loss = self.loss()
            if not torch.isfinite(loss):
                raise TrainingError(f"skip-gram loss diverged at epoch {epoch}", epoch)
            trace.append(loss.item())
            gi, gc = torch.autograd.grad(loss, [self.inp, self.ctx])
            with torch.no_grad():
                self.inp -= self.cfg.learning_rate * gi
                self.ctx -= self.cfg.learning_rate * gc
        return self.inp.detach().numpy().copy(), trace


def train_skipgram(walks, cfg, n=None):
    """Node embeddings (n x dim) and the per-epoch loss trace."""
    n = n if n is not None else int(max(int(w.max()) for w in walks if len(w)) + 1)
    return SkipGram(walks, n, cfg).fit()


class EdgeRegressor:
    """``sigmoid(beta . (e_u * e_v) + b)`` fitted by L-BFGS on squared error."""

    def __init__(self, embeddings, beta, bias):
        self.embeddings = embeddings
        self.beta = beta
        self.bias = bias

    def predict(self, pairs):
        pairs = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        x = self.embeddings[pairs[:, 0]] * self.embeddings[pairs[:, 1]]
        return 1.0 / (1.0 + np.exp(-(x @ self.beta + self.bias)))

    def __call__(self, u, v):
        return float(self.predict([(u, v)])[0])


def embedding_regressor(embeddings, train_edges, ridge=1e-4):
    if len(train_edges) < 1:
        raise ValidationError("need at least one training edge")
    emb = np.asarray(embeddings, dtype=np.float64)
    e = np.asarray([(u, v) for u, v, _ in train_edges], dtype=np.int64)
    y = np.asarray([w for *_, w in train_edges], dtype=np.float64)
    x = emb[e[:, 0]] * emb[e[:, 1]]
    scale = x.std(axis=0) + 1e-12
    xs = x / scale
    d = x.shape[1]

    def fun(theta):
        beta, b = theta[:d], theta[d]
        z = xs @ beta + b
        pred = 1.0 / (1.0 + np.exp(-z))
        r = pred - y
        dz = 2.0 * r * pred * (1.0 - pred) / len(y)
        f = float(r @ r) / len(y) + ridge * float(beta @ beta)
        grad = np.concatenate([xs.T @ dz + 2 * ridge * beta, [dz.sum()]])
        return f, grad

    theta0 = np.zeros(d + 1)
    theta0[d] = np.log(np.clip(y.mean(), 1e-6, 1 - 1e-6) / (1 - np.clip(y.mean(), 1e-6, 1 - 1e-6)))
    res = minimize(fun, theta0, jac=True, method="L-BFGS-B", options={"maxiter": 500})
    return EdgeRegressor(emb, res.x[:d] / scale, float(res.x[d]))


def embedding_predictor(g, train_edges, cfg):
    """Walks on ``g`` -> embeddings -> regressor fitted on ``train_edges``."""
    walks = random_walks(g, cfg)
    emb, _ = train_skipgram(walks, cfg, n=g.node_count)
    return embedding_regressor(emb, train_edges)


# --- GCN ---------------------------------------------------------------------

@dataclass
class GcnConfig:
    layers: int = 2
    hidden: int = 32
    learning_rate: float = 0.01
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1 or self.hidden < 1 or self.epochs < 1:
            raise ValidationError("layers, hidden and epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")


def normalized_propagation(weights):
    """``D^-1/2 (W + I) D^-1/2`` with D the weighted degree of ``W + I``."""
    M = np.asarray(weights, dtype=np.float64) + np.eye(len(weights))
    d = 1.0 / np.sqrt(M.sum(axis=1))
    return d[:, None] * M * d[None, :]


class GcnModel:
    """One-hot inputs, ReLU between layers, linear last layer, score ``sigmoid(z_u' S z_v)``.

    ``S`` is the symmetric part of a learned matrix, so scores are symmetric.
    """

    def __init__(self, n, cfg, params=None):
        self.cfg = cfg
        if params is None:
            rng = np.random.default_rng(cfg.seed)
            dims = [n] + [cfg.hidden] * cfg.layers
            params = [rng.normal(scale=1.0 / np.sqrt(a), size=(a, b)) for a, b in zip(dims[:-1], dims[1:])]
            params.append(rng.normal(scale=1.0 / cfg.hidden, size=(cfg.hidden, cfg.hidden)))
        self.params = [torch.tensor(np.asarray(p, dtype=np.float64), requires_grad=True) for p in params]

    def node_states(self, prop):
        z = prop @ self.params[0]
        for layer in self.params[1:-1]:
            z = prop @ (torch.relu(z) @ layer)
        return z

    def scores(self, prop, us, vs):
        z = self.node_states(prop)
        m = self.params[-1]
        s = 0.5 * (m + m.T)
        return torch.sigmoid(((z[us] @ s) * z[vs]).sum(dim=1))


class GcnPredictor:
    def __init__(self, model, prop):
        self.model = model
        self.prop = prop

    def predict(self, pairs):
        pairs = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        with torch.no_grad():
            return self.model.scores(self.prop, torch.as_tensor(pairs[:, 0]),
                                     torch.as_tensor(pairs[:, 1])).numpy().copy()

    def __call__(self, u, v):
        return float(self.predict([(u, v)])[0])


def gcn_regressor(split, cfg=None):
    cfg = cfg or GcnConfig()
    g = getattr(split, "observed", split)
    iu, iv, y = g.edge_array()
    if len(iu) == 0:
        raise ValidationError("cannot fit a GCN on a graph without links")
    prop = torch.as_tensor(normalized_propagation(g.weights))
    model = GcnModel(g.node_count, cfg)
    us, vs, yt = torch.as_tensor(iu), torch.as_tensor(iv), torch.as_tensor(y)
    opt = torch.optim.Adam(model.params, lr=cfg.learning_rate)
    for epoch in range(cfg.epochs):
        opt.zero_grad()
        loss = ((model.scores(prop, us, vs) - yt) ** 2).mean()
        if not torch.isfinite(loss):
            raise TrainingError(f"GCN loss diverged at epoch {epoch}", epoch)
        loss.backward()
        opt.step()
    return GcnPredictor(model, prop)
