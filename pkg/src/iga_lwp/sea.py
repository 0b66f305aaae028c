"""Self-attention enhanced link autoencoder used as the attack surrogate.

Node ``u`` is described by ``h_u = [W[u] | A2[u]]``.  Attention over the
observed neighbourhood pools neighbour features, a linear map of the two pooled
endpoint vectors gives the link embedding ``B_uv`` and a logistic decoder turns
it into a weight in (0, 1).

All arithmetic is float64.  The adjacency (and hence ``A @ A``) is treated as a
constant: only ``W`` and the parameters carry gradients.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import torch

from .errors import TrainingError, ValidationError
from .graph import second_order

log = logging.getLogger(__name__)

DTYPE = torch.float64


@dataclass
class SeaConfig:
    hidden_dim: int = 64
    embed_dim: int = 32
    leaky_slope: float = 0.2
    nu: float = 0.1
    l2_coeff: float = 1e-5
    learning_rate: float = 0.01
    epochs: int = 500
    optimizer: str = "adam"
    seed: int = 0
    zero_second_order_diagonal: bool = False

    def __post_init__(self):
        if self.hidden_dim < 1 or self.embed_dim < 1:
            raise ValidationError("hidden_dim and embed_dim must be >= 1")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ValidationError("leaky_slope must lie in (0, 1)")
        if self.nu < 0 or self.l2_coeff < 0:
            raise ValidationError("nu and l2_coeff must be non-negative")
        if self.learning_rate <= 0 or self.epochs < 1:
            raise ValidationError("learning_rate must be positive and epochs >= 1")
        if self.optimizer not in ("adam", "gd"):
            raise ValidationError(f"optimizer must be 'adam' or 'gd', got {self.optimizer!r}")

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


PARAM_NAMES = ("attn_weight", "attn_bias", "attn_vector", "agg_matrix", "decoder_vector")


@dataclass
class SeaParams:
    """Learnable tensors.

    attn_weight (hidden x 4N) and attn_bias (hidden) form the affine map
    ``rho_uk = attn_weight @ [h_u | h_k] + attn_bias``; attn_vector scores it.
    agg_matrix (embed x 4N) mixes the two pooled endpoint features and
    decoder_vector (embed) reads out the weight.
    """

    attn_weight: np.ndarray
    attn_bias: np.ndarray
    attn_vector: np.ndarray
    agg_matrix: np.ndarray
    decoder_vector: np.ndarray
    loss_trace: list = field(default_factory=list)

    @property
    def node_count(self):
        return self.agg_matrix.shape[1] // 4

    def arrays(self):
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def check(self, node_count=None):
        hidden, four_n = self.attn_weight.shape
        embed = self.agg_matrix.shape[0]
        ok = (four_n % 4 == 0 and self.attn_bias.shape == (hidden,)
              and self.attn_vector.shape == (hidden,)
              and self.agg_matrix.shape == (embed, four_n)
              and self.decoder_vector.shape == (embed,))
        if node_count is not None:
            ok = ok and four_n == 4 * node_count
        if not ok:
            raise ValidationError("inconsistent SEA parameter shapes")
        if not all(np.all(np.isfinite(a)) for a in self.arrays().values()):
            raise ValidationError("non-finite SEA parameter")
        return self


def init_params(node_count, cfg, seed=None):
    """Glorot-uniform initialisation, deterministic in ``seed`` (default cfg.seed)."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)

    def glorot(shape):
        fan_out, fan_in = shape if len(shape) == 2 else (1, shape[0])
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape)

    return SeaParams(
        attn_weight=glorot((cfg.hidden_dim, 4 * node_count)),
        attn_bias=np.zeros(cfg.hidden_dim),
        attn_vector=glorot((cfg.hidden_dim,)),
        agg_matrix=glorot((cfg.embed_dim, 4 * node_count)),
        decoder_vector=glorot((cfg.embed_dim,)),
    )


def zero_params(node_count, hidden_dim=4, embed_dim=3):
    n4 = 4 * node_count
    return SeaParams(np.zeros((hidden_dim, n4)), np.zeros(hidden_dim), np.zeros(hidden_dim),
                     np.zeros((embed_dim, n4)), np.zeros(embed_dim))


def leaky_relu(x, slope=0.2):
    return np.where(x >= 0, x, slope * x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# --- per-node reference operations (numpy, used for inspection and tests) ---

def init_node_features(g, zero_diagonal=False):
    """Row u is ``[W[u] | (A @ A)[u]]``, shape (N, 2N)."""
    return np.hstack([g.weights, second_order(g, zero_diagonal).astype(np.float64)])


def attention_coefficients(h, u, params, adjacency, slope=0.2):
    """``{k: alpha_uk}`` over the observed neighbours of ``u``.

    An isolated node attends to itself with weight 1.
    """
    nbrs = np.flatnonzero(adjacency[u])
    if len(nbrs) == 0:
        return {int(u): 1.0}
    scores = np.array([
        leaky_relu(params.attn_vector @ (params.attn_weight @ np.concatenate([h[u], h[k]]) + params.attn_bias), slope)
        for k in nbrs
    ])
    scores = np.exp(scores - scores.max())
    scores /= scores.sum()
    return {int(k): float(a) for k, a in zip(nbrs, scores)}


def _pooled(h, u, params, adjacency, slope):
    alpha = attention_coefficients(h, u, params, adjacency, slope)
    return sum(a * h[k] for k, a in alpha.items())


def link_embedding(h, u, v, params, adjacency, slope=0.2):
    z = np.concatenate([_pooled(h, u, params, adjacency, slope), _pooled(h, v, params, adjacency, slope)])
    return leaky_relu(params.agg_matrix @ z, slope)


def predict_weight(g, u, v, params, slope=0.2, zero_diagonal=False):
    h = init_node_features(g, zero_diagonal)
    b = link_embedding(h, u, v, params, g.adjacency, slope)
    return float(sigmoid(params.decoder_vector @ b))


# --- vectorised torch engine ---------------------------------------------------

class SeaGraph:
    """Constant graph-side tensors reused across forward passes."""

    def __init__(self, g, zero_diagonal=False):
        self.n = g.node_count
        self.adjacency = np.asarray(g.adjacency, dtype=bool)
        self.a2 = torch.as_tensor(second_order(g, zero_diagonal), dtype=DTYPE)
        self._nbrs = [np.flatnonzero(row) for row in self.adjacency]
        self._full_mask = None

    def neighbors(self, u):
        return self._nbrs[u]

    def support(self, nodes):
        """``nodes`` plus all their neighbours, sorted."""
        if len(nodes) == self.n:
            return np.arange(self.n)
        parts = [np.asarray(nodes, dtype=np.int64)] + [self._nbrs[u] for u in nodes]
        return np.unique(np.concatenate(parts))

    def attention_mask(self, rows, cols):
        if len(rows) == self.n:
            if self._full_mask is None:
                self._full_mask = self._mask(rows, cols)
            return self._full_mask
        return self._mask(rows, cols)

    def _mask(self, rows, cols):
        mask = self.adjacency[np.ix_(rows, cols)].copy()
        iso = ~mask.any(axis=1)
        if iso.any():
            pos = np.searchsorted(cols, rows[iso])
            mask[np.flatnonzero(iso), pos] = True
        return torch.as_tensor(mask)


def params_to_torch(params, requires_grad=False):
    return {name: torch.tensor(a, dtype=DTYPE, requires_grad=requires_grad)
            for name, a in params.arrays().items()}


def pooled_projections(sg, w_rows, rows, cols, p, slope):
    """Attention-pooled, Omega-projected features of ``rows``.

    ``w_rows`` holds the rows ``cols`` of the weight matrix (``rows`` must be a
    subset of ``cols``, which must contain every neighbour of ``rows``).
    Returns (Ya, Yb), each ``len(rows) x embed``, such that
    ``B_uv = leaky(Ya[u] + Yb[v])``.
    """
    n = sg.n
    h = torch.cat([w_rows, sg.a2[cols]], dim=1)
    row_pos = torch.as_tensor(np.searchsorted(cols, rows))
    gamma = p["attn_vector"]
    c_self = p["attn_weight"][:, :2 * n].T @ gamma
    c_nbr = p["attn_weight"][:, 2 * n:].T @ gamma
    c0 = gamma @ p["attn_bias"]
    s_self = h[row_pos] @ c_self
    s_nbr = h @ c_nbr
    e = torch.nn.functional.leaky_relu(s_self[:, None] + s_nbr[None, :] + c0, slope)
    e = torch.where(sg.attention_mask(rows, cols), e, torch.tensor(-np.inf, dtype=DTYPE))
    alpha = torch.softmax(e, dim=1)
    omega = p["agg_matrix"]
    proj_a = h @ omega[:, :2 * n].T
    proj_b = h @ omega[:, 2 * n:].T
    return alpha @ proj_a, alpha @ proj_b


class Forward:
    """Embeddings and predictions for the node set ``rows`` given weights ``w``.

    ``w`` is either the full N x N weight matrix or just its rows at
    ``sg.support(rows)``.
    """

    def __init__(self, sg, w, p, rows, slope):
        rows = np.asarray(rows, dtype=np.int64)
        cols = sg.support(rows)
        if w.shape[0] != len(cols):
            w = w[torch.as_tensor(cols)]
        self._pos = np.full(sg.n, -1, dtype=np.int64)
        self._pos[rows] = np.arange(len(rows))
        self.ya, self.yb = pooled_projections(sg, w, rows, cols, p, slope)
        self.p = p
        self.slope = slope

    def embeddings(self, us, vs):
        iu = torch.as_tensor(self._pos[np.asarray(us, dtype=np.int64)])
        iv = torch.as_tensor(self._pos[np.asarray(vs, dtype=np.int64)])
        return torch.nn.functional.leaky_relu(self.ya[iu] + self.yb[iv], self.slope)

    def predict(self, us, vs):
        return torch.sigmoid(self.embeddings(us, vs) @ self.p["decoder_vector"])


def training_loss(fwd, us, vs, targets, nu, l2_coeff=0.0, p=None):
    """Reconstruction + nu * embedding asymmetry (+ l2) over ordered pairs (us, vs)."""
    b_uv = fwd.embeddings(us, vs)
    b_vu = fwd.embeddings(vs, us)
    pred = torch.sigmoid(b_uv @ fwd.p["decoder_vector"])
    loss = ((targets - pred) ** 2).sum()
    if nu:
        loss = loss + nu * ((b_uv - b_vu) ** 2).sum()
    if l2_coeff and p is not None:
        loss = loss + l2_coeff * sum((t ** 2).sum() for t in p.values())
    return loss


def ordered_pairs(g):
    us, vs = np.nonzero(np.asarray(g.adjacency))
    return us, vs, torch.as_tensor(np.asarray(g.weights)[us, vs], dtype=DTYPE)


def train(split, cfg=None, params=None):
    """Full-batch training on the observed links of ``split`` (Adam or plain GD).

    Returns the fitted SeaParams with ``loss_trace`` filled in.  Every ordered
    pair ``(u, v)`` with ``a_uv = 1`` contributes, so each link counts twice.
    """
    cfg = cfg or SeaConfig()
    g = getattr(split, "observed", split)
    if g.edge_count == 0:
        raise ValidationError("cannot train on a graph without links")
    sg = SeaGraph(g, cfg.zero_second_order_diagonal)
    params = params or init_params(g.node_count, cfg)
    p = params_to_torch(params, requires_grad=True)
    w = torch.tensor(np.asarray(g.weights), dtype=DTYPE)
    us, vs, y = ordered_pairs(g)
    all_nodes = np.arange(g.node_count)
    tensors = list(p.values())
    if cfg.optimizer == "adam":
        opt = torch.optim.Adam(tensors, lr=cfg.learning_rate)
    else:
        opt = torch.optim.SGD(tensors, lr=cfg.learning_rate)
    trace = []
    for epoch in range(cfg.epochs):
        opt.zero_grad()
        fwd = Forward(sg, w, p, all_nodes, cfg.leaky_slope)
        loss = training_loss(fwd, us, vs, y, cfg.nu, cfg.l2_coeff, p)
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingError(f"training loss became {value} at epoch {epoch}", epoch)
        trace.append(value)
        loss.backward()
        opt.step()
        if epoch % 100 == 0:
            log.debug("epoch %d loss %.6f", epoch, value)
    out = SeaParams(**{k: t.detach().numpy().copy() for k, t in p.items()}, loss_trace=trace)
    if not all(np.all(np.isfinite(a)) for a in out.arrays().values()):
        raise TrainingError("parameters became non-finite", cfg.epochs)
    return out


class SeaPredictor:
    """Frozen SEA parameters bound to a topology, for batched prediction and gradients."""

    def __init__(self, g, params, slope=0.2, zero_diagonal=False):
        params.check(g.node_count)
        self.sg = SeaGraph(g, zero_diagonal)
        self.params = params
        self.slope = slope
        self.p = params_to_torch(params)

    @classmethod
    def from_config(cls, g, params, cfg):
        return cls(g, params, cfg.leaky_slope, cfg.zero_second_order_diagonal)

    def predict(self, weights, pairs):
        """Predictions for ``pairs`` [(u, v), ...] on weight matrix ``weights``."""
        pairs = list(pairs)
        if not pairs:
            return np.zeros(0)
        us = [int(u) for u, _ in pairs]
        vs = [int(v) for _, v in pairs]
        rows = np.unique(us + vs)
        cols = self.sg.support(rows)
        with torch.no_grad():
            w_rows = torch.as_tensor(np.asarray(weights)[cols], dtype=DTYPE)
            fwd = Forward(self.sg, w_rows, self.p, rows, self.slope)
            return fwd.predict(us, vs).numpy().copy()

    def weight_gradient(self, weights, loss_fn, rows=None):
        """``d loss / d W`` as a dense N x N array (zero diagonal).

        ``loss_fn(fwd)`` builds a scalar from a Forward over ``rows`` (all nodes
        by default).  Only rows of W inside the support of ``rows`` can carry
        gradient; the rest are exactly zero.
        """
        n = self.sg.n
        rows = np.arange(n) if rows is None else np.unique(np.asarray(rows, dtype=np.int64))
        cols = self.sg.support(rows)
        w_rows = torch.tensor(np.asarray(weights)[cols], dtype=DTYPE, requires_grad=True)
        fwd = Forward(self.sg, w_rows, self.p, rows, self.slope)
        loss = loss_fn(fwd)
        (grad,) = torch.autograd.grad(loss, w_rows)
        out = np.zeros((n, n))
        out[cols] = grad.numpy()
        np.fill_diagonal(out, 0.0)
        return loss.item(), out

    def target_loss(self, weights, target):
        u, v, w = target
        pred = self.predict(weights, [(u, v)])[0]
        return float((w - pred) ** 2)

    def target_gradient(self, weights, target):
        u, v, w = target
        def loss_fn(fwd):
            return (w - fwd.predict([u], [v])[0]) ** 2
        return self.weight_gradient(weights, loss_fn, rows=[u, v])

    def training_gradient(self, weights, nu, l2_coeff=0.0):
        """Gradient of the full training objective w.r.t. W (targets held constant)."""
        g_adj = self.sg.adjacency
        us, vs = np.nonzero(g_adj)
        y = torch.as_tensor(np.asarray(weights)[us, vs], dtype=DTYPE)
        p = self.p

        def loss_fn(fwd):
            return training_loss(fwd, us, vs, y, nu, l2_coeff, p)
        return self.weight_gradient(weights, loss_fn)


def loss_gradient_wrt_weights(split, params, loss, cfg=None):
    """Gradient matrix of ``loss`` w.r.t. the observed weight matrix.

    ``loss`` is either ``("target", u, v, w_true)`` or ``"training"``.
    """
    cfg = cfg or SeaConfig()
    g = getattr(split, "observed", split)
    sea = SeaPredictor.from_config(g, params, cfg)
    if loss == "training":
        return sea.training_gradient(g.weights, cfg.nu, cfg.l2_coeff)[1]
    if isinstance(loss, tuple) and loss[0] == "target":
        return sea.target_gradient(g.weights, loss[1:])[1]
    raise ValidationError(f"unknown loss specification {loss!r}")


# --- checkpoints -----------------------------------------------------------------

def save_checkpoint(path, cfg, params, split_seed=None, extra=None):
    """JSON checkpoint; floats are written with ``repr`` so they round-trip exactly."""
    doc = {
        "format": "iga-lwp/sea-checkpoint/1",
        "config": asdict(cfg),
        "split_seed": split_seed,
        "params": {k: {"shape": list(a.shape), "data": [float(x) for x in a.ravel()]}
                   for k, a in params.arrays().items()},
        "loss_trace": [float(x) for x in params.loss_trace],
    }
    if extra:
        doc["extra"] = extra
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "iga-lwp/sea-checkpoint/1":
        raise ValidationError(f"{path} is not a SEA checkpoint")
    arrays = {k: np.array(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in doc["params"].items()}
    params = SeaParams(**arrays, loss_trace=doc.get("loss_trace", [])).check()
    return SeaConfig.from_dict(doc["config"]), params, doc.get("split_seed")
