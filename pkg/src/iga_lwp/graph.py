"""Undirected weighted graphs: storage, ingestion, normalization and splitting."""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

log = logging.getLogger(__name__)

MAX_NODES = 4096


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Dense symmetric graph; ``weights[u, v] == 0`` means absent or withheld.

    ``node_ids`` maps the dense index back to the label found in the source
    file (identity for generated graphs).
    """

    adjacency: np.ndarray
    weights: np.ndarray
    node_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        A = np.asarray(self.adjacency)
        W = np.asarray(self.weights, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != W.shape:
            raise ValidationError(f"adjacency {A.shape} and weights {W.shape} must be equal square matrices")
        if A.shape[0] > MAX_NODES:
            raise ValidationError(f"{A.shape[0]} nodes exceeds the dense limit of {MAX_NODES}")
        A = (A != 0).astype(np.int8)
        if not (np.array_equal(A, A.T) and np.array_equal(W, W.T)):
            raise ValidationError("graph must be symmetric")
        if np.any(np.diag(A)) or np.any(np.diag(W)):
            raise ValidationError("self-loops are not allowed")
        if np.any(W < 0) or not np.all(np.isfinite(W)):
            raise ValidationError("weights must be finite and non-negative")
        if np.any((W > 0) & (A == 0)):
            raise ValidationError("positive weight on a pair that is not adjacent")
        ids = np.arange(A.shape[0]) if self.node_ids is None else np.asarray(self.node_ids)
        object.__setattr__(self, "adjacency", _frozen(A))
        object.__setattr__(self, "weights", _frozen(W))
        object.__setattr__(self, "node_ids", _frozen(ids))

    @classmethod
    def from_edges(cls, node_count, edges, node_ids=None):
        A = np.zeros((node_count, node_count), dtype=np.int8)
        W = np.zeros((node_count, node_count))
        for u, v, w in edges:
            A[u, v] = A[v, u] = 1
            W[u, v] = W[v, u] = w
        return cls(A, W, node_ids)

    @property
    def node_count(self):
        return self.adjacency.shape[0]

    @property
    def edge_count(self):
        return int(np.triu(self.adjacency, 1).sum())

    @property
    def edge_list(self):
        """(u, v, w) with u < v, in lexicographic order."""
        iu, iv = np.nonzero(np.triu(self.adjacency, 1))
        return [(int(u), int(v), float(self.weights[u, v])) for u, v in zip(iu, iv)]

    def edge_array(self):
        iu, iv = np.nonzero(np.triu(self.adjacency, 1))
        return iu, iv, self.weights[iu, iv]

    def degrees(self):
        return self.adjacency.sum(axis=1).astype(np.int64)

    def neighbors(self, u):
        return np.flatnonzero(self.adjacency[u])

    def with_weights(self, weights):
        """Same topology, new weight matrix (entries off the adjacency must be 0)."""
        return WeightedGraph(self.adjacency, weights, self.node_ids)

    def __eq__(self, other):
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (np.array_equal(self.adjacency, other.adjacency)
                and np.array_equal(self.weights, other.weights))

    __hash__ = None


@dataclass(frozen=True)
class ObservedSplit:
    observed: WeightedGraph
    test_edges: list  # [(u, v, w_true)]
    seed: int

    @property
    def node_count(self):
        return self.observed.node_count


_SEPARATORS = {"whitespace": None, "csv": ","}


def load_edge_list(path, format="whitespace"):
    """Read ``u v w`` records into a graph with densely re-indexed node ids.

    Duplicate pairs (in either orientation) are summed; self-loops are dropped.
    """
    if format not in _SEPARATORS:
        raise ValidationError(f"unknown edge-list format {format!r}")
    sep = _SEPARATORS[format]
    agg = {}
    self_loops = 0
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(sep)] if sep else line.split()
            if len(parts) != 3:
                raise ParseError(f"expected 3 fields, got {len(parts)}: {line!r}", line_no)
            try:
                u, v = int(parts[0]), int(parts[1])
                w = float(parts[2])
            except ValueError:
                raise ParseError(f"cannot parse record {line!r}", line_no) from None
            if u < 0 or v < 0:
                raise ParseError("node ids must be non-negative integers", line_no)
            if not (w > 0) or not math.isfinite(w):
                raise ValidationError(f"line {line_no}: weight must be positive, got {w}")
            if u == v:
                self_loops += 1
                continue
            key = (min(u, v), max(u, v))
            agg[key] = agg.get(key, 0.0) + w
    if self_loops:
        log.warning("%s: dropped %d self-loop record(s)", path, self_loops)
    labels = sorted({x for pair in agg for x in pair})
    index = {lab: i for i, lab in enumerate(labels)}
    edges = [(index[u], index[v], w) for (u, v), w in agg.items()]
    return WeightedGraph.from_edges(len(labels), edges, node_ids=np.array(labels, dtype=np.int64))


def save_edge_list(g, path, format="whitespace", original_ids=True):
    sep = "," if format == "csv" else " "
    ids = g.node_ids if original_ids else np.arange(g.node_count)
    with open(path, "w", encoding="utf-8") as fh:
        for u, v, w in g.edge_list:
            fh.write(f"{ids[u]}{sep}{ids[v]}{sep}{w:.10g}\n")


def normalize_weights(g):
    """Map every present weight through ``exp(-1/w)``; absent entries stay 0."""
    present = g.adjacency.astype(bool)
    W = g.weights
    if np.any(W[present] <= 0):
        raise ValidationError("normalization needs strictly positive weights on every link")
    out = np.zeros_like(W)
    out[present] = np.exp(-1.0 / W[present])
    return g.with_weights(out)


def round_half_up(x):
    return int(math.floor(x + 0.5))


def split_train_test(g, test_fraction=0.1, seed=0):
    """Withhold a uniform sample of links; they vanish from both A and W."""
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    iu, iv, w = g.edge_array()
    if len(iu) < 10:
        raise ValidationError(f"need at least 10 edges to split, got {len(iu)}")
    n_test = round_half_up(test_fraction * len(iu))
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(len(iu), size=n_test, replace=False))
    A = g.adjacency.copy()
    W = g.weights.copy()
    A[iu[pick], iv[pick]] = A[iv[pick], iu[pick]] = 0
    W[iu[pick], iv[pick]] = W[iv[pick], iu[pick]] = 0.0
    test = [(int(iu[i]), int(iv[i]), float(w[i])) for i in pick]
    return ObservedSplit(WeightedGraph(A, W, g.node_ids), test, seed)


def second_order(g, zero_diagonal=False):
    """``A @ A`` on the binary adjacency: common-neighbor counts, degrees on the diagonal."""
    A = g.adjacency.astype(np.float64)
    A2 = np.rint(A @ A).astype(np.int64)  # float matmul goes through BLAS; counts are exact
    if zero_diagonal:
        np.fill_diagonal(A2, 0)
    return A2


def common_neighbors(g, u, v):
    n = g.node_count
    for x in (u, v):
        if not (isinstance(x, (int, np.integer)) and 0 <= x < n):
            raise ValidationError(f"invalid node id {x!r} for a graph with {n} nodes")
    if u == v:
        raise ValidationError("common_neighbors needs two distinct nodes")
    return int(np.count_nonzero(g.adjacency[u] & g.adjacency[v]))


_DATASET_FILE = re.compile(r"[^a-z0-9]+")


def dataset_slug(path):
    return _DATASET_FILE.sub("-", Path(path).stem.lower()).strip("-")
