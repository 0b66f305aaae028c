"""Iterative gradient attack on link weight prediction (IGA-LWP).

Each iteration differentiates the squared error of one target link with
respect to the weight matrix, symmetrises the gradient, and moves the ``n``
admissible link weights with the largest gradient magnitude in the direction
that increases the error.  Topology never changes.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import AttackError, ValidationError
from .graph import round_half_up, save_edge_list
from .sea import SeaPredictor

log = logging.getLogger(__name__)

MODES = ("global", "local")
STEP_RULES = ("gradient_scaled", "fixed")
DEFAULT_CLAMP = (1e-6, 1.0 - 1e-6)


@dataclass
class AttackConfig:
    """``step`` is eta for ``gradient_scaled`` and epsilon for ``fixed``.

    ``budget`` caps the number of distinct links touched; ``None`` means
    ``per_iteration * iterations``.
    """

    mode: str = "global"
    iterations: int = 1
    per_iteration: int = 1
    step_rule: str = "gradient_scaled"
    step: float = 10.0
    budget: int = None
    clamp: tuple = DEFAULT_CLAMP
    distinct_only: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.step_rule not in STEP_RULES:
            raise ValidationError(f"step_rule must be one of {STEP_RULES}, got {self.step_rule!r}")
        if self.iterations < 0 or self.per_iteration < 1:
            raise ValidationError("iterations must be >= 0 and per_iteration >= 1")
        if self.step < 0:
            raise ValidationError("step must be non-negative")
        lo, hi = self.clamp
        if not 0.0 <= lo < hi <= 1.0:
            raise ValidationError(f"clamp must satisfy 0 <= lo < hi <= 1, got {self.clamp}")
        self.clamp = (float(lo), float(hi))
        if self.budget is None:
            self.budget = self.per_iteration * self.iterations
        if self.budget < 0:
            raise ValidationError("budget must be non-negative")


@dataclass
class TargetSpec:
    targets: list  # [(u, v, w_true)]
    k: list        # deg(u) + deg(v) on the observed graph, per target

    @classmethod
    def from_split(cls, split, targets):
        deg = split.observed.degrees()
        return cls(list(targets), [int(deg[u] + deg[v]) for u, v, _ in targets])


def degree_budget(k_t, ratio):
    """Links to perturb for a target with degree sum ``k_t`` (at least one)."""
    return max(1, round_half_up(ratio * k_t))


def symmetrize(g):
    """Upper triangle of ``(g + g.T) / 2``; zero on and below the diagonal."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValidationError(f"gradient must be a square matrix, got shape {g.shape}")
    return np.triu(0.5 * (g + g.T), 1)


def build_mask(mode, target, observed):
    """Boolean upper-triangular matrix of links the attacker may touch."""
    u, v = int(target[0]), int(target[1])
    A = np.asarray(observed.adjacency, dtype=bool)
    if mode == "global":
        mask = A.copy()
    elif mode == "local":
        mask = np.zeros_like(A)
        mask[[u, v], :] = A[[u, v], :]
        mask[:, [u, v]] |= A[:, [u, v]]
    else:
        raise ValidationError(f"unknown attack mode {mode!r}")
    mask[u, v] = mask[v, u] = False
    return np.triu(mask, 1)


@dataclass
class PerturbationMatrix:
    P: np.ndarray
    touched_links: set
    selected: list = field(default_factory=list)  # [(i, j, signed_step, g_hat_ij)]
    skipped: int = 0
    exhausted: bool = False


def perturbation_step(observed, g_hat, cfg, mask, already_touched=frozenset(), weights=None):
    """Pick up to ``cfg.per_iteration`` links by ``|g_hat|`` and step them uphill.

    A candidate is passed over when it is not an observed link, falls outside
    ``mask``, has zero gradient, would break the distinct-link budget (or
    ``distinct_only``), or is already pinned at the clamp bound in its
    gradient direction (needs ``weights``).  Ties go to the lexicographically
    smallest ``(i, j)``.
    """
    n = observed.node_count
    A = np.asarray(observed.adjacency, dtype=bool)
    lo, hi = cfg.clamp
    iu, iv = np.nonzero(np.triu(g_hat, 1))
    vals = g_hat[iu, iv]
    order = np.lexsort((iv, iu, -np.abs(vals)))
    # non-links and masked-out links can be dropped up front; they still count as skips
    static_ok = (A[iu, iv] & np.asarray(mask, dtype=bool)[iu, iv])[order]
    touched = set(already_touched)
    new = set()
    selected = []
    skipped = 0
    scanned = len(order)
    for pos in np.flatnonzero(static_ok):
        idx = order[pos]
        i, j, gij = int(iu[idx]), int(iv[idx]), float(vals[idx])
        link = (i, j)
        if link in touched:
            ok = not cfg.distinct_only
        else:
            ok = len(touched) + len(new) < cfg.budget
        if ok and weights is not None:
            ok = weights[i, j] < hi if gij > 0 else weights[i, j] > lo
        if not ok:
            skipped += 1
            continue
        step = cfg.step * abs(gij) if cfg.step_rule == "gradient_scaled" else cfg.step
        selected.append((i, j, step if gij > 0 else -step, gij))
        if link not in touched:
            new.add(link)
        if len(selected) == cfg.per_iteration:
            scanned = pos + 1
            break
    skipped += int((~static_ok[:scanned]).sum())
    P = np.zeros((n, n))
    for i, j, s, _ in selected:
        P[i, j] = s
    P = P + P.T
    return PerturbationMatrix(P, touched | new, selected, skipped, exhausted=not selected)


@dataclass
class AttackTrace:
    target: tuple
    config: dict
    steps: list = field(default_factory=list)  # dicts: iteration, link, step, grad
    losses: list = field(default_factory=list)  # target loss at iterates 0..K
    skipped: int = 0
    exhausted_at: int = None

    @property
    def touched_links(self):
        return sorted({tuple(s["link"]) for s in self.steps})

    def to_json(self):
        return {
            "target": list(self.target),
            "config": self.config,
            "iterations": len(self.losses) - 1,
            "steps": self.steps,
            "touched_links": [list(t) for t in self.touched_links],
            "losses": self.losses,
            "skipped": self.skipped,
            "exhausted_at": self.exhausted_at,
        }


def target_loss(predictor, weights, target):
    """Squared error of the surrogate's prediction for ``target = (u, v, w)``."""
    return predictor.target_loss(weights, target)


def run_iga_lwp(split, params, target, cfg, predictor=None, sea_cfg=None):
    """Attack ``target = (u, v, w_true)``; returns (adversarial graph, trace)."""
    observed = getattr(split, "observed", split)
    if predictor is None:
        predictor = (SeaPredictor.from_config(observed, params, sea_cfg) if sea_cfg
                     else SeaPredictor(observed, params))
    u, v, w_true = int(target[0]), int(target[1]), float(target[2])
    target = (u, v, w_true)
    mask = build_mask(cfg.mode, target, observed)
    lo, hi = cfg.clamp
    W = np.array(observed.weights, dtype=np.float64)
    touched = set()
    trace = AttackTrace(target, asdict(cfg))
    for h in range(1, cfg.iterations + 1):
        loss, g = predictor.target_gradient(W, target)
        if not np.all(np.isfinite(g)):
            raise AttackError(f"non-finite gradient at iteration {h}", h)
        trace.losses.append(loss)
        pm = perturbation_step(observed, symmetrize(g), cfg, mask, touched, W)
        trace.skipped += pm.skipped
        if pm.exhausted:
            trace.exhausted_at = h
            log.debug("no admissible link left at iteration %d", h)
            break
        for i, j, s, gij in pm.selected:
            new = min(max(W[i, j] + s, lo), hi)
            W[i, j] = W[j, i] = new
            trace.steps.append({"iteration": h, "link": [i, j], "step": s, "grad": gij, "weight": new})
        touched = pm.touched_links
    trace.losses.append(predictor.target_loss(W, target))
    return observed.with_weights(W), trace


def export_attack(adv_graph, trace, graph_path, trace_path):
    save_edge_list(adv_graph, graph_path)
    with open(trace_path, "w", encoding="utf-8") as fh:
        json.dump(trace.to_json(), fh, indent=1)
