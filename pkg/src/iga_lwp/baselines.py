"""Random (RDA) and common-neighbour (SA-CN) baseline attacks.

Both pick a set of admissible links once and move each selected weight by
``alpha * w`` under the same mask, budget and clamp rules as IGA-LWP.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .attack import DEFAULT_CLAMP, MODES, build_mask
from .errors import ValidationError
from .graph import second_order

log = logging.getLogger(__name__)

DIRECTIONS = ("random_sign", "increase", "decrease")


@dataclass
class BaselineConfig:
    alpha: float = 0.5
    budget: int = 1
    mode: str = "global"
    direction_rule: str = "random_sign"
    seed: int = 0
    clamp: tuple = DEFAULT_CLAMP

    def __post_init__(self):
        if self.alpha < 0:
            raise ValidationError("alpha must be non-negative")
        if self.budget < 1:
            raise ValidationError("budget must be >= 1")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if self.direction_rule not in DIRECTIONS:
            raise ValidationError(f"direction_rule must be one of {DIRECTIONS}")


@dataclass
class BaselineTrace:
    target: tuple
    selected: list = field(default_factory=list)   # [(i, j)]
    steps: list = field(default_factory=list)      # signed deltas, aligned with selected
    shortfall: int = 0

    @property
    def touched_links(self):
        return sorted(self.selected)


def admissible_links(observed, target, mode):
    """Upper-triangular admissible links as (i, j) arrays in lexicographic order."""
    return np.nonzero(build_mask(mode, target, observed))


def _perturb(observed, target, links, cfg, rng):
    iu, iv = links
    W = np.array(observed.weights, dtype=np.float64)
    lo, hi = cfg.clamp
    if cfg.direction_rule == "random_sign":
        signs = rng.choice([-1.0, 1.0], size=len(iu))
    else:
        signs = np.full(len(iu), 1.0 if cfg.direction_rule == "increase" else -1.0)
    trace = BaselineTrace(tuple(target))
    for i, j, s in zip(iu, iv, signs):
        i, j = int(i), int(j)
        delta = s * cfg.alpha * W[i, j]
        W[i, j] = W[j, i] = min(max(W[i, j] + delta, lo), hi)
        trace.selected.append((i, j))
        trace.steps.append(float(delta))
    return observed.with_weights(W), trace


def _shortfall(n_admissible, cfg):
    short = max(0, cfg.budget - n_admissible)
    if short:
        log.warning("budget %d exceeds %d admissible links; perturbing all", cfg.budget, n_admissible)
    return short


def rda_select(observed, target, cfg, rng):
    iu, iv = admissible_links(observed, target, cfg.mode)
    k = min(cfg.budget, len(iu))
    pick = np.sort(rng.choice(len(iu), size=k, replace=False)) if k else np.zeros(0, dtype=np.int64)
    return (iu[pick], iv[pick]), _shortfall(len(iu), cfg)


def rda_attack(split, target, cfg):
    """Perturb ``cfg.budget`` uniformly sampled admissible links."""
    observed = getattr(split, "observed", split)
    rng = np.random.default_rng(cfg.seed)
    links, short = rda_select(observed, target, cfg, rng)
    adv, trace = _perturb(observed, target, links, cfg, rng)
    trace.shortfall = short
    return adv, trace


def sacn_ranking(observed, target, mode):
    """Admissible links sorted by common-neighbour count (desc), ties lexicographic."""
    iu, iv = admissible_links(observed, target, mode)
    cn = second_order(observed)[iu, iv]
    order = np.lexsort((iv, iu, -cn))
    return iu[order], iv[order], cn[order]


def sacn_attack(split, target, cfg):
    """Perturb the ``cfg.budget`` admissible links with most common neighbours."""
    observed = getattr(split, "observed", split)
    iu, iv, _ = sacn_ranking(observed, target, cfg.mode)
    k = min(cfg.budget, len(iu))
    rng = np.random.default_rng(cfg.seed)
    adv, trace = _perturb(observed, target, (iu[:k], iv[:k]), cfg, rng)
    trace.shortfall = _shortfall(len(iu), cfg)
    return adv, trace
