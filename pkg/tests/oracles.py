"""Independent reference implementations used as test oracles.

These are deliberately naive: explicit per-node loops, explicit concatenation
of ``[h_u | h_k]`` and extended precision, sharing no code with the package.
"""
import itertools
import math

import numpy as np

LD = np.longdouble


def _leaky(x, slope):
    return np.where(x >= 0, x, slope * x)


def _features(W, A):
    n = len(A)
    A2 = np.zeros((n, n), dtype=LD)
    for i, j in itertools.product(range(n), repeat=2):
        A2[i, j] = sum(int(A[i, k]) * int(A[k, j]) for k in range(n))
    return np.hstack([np.asarray(W, dtype=LD), A2])


def _pooled_all(h, A, P, slope):
    n = len(A)
    M, b, gamma = P["attn_weight"], P["attn_bias"], P["attn_vector"]
    out = []
    for u in range(n):
        nbrs = [k for k in range(n) if A[u, k]]
        if not nbrs:
            out.append(h[u].copy())
            continue
        pairs = np.stack([np.concatenate([h[u], h[k]]) for k in nbrs])
        e = _leaky((pairs @ M.T + b) @ gamma, slope)
        e = np.exp(e - e.max())
        alpha = e / e.sum()
        out.append((alpha[:, None] * h[nbrs]).sum(axis=0))
    return out


def sea_oracle(W, A, params, slope=0.2):
    """Returns ``embed(u, v)`` and ``predict(u, v)`` closures for weights W."""
    P = {k: np.asarray(v, dtype=LD) for k, v in params.arrays().items()}
    h = _features(W, A)
    z = _pooled_all(h, A, P, slope)

    def embed(u, v):
        return _leaky(P["agg_matrix"] @ np.concatenate([z[u], z[v]]), slope)

    def predict(u, v):
        return 1.0 / (1.0 + np.exp(-(P["decoder_vector"] @ embed(u, v))))
    return embed, predict


def oracle_target_loss(W, A, params, target, slope=0.2):
    u, v, w = target
    _, predict = sea_oracle(W, A, params, slope)
    return (LD(w) - predict(u, v)) ** 2


def oracle_training_loss(W, A, params, y, nu, slope=0.2):
    """Sum over ordered linked pairs; ``y`` holds the (constant) targets."""
    embed, _ = sea_oracle(W, A, params, slope)
    theta = np.asarray(params.decoder_vector, dtype=LD)
    total = LD(0)
    n = len(A)
    for u in range(n):
        for v in range(n):
            if A[u, v]:
                buv, bvu = embed(u, v), embed(v, u)
                pred = 1.0 / (1.0 + np.exp(-(theta @ buv)))
                total += (LD(y[u, v]) - pred) ** 2 + nu * ((buv - bvu) ** 2).sum()
    return total


def central_difference(f, W, step=1e-5):
    """Gradient of scalar ``f`` w.r.t. each off-diagonal entry of W."""
    W = np.asarray(W, dtype=LD)
    n = len(W)
    grad = np.zeros((n, n), dtype=LD)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            Wp, Wm = W.copy(), W.copy()
            Wp[i, j] += step
            Wm[i, j] -= step
            grad[i, j] = (f(Wp) - f(Wm)) / (2 * step)
    return grad.astype(np.float64)


def max_relative_error(analytic, numeric, floor=1e-8):
    sel = np.abs(analytic) > floor
    if not sel.any():
        return 0.0, 0
    rel = np.abs(analytic[sel] - numeric[sel]) / np.maximum(np.abs(analytic[sel]), np.abs(numeric[sel]))
    return float(rel.max()), int(sel.sum())


def brute_pcc(x, y):
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    sxy = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = math.fsum((a - mx) ** 2 for a in x)
    syy = math.fsum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def brute_rmse(x, y):
    return math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(x, y)) / len(x))


def check_attack_invariants(observed, adv, touched, cfg, target):
    """Asserts the structural guarantees of one attack run; returns touched links."""
    A0, W0 = np.asarray(observed.adjacency), np.asarray(observed.weights)
    A1, W1 = np.asarray(adv.adjacency), np.asarray(adv.weights)
    assert np.array_equal(A0, A1), "adjacency changed"
    assert np.array_equal(W1, W1.T), "weights lost symmetry"
    changed = {(int(i), int(j)) for i, j in zip(*np.nonzero(np.triu(W0 != W1, 1)))}
    touched = {tuple(map(int, t)) for t in touched}
    assert changed <= touched, "weight changed on an untouched link"
    assert len(touched) <= cfg.budget, "budget exceeded"
    u, v = int(target[0]), int(target[1])
    for i, j in touched:
        assert i < j and A0[i, j], "touched a non-link"
        assert {i, j} != {u, v}, "touched the target"
        if cfg.mode == "local":
            assert {i, j} & {u, v}, "local attack left the target neighbourhood"
    lo, hi = cfg.clamp
    for i, j in touched:
        assert lo <= W1[i, j] <= hi, "weight outside clamp"
    return touched


def brute_cn_ranking(A, target, mode):
    """Admissible links sorted by common-neighbour count (desc) then (i, j)."""
    n = len(A)
    u, v = int(target[0]), int(target[1])
    rows = []
    for i in range(n):
        for j in range(i + 1, n):
            if not A[i, j] or {i, j} == {u, v}:
                continue
            if mode == "local" and not {i, j} & {u, v}:
                continue
            cn = sum(1 for k in range(n) if A[i, k] and A[j, k])
            rows.append((-cn, i, j))
    return [(i, j, -c) for c, i, j in sorted(rows)]
