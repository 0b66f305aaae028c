"""Experiment orchestration: repeated split/train/attack/evaluate runs and reporting."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import transfer as tr
from .attack import AttackConfig, TargetSpec, degree_budget, run_iga_lwp
from .baselines import BaselineConfig, rda_attack, sacn_attack
from .errors import ValidationError
from .graph import load_edge_list, normalize_weights, split_train_test
from .metrics import pcc_or_nan, rmse
from .sea import SeaConfig, SeaPredictor, train
from .synthetic import PROFILES, profile_graph

log = logging.getLogger(__name__)

ATTACKS = ("rda", "sacn", "iga")
ATTACK_LABELS = {"clean": "ORGIN", "rda": "RDA", "sacn": "SA-CN", "iga": "IGA-LWP"}
TRANSFER_MODELS = ("deepwalk", "node2vec", "gcn")


@dataclass
class ExperimentPlan:
    """Everything needed to reproduce a run.

    ``dataset`` is an edge-list path or ``synthetic:<profile>[@scale]`` with
    profile one of neural, celegans, netscience, ucnet.
    """

    dataset: str
    name: str = None
    format: str = "whitespace"
    test_fraction: float = 0.1
    num_targets: int = 10
    num_repeats: int = 10
    attacks: list = field(default_factory=lambda: list(ATTACKS))
    modes: list = field(default_factory=lambda: ["global", "local"])
    ratios: list = field(default_factory=lambda: [0.2, 0.4, 0.6, 0.8, 1.0])
    master_seed: int = 0
    sea: dict = field(default_factory=dict)
    iga: dict = field(default_factory=lambda: {"step_rule": "gradient_scaled", "step": 100.0, "distinct_only": True})
    baseline: dict = field(default_factory=lambda: {"alpha": 0.5, "direction_rule": "random_sign"})
    embedding: dict = field(default_factory=dict)
    gcn: dict = field(default_factory=dict)
    transfer_ratio: float = 0.5

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ValidationError("test_fraction must lie in (0, 1)")
        if self.num_repeats < 1 or self.num_targets < 1:
            raise ValidationError("num_repeats and num_targets must be >= 1")
        if any(not 0 < r <= 1 for r in self.ratios):
            raise ValidationError("ratios must lie in (0, 1]")
        unknown = set(self.attacks) - set(ATTACKS)
        if unknown:
            raise ValidationError(f"unknown attack(s): {sorted(unknown)}")
        if set(self.modes) - {"global", "local"}:
            raise ValidationError("modes must be drawn from {global, local}")
        if self.name is None:
            self.name = dataset_name(self.dataset)
        SeaConfig.from_dict(self.sea)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def from_file(cls, path, **overrides):
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        d.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(d)

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def repeat_seeds(self):
        ss = np.random.SeedSequence(self.master_seed)
        return [int(s) for s in ss.generate_state(self.num_repeats)]


def dataset_name(spec):
    if spec.startswith("synthetic:"):
        return spec.split(":", 1)[1]
    return Path(spec).stem


def load_dataset(spec, format="whitespace", seed=0):
    """Raw (un-normalised) graph from a path or a ``synthetic:`` spec."""
    if spec.startswith("synthetic:"):
        name, _, scale = spec.split(":", 1)[1].partition("@")
        if name not in PROFILES:
            raise ValidationError(f"unknown synthetic profile {name!r}; choose from {sorted(PROFILES)}")
        return profile_graph(name, seed=seed, scale=float(scale) if scale else 1.0)
    if not Path(spec).exists():
        raise ValidationError(f"dataset not found: {spec}")
    return load_edge_list(spec, format)


@dataclass
class EvalReport:
    y: list
    y_hat: list
    pcc: float
    rmse: float
    metadata: dict

    @classmethod
    def build(cls, y, y_hat, **metadata):
        y = [float(a) for a in y]
        y_hat = [float(a) for a in y_hat]
        p = pcc_or_nan(y, y_hat) if len(y) >= 2 else float("nan")
        return cls(y, y_hat, p, rmse(y, y_hat), metadata)

    def to_json(self):
        d = asdict(self)
        d["pcc"] = None if math.isnan(self.pcc) else self.pcc
        return d

    @classmethod
    def from_json(cls, d):
        pcc = float("nan") if d["pcc"] is None else d["pcc"]
        return cls(d["y"], d["y_hat"], pcc, d["rmse"], d["metadata"])


@dataclass
class RepeatState:
    """What one repeat leaves behind for the transfer stage."""

    repeat: int
    seed: int
    split: object
    targets: list
    k: list
    # (attack, mode, ratio) -> per-target list of {(i, j): new_weight}
    perturbations: dict = field(default_factory=dict)


class Appender:
    """Single writer for the JSON-lines report file."""

    def __init__(self, path):
        self.path = Path(path) if path else None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def write(self, report):
        if self.path:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(report.to_json()) + "\n")


def _changed(observed, adv):
    iu, iv = np.nonzero(np.triu(adv.weights != observed.weights, 1))
    return {(int(i), int(j)): float(adv.weights[i, j]) for i, j in zip(iu, iv)}


def sample_targets(split, num_targets, rng):
    k = min(num_targets, len(split.test_edges))
    idx = np.sort(rng.choice(len(split.test_edges), size=k, replace=False))
    return [split.test_edges[i] for i in idx]


def run_attack(kind, split, target, k_t, ratio, mode, plan, predictor, params, seed):
    budget = degree_budget(k_t, ratio)
    if kind == "iga":
        cfg = AttackConfig(mode=mode, iterations=budget, per_iteration=1, seed=seed, **plan.iga)
        adv, _ = run_iga_lwp(split, params, target, cfg, predictor=predictor)
    else:
        cfg = BaselineConfig(budget=budget, mode=mode, seed=seed, **plan.baseline)
        fn = rda_attack if kind == "rda" else sacn_attack
        adv, _ = fn(split, target, cfg)
    return adv


def run_repeat(plan, repeat, seed, graph, appender, reports, keep_ratio=None):
    sea_cfg = SeaConfig.from_dict({**plan.sea, "seed": seed % (2**31)})
    meta = {"dataset": plan.name, "repeat": repeat, "seed": seed, "config_hash": plan.config_hash()}
    split = split_train_test(graph, plan.test_fraction, seed=seed % (2**31))
    rng = np.random.default_rng(seed)
    targets = sample_targets(split, plan.num_targets, rng)
    spec = TargetSpec.from_split(split, targets)
    state = RepeatState(repeat, seed, split, targets, spec.k)

    t0 = time.time()
    params = train(split, sea_cfg)
    predictor = SeaPredictor.from_config(split.observed, params, sea_cfg)
    meta["train_seconds"] = round(time.time() - t0, 3)
    W0 = split.observed.weights

    def emit(report):
        reports.append(report)
        appender.write(report)

    test_pairs = [(u, v) for u, v, _ in split.test_edges]
    emit(EvalReport.build([w for *_, w in split.test_edges], predictor.predict(W0, test_pairs),
                          attack="clean_test", mode=None, ratio=0.0, **meta))
    y = [w for *_, w in targets]
    emit(EvalReport.build(y, predictor.predict(W0, [t[:2] for t in targets]),
                          attack="clean", mode=None, ratio=0.0, targets=[list(t[:2]) for t in targets],
                          k=spec.k, **meta))

    for mode in plan.modes:
        for ratio in plan.ratios:
            for attack in plan.attacks:
                cell = {"attack": attack, "mode": mode, "ratio": ratio}
                try:
                    preds, changes = [], []
                    for ti, (target, k_t) in enumerate(zip(targets, spec.k)):
                        adv = run_attack(attack, split, target, k_t, ratio, mode, plan, predictor, params,
                                         seed=(seed + 7919 * ti) % (2**31))
                        preds.append(predictor.predict(adv.weights, [target[:2]])[0])
                        changes.append(_changed(split.observed, adv))
                    if keep_ratio is None or math.isclose(ratio, keep_ratio):
                        state.perturbations[(attack, mode, ratio)] = changes
                    emit(EvalReport.build(y, preds, **cell, **meta,
                                          touched=[len(c) for c in changes]))
                except Exception as exc:  # one failing cell must not sink the run
                    log.exception("cell %s failed", cell)
                    emit(EvalReport([], [], float("nan"), float("nan"), {**cell, **meta, "error": repr(exc)}))
    return state


def run_experiment(plan, out_dir=None, keep_ratio=None):
    """All repeats of ``plan``; returns (reports, per-repeat states)."""
    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "plan.json").write_text(json.dumps({**plan.to_dict(), "config_hash": plan.config_hash()}, indent=1))
    appender = Appender(out / "reports.jsonl" if out else None)
    reports, states = [], []
    graph = normalize_weights(load_dataset(plan.dataset, plan.format, seed=plan.master_seed))
    for repeat, seed in enumerate(plan.repeat_seeds()):
        log.info("%s repeat %d/%d", plan.name, repeat + 1, plan.num_repeats)
        states.append(run_repeat(plan, repeat, seed, graph, appender, reports, keep_ratio))
    if out:
        write_summary(reports, out / "summary.csv")
    return reports, states


def combined_adversarial(observed, changes, clamp=(1e-6, 1 - 1e-6)):
    """Stack the per-target perturbations of one repeat into a single graph."""
    W = np.array(observed.weights)
    delta = np.zeros_like(W)
    for per_target in changes:
        for (i, j), new in per_target.items():
            delta[i, j] += new - observed.weights[i, j]
    delta = delta + delta.T
    touched = delta != 0
    W[touched] = np.clip(W[touched] + delta[touched], *clamp)
    return observed.with_weights(W)


def fit_transfer_model(model, graph, plan, seed):
    train_edges = graph.edge_list
    if model == "gcn":
        return tr.gcn_regressor(graph, tr.GcnConfig(**{**plan.gcn, "seed": seed}))
    make = tr.deepwalk_config if model == "deepwalk" else tr.node2vec_config
    return tr.embedding_predictor(graph, train_edges, make(**{**plan.embedding, "seed": seed}))


def run_transfer(plan, states, out_dir=None, mode="local", models=TRANSFER_MODELS):
    """Retrain each transfer model on clean and attacked graphs; score the targets."""
    out = Path(out_dir) if out_dir else None
    appender = Appender(out / "transfer.jsonl" if out else None)
    reports = []
    ratio = plan.transfer_ratio
    for st in states:
        observed = st.split.observed
        graphs = {"clean": observed}
        for attack in plan.attacks:
            key = (attack, mode, ratio)
            if key in st.perturbations:
                graphs[attack] = combined_adversarial(observed, st.perturbations[key])
        y = [w for *_, w in st.targets]
        pairs = [t[:2] for t in st.targets]
        for model in models:
            for cond, graph in graphs.items():
                meta = {"dataset": plan.name, "repeat": st.repeat, "seed": st.seed, "model": model,
                        "attack": cond, "mode": mode, "ratio": ratio, "config_hash": plan.config_hash()}
                try:
                    pred = fit_transfer_model(model, graph, plan, st.seed % (2**31))
                    rep = EvalReport.build(y, pred.predict(pairs), **meta)
                except Exception as exc:
                    log.exception("transfer cell %s failed", meta)
                    rep = EvalReport([], [], float("nan"), float("nan"), {**meta, "error": repr(exc)})
                reports.append(rep)
                appender.write(rep)
    if out:
        write_summary(reports, out / "transfer_summary.csv", group_keys=("model",))
    return reports


# --- aggregation -----------------------------------------------------------------

SUMMARY_COLUMNS = ["dataset", "attack", "mode", "ratio", "metric", "mean", "std", "n_runs"]


def aggregate(reports, group_keys=()):
    """Rows of mean/std per (dataset, [extra keys], attack, mode, ratio, metric).

    ``pcc`` is the mean of per-run correlations; ``pcc_pooled`` correlates all
    targets of all runs at once; ``rmse_se`` is the standard error of the
    per-run RMSE mean.
    """
    groups = {}
    for r in reports:
        m = r.metadata
        if "error" in m:
            continue
        key = (m["dataset"],) + tuple(m.get(k) for k in group_keys) + (m["attack"], m.get("mode"), m.get("ratio"))
        groups.setdefault(key, []).append(r)
    rows = []
    for key, reps in groups.items():
        base = dict(zip(("dataset",) + tuple(group_keys) + ("attack", "mode", "ratio"), key))
        rm = np.array([r.rmse for r in reps])
        pc = np.array([r.pcc for r in reps], dtype=float)
        pc = pc[~np.isnan(pc)]
        y = np.concatenate([r.y for r in reps])
        yh = np.concatenate([r.y_hat for r in reps])
        n = len(reps)
        rows.append({**base, "metric": "rmse", "mean": rm.mean(), "std": rm.std(ddof=1) if n > 1 else 0.0, "n_runs": n})
        rows.append({**base, "metric": "rmse_se", "mean": rm.std(ddof=1) / math.sqrt(n) if n > 1 else 0.0,
                     "std": 0.0, "n_runs": n})
        rows.append({**base, "metric": "pcc", "mean": pc.mean() if len(pc) else float("nan"),
                     "std": pc.std(ddof=1) if len(pc) > 1 else 0.0, "n_runs": len(pc)})
        rows.append({**base, "metric": "pcc_pooled", "mean": pcc_or_nan(y, yh) if len(y) > 1 else float("nan"),
                     "std": 0.0, "n_runs": n})
    return rows


def lookup(rows, **match):
    """Single ``mean`` from aggregate rows matching all keys."""
    hits = [r for r in rows if all(r.get(k) == v for k, v in match.items())]
    if len(hits) != 1:
        raise KeyError(f"{len(hits)} rows match {match}")
    return hits[0]["mean"]


def write_summary(reports, path, group_keys=()):
    rows = aggregate(reports, group_keys)
    cols = SUMMARY_COLUMNS[:1] + list(group_keys) + SUMMARY_COLUMNS[1:]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({c: r.get(c) for c in cols})
    return rows


def read_reports(path):
    with open(path, encoding="utf-8") as fh:
        return [EvalReport.from_json(json.loads(line)) for line in fh if line.strip()]


def format_table(rows, mode, ratio=0.5, datasets=None):
    """Text table in the layout of the global/local result tables."""
    datasets = datasets or sorted({r["dataset"] for r in rows})
    attacks = ["clean", "rda", "sacn", "iga"]
    head = ["Dataset"] + [f"RMSE {ATTACK_LABELS[a]}" for a in attacks] + [f"PCC {ATTACK_LABELS[a]}" for a in attacks]
    lines = ["\t".join(head)]
    for d in datasets:
        cells = [d]
        for metric in ("rmse", "pcc"):
            for a in attacks:
                try:
                    if a == "clean":
                        v = lookup(rows, dataset=d, attack=a, metric=metric)
                    else:
                        v = lookup(rows, dataset=d, attack=a, mode=mode, ratio=ratio, metric=metric)
                    cells.append(f"{v:.4f}")
                except KeyError:
                    cells.append("-")
        lines.append("\t".join(cells))
    return "\n".join(lines)
