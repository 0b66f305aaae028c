"""Command-line entry point: ``iga-lwp {train,attack,evaluate,sweep,transfer,report}``.

Every subcommand takes ``--config`` (a JSON experiment plan), ``--seed`` and
``--out`` (a directory).  Exit status is 0 on success, 1 on invalid input and
2 on runtime or training failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiment as ex
from .attack import AttackConfig, TargetSpec, degree_budget, run_iga_lwp
from .baselines import BaselineConfig, rda_attack, sacn_attack
from .errors import ValidationError
from .graph import load_edge_list, normalize_weights, save_edge_list, split_train_test
from .metrics import pcc_or_nan, rmse
from .sea import SeaConfig, SeaPredictor, load_checkpoint, save_checkpoint, train

log = logging.getLogger("iga_lwp")


def build_plan(args, **overrides):
    d = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            d = json.load(fh)
    if getattr(args, "dataset", None):
        d["dataset"] = args.dataset
        d.pop("name", None)
    if args.seed is not None:
        d["master_seed"] = args.seed
    d.update({k: v for k, v in overrides.items() if v is not None})
    if "dataset" not in d:
        raise ValidationError("no dataset given (use --dataset or a config file with 'dataset')")
    return ex.ExperimentPlan.from_dict(d)


def prepare_split(plan, split_seed):
    graph = normalize_weights(ex.load_dataset(plan.dataset, plan.format, seed=plan.master_seed))
    return split_train_test(graph, plan.test_fraction, split_seed)


def out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def dump(obj, path=None):
    text = json.dumps(obj, indent=1)
    if path:
        Path(path).write_text(text + "\n")
    print(text)


def load_trained(args):
    path = Path(args.checkpoint or Path(args.out) / "sea.json")
    if not path.exists():
        raise ValidationError(f"checkpoint not found: {path} (run 'train' first)")
    cfg, params, split_seed = load_checkpoint(path)
    with open(path, encoding="utf-8") as fh:
        plan = ex.ExperimentPlan.from_dict(json.load(fh)["extra"]["plan"])
    split = prepare_split(plan, split_seed)
    return plan, cfg, params, split


def scores(y, y_hat):
    return {"n": len(y), "rmse": rmse(y, y_hat), "pcc": pcc_or_nan(y, y_hat) if len(y) > 1 else None}


def cmd_train(args):
    plan = build_plan(args)
    seed = plan.master_seed
    split = prepare_split(plan, seed)
    cfg = SeaConfig.from_dict({"seed": seed, **plan.sea})
    params = train(split, cfg)
    out = out_dir(args)
    save_checkpoint(out / "sea.json", cfg, params, split_seed=seed, extra={"plan": plan.to_dict()})
    pred = SeaPredictor.from_config(split.observed, params, cfg)
    y = [w for *_, w in split.test_edges]
    y_hat = pred.predict(split.observed.weights, [t[:2] for t in split.test_edges])
    dump({"checkpoint": str(out / "sea.json"), "final_loss": params.loss_trace[-1],
          "test": scores(y, y_hat)}, out / "train.json")


def pick_target(split, args):
    if args.target:
        u, v = args.target
        hits = [t for t in split.test_edges if {t[0], t[1]} == {u, v}]
        if not hits:
            raise ValidationError(f"({u}, {v}) is not a withheld test link")
        return hits[0]
    index = args.target_index or 0
    if not 0 <= index < len(split.test_edges):
        raise ValidationError(f"target index must lie in [0, {len(split.test_edges)})")
    return split.test_edges[index]


def cmd_attack(args):
    plan, cfg, params, split = load_trained(args)
    target = pick_target(split, args)
    k_t = TargetSpec.from_split(split, [target]).k[0]
    budget = args.budget or degree_budget(k_t, args.ratio)
    seed = plan.master_seed if args.seed is None else args.seed
    pred = SeaPredictor.from_config(split.observed, params, cfg)
    if args.attack == "iga":
        opts = dict(plan.iga)
        if args.step_rule:
            opts["step_rule"] = args.step_rule
        if args.step is not None:
            opts["step"] = args.step
        acfg = AttackConfig(mode=args.mode, iterations=budget, seed=seed, **opts)
        adv, trace = run_iga_lwp(split, params, target, acfg, predictor=pred)
        doc = trace.to_json()
    else:
        bcfg = BaselineConfig(budget=budget, mode=args.mode, seed=seed, **plan.baseline)
        adv, trace = (rda_attack if args.attack == "rda" else sacn_attack)(split, target, bcfg)
        doc = {"target": list(target), "touched_links": [list(t) for t in trace.touched_links],
               "steps": trace.steps, "shortfall": trace.shortfall}
    out = out_dir(args)
    save_edge_list(adv, out / "adversarial.txt")
    with open(out / "trace.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
    before = pred.predict(split.observed.weights, [target[:2]])[0]
    after = pred.predict(adv.weights, [target[:2]])[0]
    dump({"target": list(target), "k_t": k_t, "budget": budget, "attack": args.attack, "mode": args.mode,
          "touched": len(trace.touched_links), "prediction_before": before, "prediction_after": after,
          "graph": str(out / "adversarial.txt"), "trace": str(out / "trace.json")})


def aligned_weights(path, observed):
    """Weights of an exported graph re-indexed onto ``observed``'s nodes."""
    g = load_edge_list(path)
    index = {int(label): i for i, label in enumerate(observed.node_ids)}
    missing = [label for label in g.node_ids if int(label) not in index]
    if missing:
        raise ValidationError(f"{path} has nodes unknown to the observed graph: {missing[:5]}")
    pos = np.array([index[int(label)] for label in g.node_ids])
    W = np.zeros(observed.weights.shape)
    W[np.ix_(pos, pos)] = g.weights
    if not np.array_equal(W > 0, np.asarray(observed.adjacency, dtype=bool)):
        raise ValidationError(f"{path} does not share the observed topology")
    return W


def cmd_evaluate(args):
    plan, cfg, params, split = load_trained(args)
    W = aligned_weights(args.graph, split.observed) if args.graph else split.observed.weights
    pred = SeaPredictor.from_config(split.observed, params, cfg)
    single = args.target or args.target_index is not None
    edges = [pick_target(split, args)] if single else split.test_edges
    y = [w for *_, w in edges]
    y_hat = pred.predict(W, [t[:2] for t in edges])
    dump({"graph": args.graph or "observed", **scores(y, y_hat)}, out_dir(args) / "evaluate.json")


def table_ratio(requested, rows):
    """``requested`` or else the available ratio closest to 0.5."""
    if requested is not None:
        return requested
    ratios = sorted({r["ratio"] for r in rows if r.get("mode")})
    return min(ratios, key=lambda r: abs(r - 0.5)) if ratios else 0.5


def print_tables(rows, modes, requested):
    ratio = table_ratio(requested, rows)
    for mode in modes:
        print(f"[{mode}, ratio {ratio}]")
        print(ex.format_table(rows, mode, ratio))


def cmd_sweep(args):
    plan = build_plan(args, num_repeats=args.repeats, num_targets=args.targets)
    reports, _ = ex.run_experiment(plan, args.out)
    print_tables(ex.aggregate(reports), plan.modes, args.table_ratio)


def cmd_transfer(args):
    plan = build_plan(args, num_repeats=args.repeats, num_targets=args.targets)
    ratio = plan.transfer_ratio
    plan.ratios, plan.modes = [ratio], [args.mode]
    reports, states = ex.run_experiment(plan, args.out, keep_ratio=ratio)
    rep = ex.run_transfer(plan, states, args.out, mode=args.mode)
    rows = ex.aggregate(rep, ("model",))
    print("model\t" + "\t".join(ex.ATTACK_LABELS[a] for a in ["clean"] + plan.attacks))
    for model in ex.TRANSFER_MODELS:
        vals = []
        for a in ["clean"] + plan.attacks:
            try:
                vals.append(f"{ex.lookup(rows, model=model, attack=a, metric='rmse'):.4f}")
            except KeyError:
                vals.append("-")
        print(model + "\t" + "\t".join(vals))


def cmd_report(args):
    out = Path(args.out)
    path = out / "reports.jsonl"
    if not path.exists():
        raise ValidationError(f"no reports found at {path}")
    reports = ex.read_reports(path)
    rows = ex.write_summary(reports, out / "summary.csv")
    modes = [m for m in ("global", "local") if any(r.get("mode") == m for r in rows)]
    print_tables(rows, modes, args.table_ratio)
    tpath = out / "transfer.jsonl"
    if tpath.exists():
        ex.write_summary(ex.read_reports(tpath), out / "transfer_summary.csv", group_keys=("model",))
    print(f"summary written to {out / 'summary.csv'}")


def parser():
    p = argparse.ArgumentParser(prog="iga-lwp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--config", help="JSON experiment plan")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--out", default="runs/latest", help="output directory")
        sp.set_defaults(fn=fn)
        return sp

    def with_dataset(sp):
        sp.add_argument("--dataset", help="edge-list path or synthetic:<profile>[@scale]")
        return sp

    def with_target(sp):
        sp.add_argument("--checkpoint", help="SEA checkpoint (default <out>/sea.json)")
        sp.add_argument("--target", type=int, nargs=2, metavar=("U", "V"), help="withheld link to attack")
        sp.add_argument("--target-index", type=int, help="index into the test links (default 0)")
        return sp

    with_dataset(add("train", cmd_train, "train the SEA surrogate on one split"))

    sp = with_target(add("attack", cmd_attack, "attack one target link"))
    sp.add_argument("--attack", choices=ex.ATTACKS, default="iga")
    sp.add_argument("--mode", choices=("global", "local"), default="global")
    sp.add_argument("--ratio", type=float, default=0.5, help="budget as a fraction of k_t")
    sp.add_argument("--budget", type=int, help="explicit link budget (overrides --ratio)")
    sp.add_argument("--step-rule", choices=("gradient_scaled", "fixed"))
    sp.add_argument("--step", type=float)

    sp = with_target(add("evaluate", cmd_evaluate, "score the surrogate on a clean or attacked graph"))
    sp.add_argument("--graph", help="attacked edge list exported by 'attack'")

    for name, fn, help in (("sweep", cmd_sweep, "full attack x mode x ratio experiment"),
                           ("transfer", cmd_transfer, "transferability to DeepWalk, Node2Vec and GCN")):
        sp = with_dataset(add(name, fn, help))
        sp.add_argument("--repeats", type=int)
        sp.add_argument("--targets", type=int)
        sp.add_argument("--table-ratio", type=float, help="ratio shown in the tables")
        if name == "transfer":
            sp.add_argument("--mode", choices=("global", "local"), default="local")

    sp = add("report", cmd_report, "aggregate reports.jsonl in --out")
    sp.add_argument("--table-ratio", type=float, help="ratio shown in the tables")
    return p


def main(argv=None):
    args = parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.fn(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
