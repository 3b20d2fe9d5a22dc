"""Command-line interface.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 budget funds no
judgments at any requested topic count (``simulate``).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__, kernels
from .budget import (CONSTANT, ERROR_MODELS, NO_ERROR, SPEED_MODELS, BudgetScenario, read_key_values,
                     simulate_curve, write_curve)
from .collection import DataError, parse_qrels, parse_runs, read_groups, run_paths, validate, write_qrels, write_runs
from .features import CORE_NAMES, GROUPS
from .l2r import DEFAULT_LEAF_GRID, TrainingData, generate_training_data, merge_training_data, train_mart, tune_leaves
from .mart import MartModel
from .metrics import MAP, rank_systems
from .reusability import loo_reusability
from .selection import Evaluator, SelectionTrace, greedy_oracle_select, l2r_select, random_taus
from .synthetic import synthetic_collection

logger = logging.getLogger("topicsel")

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_BUDGET = 4


class ConfigError(Exception):
    pass


def _digest(path: str | os.PathLike) -> str:
    p = Path(path)
    h = hashlib.sha256()
    files = run_paths(p) if p.is_dir() else [p]
    for f in files:
        h.update(f.name.encode())
        h.update(b"\0")
        h.update(f.read_bytes())
    return h.hexdigest()[:16]


INPUT_KEYS = ("runs", "qrels", "train", "model", "trace", "groups", "tuning_runs", "tuning_qrels")
SKIP_KEYS = {"out", "func", "threads", "log_level", "config", "command"}


def provenance(args: argparse.Namespace) -> dict:
    """Config, seed and tool version; inputs are recorded by name and content hash."""
    prov: dict = {"tool": "topicsel", "version": __version__, "command": args.command}
    cfg = {}
    for key, val in sorted(vars(args).items()):
        if key in SKIP_KEYS or val is None:
            continue
        if key in INPUT_KEYS:
            vals = val if isinstance(val, list) else [val]
            cfg[key] = [f"{Path(v).name}@{_digest(v)}" for v in vals]
        else:
            cfg[key] = val
    prov["config"] = cfg
    return prov


def header_lines(args: argparse.Namespace) -> list[str]:
    prov = provenance(args)
    return [f"tool={prov['tool']} version={prov['version']} command={prov['command']}",
            "config=" + json.dumps(prov["config"], sort_keys=True)]


def _int_list(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            lo, hi, *step = (int(x) for x in part.split(":"))
            out.extend(range(lo, hi + 1, step[0] if step else 1))
        elif part:
            out.append(int(part))
    return out


def _mask_list(text: str | None) -> list[str] | None:
    if not text:
        return None
    keys = [k.strip() for k in text.split(",") if k.strip()]
    bad = [k for k in keys if k not in CORE_NAMES and k not in ("t",) + GROUPS]
    if bad:
        raise ConfigError(f"unknown feature mask entries {bad}")
    return keys


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, [])]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    for n in names:
        if n in INPUT_KEYS:
            vals = getattr(args, n)
            for v in vals if isinstance(vals, list) else [vals]:
                if not Path(v).exists():
                    raise ConfigError(f"--{n.replace('_', '-')}: {v} does not exist")


def _load_runs(path, args):
    return parse_runs(run_paths(path), max_depth=args.max_depth, threads=args.threads)


def _out_path(args) -> Path | None:
    if args.out is None:
        return None
    p = Path(args.out)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


# commands


def cmd_synth(args) -> int:
    _require(args, "out", "seed")
    runs, qrels = synthetic_collection(args.topics, args.systems, args.seed, depth=args.pool_depth)
    out = Path(args.out)
    write_runs(runs, out / "runs")
    write_qrels(qrels, out / "qrels.txt")
    print(f"wrote {runs.n_systems} runs x {len(runs.topics)} topics to {out}")
    return 0


def cmd_validate(args) -> int:
    _require(args, "runs")
    runs = _load_runs(args.runs, args)
    qrels = parse_qrels(args.qrels) if args.qrels else None
    report = validate(runs, qrels).to_dict()
    report["summary"] = {"systems": runs.n_systems, "topics": len(runs.topics),
                         "judgments": len(qrels) if qrels is not None else None}
    report["provenance"] = provenance(args)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    out = _out_path(args)
    if out is not None:
        out.write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_gen_train(args) -> int:
    _require(args, "runs", "qrels", "seed", "out")
    if len(args.runs) != len(args.qrels):
        raise ConfigError("give one --qrels per --runs")
    parts = []
    for k, (rp, qp) in enumerate(zip(args.runs, args.qrels)):
        runs, qrels = _load_runs(rp, args), parse_qrels(qp)
        cid = Path(rp).name if Path(rp).name != "runs" else Path(rp).parent.name or f"c{k}"
        data = generate_training_data(runs, qrels, args.W, args.K, (args.seed, k), collection_id=cid,
                                      depth=args.pool_depth, threads=args.threads)
        logger.info("%s: %d records", cid, len(data))
        parts.append(data)
    data = merge_training_data(parts)
    data.to_csv(_out_path(args), header_lines(args))
    print(f"wrote {len(data)} records to {args.out}")
    return 0


def cmd_train(args) -> int:
    _require(args, "train", "out")
    mask = _mask_list(args.mask)
    data = TrainingData.from_csv(args.train)
    model = train_mart(data, args.trees, args.leaves, args.shrinkage, args.min_leaf, mask=mask)
    model.save(_out_path(args), provenance(args))
    print(f"trained {len(model.trees)} trees, final training MSE {model.train_mse[-1]:.6g}")
    return 0


def cmd_tune(args) -> int:
    _require(args, "train", "tuning_runs", "tuning_qrels")
    mask = _mask_list(args.mask)
    data = TrainingData.from_csv(args.train)
    runs, qrels = _load_runs(args.tuning_runs, args), parse_qrels(args.tuning_qrels)
    grid = _int_list(args.grid) if args.grid else list(DEFAULT_LEAF_GRID)
    best, report = tune_leaves(data, runs, qrels, grid, num_trees=args.trees, shrinkage=args.shrinkage,
                               steps=args.steps, depth=args.pool_depth, mask=mask)
    out = _out_path(args)
    if out is not None:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            for line in header_lines(args):
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("num_leaves", "mean_tau"))
            for row in report:
                w.writerow((row["num_leaves"], repr(row["mean_tau"])))
    for row in report:
        print(f"leaves={row['num_leaves']:3d} mean_tau={row['mean_tau']:.4f}")
    print(f"best num_leaves={best}")
    return 0


def cmd_select(args) -> int:
    _require(args, "runs", "out")
    runs = _load_runs(args.runs, args)
    qrels = parse_qrels(args.qrels) if args.qrels else None
    M = args.M if args.M is not None else len(runs.topics)
    if not 1 <= M <= len(runs.topics):
        raise ConfigError(f"-M must be in [1, {len(runs.topics)}]")
    if args.strategy == "oracle":
        _require(args, "qrels")
        trace = greedy_oracle_select(runs, qrels, M, Evaluator(runs, qrels, args.pool_depth))
    elif args.strategy == "l2r":
        _require(args, "model")
        trace = l2r_select(runs, MartModel.load(args.model), M, qrels, depth=args.pool_depth,
                           mask=_mask_list(args.mask))
    else:
        _require(args, "seed")
        from .metrics import make_rng
        perm = make_rng((args.seed, 0)).permutation(len(runs.topics))[:M]
        chosen = [runs.topics[k] for k in perm]
        taus = Evaluator(runs, qrels, args.pool_depth).trajectory(chosen) if qrels is not None else ()
        trace = SelectionTrace(tuple(chosen), taus, "random", args.seed)
    trace.to_csv(_out_path(args), header_lines(args))
    if trace.tau_after_step:
        print(f"{args.strategy}: {M} topics, final tau {trace.tau_after_step[-1]:.4f}")
    else:
        print(f"{args.strategy}: {M} topics")
    return 0


def cmd_eval(args) -> int:
    _require(args, "runs", "qrels")
    if args.trace:
        _require(args, "trace")
    runs, qrels = _load_runs(args.runs, args), parse_qrels(args.qrels)
    ev = Evaluator(runs, qrels, args.pool_depth)
    topics = list(runs.topics)
    trace = SelectionTrace.from_csv(args.trace) if args.trace else None
    if trace is not None and args.M:
        topics = list(trace.selected[: args.M])
    lines = [f"# {h}" for h in header_lines(args)]
    ranking = rank_systems(runs, qrels, topics, MAP, cutoff=args.pool_depth)
    lines.append("rank,system,map")
    lines += [f"{k},{s},{v:.6f}" for k, (s, v) in enumerate(ranking.entries, start=1)]
    if trace is not None:
        lines.append("")
        lines.append("step,topic,tau")
        for k, (t, tau) in enumerate(zip(trace.selected, ev.trajectory(trace.selected)), start=1):
            lines.append(f"{k},{t},{tau:.6f}")
    if args.random_trials:
        _require(args, "seed")
        lines.append("")
        lines.append("M,random_mean_tau,random_std_tau")
        for M in (_int_list(args.topic_counts) if args.topic_counts else range(1, len(runs.topics) + 1)):
            taus = random_taus(runs, qrels, M, args.random_trials, args.seed, evaluator=ev)
            lines.append(f"{M},{taus.mean():.6f},{taus.std():.6f}")
    text = "\n".join(lines) + "\n"
    out = _out_path(args)
    if out is not None:
        out.write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def _scenario(args) -> BudgetScenario:
    if args.budget_seconds is None and args.budget_hours is None:
        raise ConfigError("give --budget-hours or --budget-seconds")
    seconds = args.budget_seconds if args.budget_seconds is not None else int(round(args.budget_hours * 3600))
    try:
        return BudgetScenario(seconds, args.tdc, args.speed, args.error, args.repeats, args.flip_repeats)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_simulate(args) -> int:
    _require(args, "runs", "qrels", "seed", "out")
    scenario = _scenario(args)
    runs, qrels = _load_runs(args.runs, args), parse_qrels(args.qrels)
    trace = None
    if args.trace:
        _require(args, "trace")
        trace = SelectionTrace.from_csv(args.trace)
    elif args.strategy != "random":
        raise ConfigError("give --trace, or --strategy random")
    counts = _int_list(args.topic_counts) if args.topic_counts else list(
        range(1, (len(trace.selected) if trace else len(runs.topics)) + 1))
    try:
        rows = simulate_curve(runs, qrels, scenario, trace, counts, args.seed, depth=args.pool_depth,
                              random_trials=args.random_trials)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    write_curve(rows, _out_path(args), header_lines(args))
    for r in rows:
        print(f"n={r.n_topics:4d} quota={r.quota:5d} tau={r.mean_tau:.4f}±{r.std_tau:.4f}"
              + (" INSUFFICIENT" if r.insufficient else ""))
    if rows and all(r.insufficient for r in rows):
        logger.error("budget funds no judgments at any requested topic count")
        return EXIT_BUDGET
    return 0


def cmd_reusability(args) -> int:
    _require(args, "runs", "qrels", "trace", "seed")
    runs, qrels = _load_runs(args.runs, args), parse_qrels(args.qrels)
    trace = SelectionTrace.from_csv(args.trace)
    P = list(trace.selected[: args.M]) if args.M else list(trace.selected)
    groups = read_groups(args.groups, runs)
    if args.quota is not None:
        quota = args.quota
    else:
        quota = _scenario(args).quota(len(P))
        if quota < 1:
            logger.error("budget funds no judgments for %d topics", len(P))
            return EXIT_BUDGET
    try:
        mean, std = loo_reusability(runs, qrels, P, groups, quota, args.repeats, args.seed, depth=args.pool_depth)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    text = "\n".join([f"# {h}" for h in header_lines(args)]
                     + ["n_topics,quota,mean_tau,std_tau", f"{len(P)},{quota},{mean!r},{std!r}"]) + "\n"
    out = _out_path(args)
    if out is not None:
        out.write_text(text, encoding="utf-8")
    print(f"leave-one-group-out tau {mean:.4f} ± {std:.4f} ({len(P)} topics, {quota} judgments/topic)")
    return 0


# parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; command-line flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--pool-depth", type=int, default=100)
    p.add_argument("--max-depth", type=int, default=1000, help="run lists are truncated to this depth on load")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out")
    p.add_argument("--log-level", default="WARNING")


def _budget_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--budget-hours", type=float)
    p.add_argument("--budget-seconds", type=int)
    p.add_argument("--tdc", type=int, default=0, help="topic development cost, seconds")
    p.add_argument("--speed", choices=SPEED_MODELS, default=CONSTANT)
    p.add_argument("--error", choices=ERROR_MODELS, default=NO_ERROR)
    p.add_argument("--repeats", type=int, default=20, help="statAP sampling repeats")
    p.add_argument("--flip-repeats", type=int, default=50)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topicsel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"topicsel {__version__} ({kernels.BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic collection (runs/ and qrels.txt)")
    _common(p)
    p.add_argument("--topics", type=int, default=8)
    p.add_argument("--systems", type=int, default=5)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="parse runs/qrels and print a JSON validation report")
    _common(p)
    p.add_argument("--runs")
    p.add_argument("--qrels")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen-train", help="generate L2R training data from judged collections")
    _common(p)
    p.add_argument("--runs", action="append", default=[])
    p.add_argument("--qrels", action="append", default=[])
    p.add_argument("--W", "-W", type=int, default=200, help="random scenarios per subset size")
    p.add_argument("--K", "-K", type=int, default=50, help="number of label levels")
    p.set_defaults(func=cmd_gen_train)

    for name, func, helptext in (("train", cmd_train, "train a MART model"),
                                 ("tune", cmd_tune, "choose the leaf count on a tuning collection")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--train")
        p.add_argument("--trees", type=int, default=50)
        p.add_argument("--shrinkage", type=float, default=0.1)
        p.add_argument("--mask", help="comma-separated core features or groups to zero out (ablation)")
        if name == "train":
            p.add_argument("--leaves", type=int, default=10)
            p.add_argument("--min-leaf", type=int, default=1)
        else:
            p.add_argument("--tuning-runs")
            p.add_argument("--tuning-qrels")
            p.add_argument("--grid", help="leaf counts, e.g. 2:50:2 or 2,4,8")
            p.add_argument("--steps", type=int, default=50)
        p.set_defaults(func=func)

    p = sub.add_parser("select", help="select topics and write a trace CSV")
    _common(p)
    p.add_argument("--runs")
    p.add_argument("--qrels")
    p.add_argument("--model")
    p.add_argument("--strategy", choices=("oracle", "l2r", "random"), default="l2r")
    p.add_argument("-M", "--M", type=int, dest="M")
    p.add_argument("--mask")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("eval", help="print MAP ranking, trace tau and random baseline tables")
    _common(p)
    p.add_argument("--runs")
    p.add_argument("--qrels")
    p.add_argument("--trace")
    p.add_argument("-M", "--M", type=int, dest="M")
    p.add_argument("--random-trials", type=int, default=0)
    p.add_argument("--topic-counts")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="fixed-budget tau curve (statAP with per-topic quotas)")
    _common(p)
    _budget_flags(p)
    p.add_argument("--runs")
    p.add_argument("--qrels")
    p.add_argument("--trace")
    p.add_argument("--strategy", choices=("trace", "random"), default="trace")
    p.add_argument("--random-trials", type=int)
    p.add_argument("--topic-counts", help="e.g. 5,10,20 or 5:100:5")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reusability", help="leave-one-group-out tau of a selected subset")
    _common(p)
    _budget_flags(p)
    p.add_argument("--runs")
    p.add_argument("--qrels")
    p.add_argument("--trace")
    p.add_argument("-M", "--M", type=int, dest="M")
    p.add_argument("--groups", help="CSV system_id,group_id (default: one group per run)")
    p.add_argument("--quota", type=int, help="judgments per topic (default: derived from the budget flags)")
    p.set_defaults(func=cmd_reusability)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    if not Path(args.config).is_file():
        raise ConfigError(f"--config: {args.config} does not exist")
    values = read_key_values(args.config)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        action = known.get(key)
        if action is None or key in ("config", "help"):
            raise ConfigError(f"unknown config key {key!r} for {args.command}")
        val = action.type(raw) if action.type else raw
        if action.choices and val not in action.choices:
            raise ConfigError(f"config key {key}: {val!r} not in {list(action.choices)}")
        defaults[key] = [val] if isinstance(action, argparse._AppendAction) else val
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SystemExit as exc:  # argparse
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
