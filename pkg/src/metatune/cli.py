"""Command-line surface: reproducible runs over a corpus directory.

Split plans are addressed as "<mode>:<eval_dataset_id>" (for example
"unseen:ag_news"): the mode picks the exclusion rule, the dataset names the
plan. Every command that writes files also writes a manifest next to them;
timestamps live only in the manifest, so outputs are byte-reproducible for
native scorers.

Exit codes (stable for scripting):
    0  success
    1  validation or verdict failure
    2  usage error
    3  I/O or protocol error
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .corpus import CorpusError, load_corpus, validate_corpus
from .external import ExternalScorer, ProtocolError
from .grouping import SplitError, make_splits, plan_for, write_splits
from .metrics import (
    ALL_WEIGHTINGS,
    DEFAULT_THRESHOLDS,
    MetricsError,
    accuracy,
    delta_stats,
    description_aucs,
    ensemble_descriptions,
    read_eval_csv,
    relative_auc_curve,
    resolve_label,
    scatter_data,
    score_plan,
    verdict,
    weighted_f1,
    write_eval_csv,
    write_scatter_csv,
    write_stats_json,
)
from .sampler import Sampler, SamplerError
from .scorers import NativeScorer, ScorerError, TrainRunConfig, run_meta_tuning
from .synth import SynthError, generate_synthetic_corpus, load_synth_config

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _fail(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def make_scorer(spec: str, checkpoint: str | None = None, seed: int = 0):
    """Build a scorer from its CLI spec: `native` or `external:<command>`."""
    if spec == "native":
        scorer = NativeScorer(salt=seed)
    elif spec.startswith("external:"):
        scorer = ExternalScorer.connect(spec[len("external:"):])
    else:
        raise ScorerError(f"unknown scorer {spec!r} (want native or external:<cmd>)")
    if checkpoint:
        scorer.load(checkpoint)
    return scorer


def _write_manifest(target: Path, command: str, args: argparse.Namespace,
                    outputs: list[str]) -> None:
    if target.is_dir():
        path = target / "manifest.json"
    else:
        path = target.parent / (target.name + ".manifest.json")
    config = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in sorted(vars(args).items())
        if k != "func" and not k.startswith("_")
    }
    doc = {
        "command": command,
        "config": config,
        "outputs": outputs,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# subcommands

def cmd_validate(args) -> int:
    corpus = load_corpus(args.corpus)
    report = validate_corpus(corpus)
    print(report.format())
    return EXIT_OK


def cmd_split(args) -> int:
    corpus = load_corpus(args.corpus)
    plans = make_splits(corpus, args.mode)
    out = Path(args.out)
    write_splits(plans, out)
    _write_manifest(out, "split", args, [out.name])
    print(f"wrote {len(plans)} {args.mode} plans to {out}")
    return EXIT_OK


def cmd_sample_preview(args) -> int:
    corpus = load_corpus(args.corpus)
    plan = plan_for(corpus, args.split_id)
    sampler = Sampler(corpus, plan, seed=args.seed)
    for inst in sampler.next_batch(args.n):
        print(json.dumps({
            "dataset_id": inst.dataset_id,
            "description_id": inst.description_id,
            "example_id": inst.example_id,
            "context": inst.context,
            "question": inst.question,
            "answer": inst.answer,
        }, ensure_ascii=False))
    return EXIT_OK


def cmd_train(args) -> int:
    corpus = load_corpus(args.corpus)
    plan = plan_for(corpus, args.split_id)
    sampler = Sampler(corpus, plan, seed=args.seed)
    scorer = make_scorer(args.scorer, seed=args.seed)
    config = TrainRunConfig(
        steps=args.steps,
        batch_size=args.batch,
        checkpoint_every=args.checkpoint_every,
        seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        series = run_meta_tuning(scorer, sampler, config, out_dir=out)
    finally:
        if isinstance(scorer, ExternalScorer):
            scorer.close()
    _write_manifest(out, "train", args, [c.path.name for c in series.checkpoints])
    last_loss = series.losses[-1] if series.losses else float("nan")
    print(
        f"trained {series.steps_completed} steps"
        + (" (pool exhausted)" if series.exhausted else "")
        + f", final batch loss {last_loss:.6f}"
    )
    for ckpt in series.checkpoints:
        print(f"checkpoint step {ckpt.step}: {ckpt.path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    corpus = load_corpus(args.corpus)
    plan = plan_for(corpus, args.split_id)
    scorer = make_scorer(args.scorer, checkpoint=args.checkpoint, seed=args.seed)
    try:
        table = score_plan(scorer, corpus, plan, workers=args.workers)
    finally:
        if isinstance(scorer, ExternalScorer):
            scorer.close()
    if args.ensemble:
        table = ensemble_descriptions(table)
    aucs, warnings = description_aucs(table)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_eval_csv(aucs, out / "eval.csv")
    _write_manifest(out, "eval", args, ["eval.csv"])
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    if aucs:
        mean = sum(a.auc for a in aucs) / len(aucs)
        print(f"{plan.eval_dataset_id}: mean AUC {mean:.4f} over {len(aucs)} descriptions")
    print(f"wrote {out / 'eval.csv'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    base = read_eval_csv(args.base)
    cand = read_eval_csv(args.cand)
    thresholds = tuple(args.thresholds)
    weightings = ALL_WEIGHTINGS if args.weighting == "all" else (args.weighting,)
    blocks = [delta_stats(base, cand, w, thresholds) for w in weightings]
    verdict_result = verdict(base, cand, thresholds) if args.weighting == "all" else None
    out = Path(args.out)
    write_stats_json(blocks, out, verdict_result)
    outputs = [out.name]
    if args.scatter:
        rows = scatter_data(base, cand)
        write_scatter_csv(rows, args.scatter)
        from .report import plot_scatter  # matplotlib import deferred to use

        png = Path(args.scatter).with_suffix(".png")
        plot_scatter(rows, png)
        outputs += [Path(args.scatter).name, png.name]
    _write_manifest(out, "compare", args, outputs)
    for block in blocks:
        print(
            f"{block.weighting}: E[delta]={block.e_delta:+.4f} "
            f"std={block.std_delta:.4f} n={block.n_descriptions}"
        )
    if verdict_result is not None:
        if verdict_result.better:
            print("verdict: candidate is better (all 12 conditions hold)")
        else:
            print("verdict: not better")
            for cond in verdict_result.failed_conditions:
                print(f"  failed: {cond}")
            return EXIT_FAIL
    return EXIT_OK


def cmd_benchmark(args) -> int:
    corpus = load_corpus(args.corpus)
    plan = plan_for(corpus, args.split_id)
    ds = corpus.dataset_by_id(plan.eval_dataset_id)
    scorer = make_scorer(args.scorer, checkpoint=args.checkpoint, seed=args.seed)
    try:
        table = score_plan(scorer, corpus, plan, workers=args.workers)
    finally:
        if isinstance(scorer, ExternalScorer):
            scorer.close()
    # one probability per label: average over the label's descriptions
    ensembled = ensemble_descriptions(table)
    by_example: dict[str, dict[str, float]] = {}
    for row in ensembled.rows:
        by_example.setdefault(row.example_id, {})[row.label_id] = row.p_yes
    preds, golds = [], []
    skipped = 0
    for ex in ds.examples:
        p_by_label = by_example.get(ex.id)
        if not p_by_label:
            continue
        pred = resolve_label(p_by_label, args.yes_threshold, args.null_label)
        if pred in ex.gold_labels:
            gold = pred
        elif ex.gold_labels:
            gold = min(ex.gold_labels)
        elif args.null_label is not None:
            gold = args.null_label
        else:
            skipped += 1
            continue
        preds.append(pred)
        golds.append(gold)
    value = weighted_f1(preds, golds) if args.metric == "weighted-f1" else accuracy(preds, golds)
    doc = {
        "dataset": ds.id,
        "metric": args.metric,
        "value": value,
        "n_examples": len(preds),
        "n_skipped": skipped,
        "yes_threshold": args.yes_threshold,
        "null_label": args.null_label,
    }
    if args.out:
        out = Path(args.out)
        out.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8", newline="\n")
        _write_manifest(out, "benchmark", args, [out.name])
    print(f"{ds.id}: {args.metric} = {value:.4f} over {len(preds)} examples")
    return EXIT_OK


def cmd_curve(args) -> int:
    evals = []
    for part in args.evals.split(","):
        step_str, sep, path = part.partition(":")
        if not sep:
            raise MetricsError(f"bad --evals entry {part!r} (want <step>:<file>)")
        aucs = read_eval_csv(path)
        if not aucs:
            raise MetricsError(f"{path}: empty eval table")
        evals.append((int(step_str), sum(a.auc for a in aucs) / len(aucs)))
    result = relative_auc_curve(evals, reference_step=args.relative_step)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    by_step = dict(evals)
    with open(out / "curve.csv", "w", encoding="utf-8", newline="") as f:
        f.write("step,mean_auc,relative\n")
        for step, rel in result.points:
            f.write(f"{step},{by_step[step]!r},{rel!r}\n")
    doc = {
        "reference_step": args.relative_step,
        "points": [
            {"step": step, "mean_auc": by_step[step], "relative": rel}
            for step, rel in result.points
        ],
        "tau": result.tau,
        "p_value": result.p_value,
        "p_value_one_sided": result.p_value_one_sided,
        "tau_error": result.tau_error,
    }
    (out / "curve.json").write_text(
        json.dumps(doc, indent=2) + "\n", encoding="utf-8", newline="\n"
    )
    from .report import plot_curve

    plot_curve(result.points, out / "curve.png", args.relative_step)
    _write_manifest(out, "curve", args, ["curve.csv", "curve.json", "curve.png"])
    if result.tau_error:
        print(f"kendall tau unavailable: {result.tau_error}")
    else:
        print(
            f"kendall tau = {result.tau:+.4f} "
            f"(two-sided p = {result.p_value:.4g}, one-sided p = {result.p_value_one_sided:.4g})"
        )
    return EXIT_OK


def cmd_synth(args) -> int:
    config = load_synth_config(args.config)
    if args.seed is not None:
        config = type(config)(**{**config.__dict__, "seed": args.seed})
    out = Path(args.out)
    corpus = generate_synthetic_corpus(config, out)
    _write_manifest(out, "synth", args, ["corpus.json", "datasets"])
    n_desc = sum(len(l.descriptions) for ds in corpus.datasets for l in ds.labels)
    n_ex = sum(len(ds.examples) for ds in corpus.datasets)
    print(
        f"generated {len(corpus.datasets)} datasets, {n_desc} descriptions, "
        f"{n_ex} examples in {out}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _thresholds(text: str) -> list[float]:
    try:
        values = [float(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad threshold list {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("at least one threshold required")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metatune",
        description="Yes/No QA meta-tuning pipeline: validate, split, train, evaluate, compare.",
    )
    parser.add_argument("--version", action="version", version=f"metatune {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a corpus directory and print counts")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("split", help="write split plans for every eval-allowed dataset")
    p.add_argument("--corpus", required=True)
    p.add_argument("--mode", required=True, choices=["unseen", "similar"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("sample-preview", help="dump the first N training instances as JSONL")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split-id", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=32)
    p.set_defaults(func=cmd_sample_preview)

    p = sub.add_parser("train", help="meta-tune a scorer on a split plan")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split-id", required=True)
    p.add_argument("--scorer", default="native")
    p.add_argument("--steps", type=int, default=5000)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score the plan's eval dataset and write eval.csv")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split-id", required=True)
    p.add_argument("--scorer", default="native")
    p.add_argument("--checkpoint")
    p.add_argument("--ensemble", action="store_true",
                   help="average each label's descriptions before computing AUC")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="delta statistics between two eval.csv files")
    p.add_argument("--base", required=True)
    p.add_argument("--cand", required=True)
    p.add_argument("--weighting", default="description",
                   choices=["description", "label", "dataset", "all"])
    p.add_argument("--thresholds", type=_thresholds, default=list(DEFAULT_THRESHOLDS))
    p.add_argument("--out", required=True)
    p.add_argument("--scatter", help="also write scatter CSV (and PNG) of shared descriptions")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("benchmark", help="multi-class metrics via highest-probability-Yes resolution")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split-id", required=True)
    p.add_argument("--scorer", default="native")
    p.add_argument("--checkpoint")
    p.add_argument("--metric", default="weighted-f1", choices=["weighted-f1", "accuracy"])
    p.add_argument("--yes-threshold", type=float, default=0.5)
    p.add_argument("--null-label", default=None,
                   help="label id to predict when nothing crosses the threshold")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("curve", help="relative AUC curve over checkpoint evals")
    p.add_argument("--evals", required=True,
                   help="comma-separated <step>:<eval.csv> pairs")
    p.add_argument("--relative-step", type=int, default=5000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("synth", help="generate a synthetic corpus from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, SplitError, SamplerError, ScorerError, SynthError, MetricsError) as e:
        _fail(str(e))
        return EXIT_FAIL
    except ProtocolError as e:
        _fail(str(e))
        return EXIT_IO
    except OSError as e:
        _fail(str(e))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
