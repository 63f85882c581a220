"""Evaluation math: per-description AUC-ROC, paired-model delta statistics,
description ensembling, multi-label resolution, weighted F1/accuracy,
Kendall rank correlation, and training-curve summaries.

All functions are pure over immutable inputs. Two models are compared per
label description: delta = AUC(candidate) - AUC(baseline), summarized by
E[delta], P[delta > t], P[delta < -t] (strict), and the population standard
deviation, each under three weightings (every description equal, every
label equal, every dataset equal). The candidate counts as better only if
E[delta] > 0 and P[delta > t] > P[delta < -t] for t in {1%, 5%, 10%} under
all three weightings: 12 conditions.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .corpus import NO, YES, Corpus, to_qa_instances
from .grouping import SplitPlan

DEFAULT_THRESHOLDS = (0.01, 0.05, 0.10)

WEIGHTING_DESCRIPTION = "description"
WEIGHTING_LABEL = "label"
WEIGHTING_DATASET = "dataset"
ALL_WEIGHTINGS = (WEIGHTING_DESCRIPTION, WEIGHTING_LABEL, WEIGHTING_DATASET)

# batch size used when streaming (context, question) items through a scorer
SCORE_CHUNK = 256


class MetricsError(Exception):
    pass


def _as_bool_gold(gold) -> bool:
    if isinstance(gold, bool):
        return gold
    if gold == YES:
        return True
    if gold == NO:
        return False
    raise MetricsError(f"gold must be Yes/No, got {gold!r}")


# ---------------------------------------------------------------------------
# Score tables

@dataclass(frozen=True)
class ScoreRow:
    dataset_id: str
    description_id: str
    label_id: str
    example_id: str
    p_yes: float
    gold: str  # YES or NO


@dataclass(frozen=True)
class ScoreTable:
    rows: tuple[ScoreRow, ...]

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class DescriptionAUC:
    description_id: str
    label_id: str
    dataset_id: str
    auc: float
    n_pos: int
    n_neg: int


# ---------------------------------------------------------------------------
# AUC-ROC

def auc_roc(scores, golds) -> float:
    """Tie-aware Mann-Whitney AUC with "Yes" as the positive class.

    Equals (#{pos > neg} + 0.5 * #{pos == neg}) / (n_pos * n_neg), computed
    via average ranks in O(n log n).
    """
    if len(scores) != len(golds):
        raise MetricsError("scores and golds differ in length")
    flags = [_as_bool_gold(g) for g in golds]
    n_pos = sum(flags)
    n_neg = len(flags) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricsError(
            f"AUC undefined for single-class input (n_pos={n_pos}, n_neg={n_neg})"
        )
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    rank_sum_pos = 0.0
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        avg_rank = (i + j + 2) / 2  # 1-based positions i+1 .. j+1
        for k in range(i, j + 1):
            if flags[order[k]]:
                rank_sum_pos += avg_rank
        i = j + 1
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


# ---------------------------------------------------------------------------
# Plan evaluation

@dataclass
class EvalOutcome:
    table: ScoreTable
    description_aucs: list[DescriptionAUC]
    warnings: list[str]
    mean_auc: dict[str, float]  # dataset id -> mean description AUC

    def __iter__(self):
        # allows: table, aucs = eval_descriptions(...)
        return iter((self.table, self.description_aucs))


def _resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get("METATUNE_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def score_plan(scorer, corpus: Corpus, plan: SplitPlan, workers: int | None = None) -> ScoreTable:
    """Score every (non-synthesized description x example) of the plan's
    eval dataset. Row order is deterministic regardless of worker count."""
    ds = corpus.dataset_by_id(plan.eval_dataset_id)
    descs = sorted(ds.descriptions(include_synthesized=False), key=lambda d: d.id)
    if not descs:
        raise MetricsError(f"dataset {ds.id!r} has no evaluable descriptions")

    def score_one(desc):
        instances = to_qa_instances(ds, desc.id)
        p = []
        for i in range(0, len(instances), SCORE_CHUNK):
            chunk = instances[i : i + SCORE_CHUNK]
            p.extend(scorer.score_batch([(inst.context, inst.question) for inst in chunk]))
        return [
            ScoreRow(
                dataset_id=ds.id,
                description_id=desc.id,
                label_id=desc.label_id,
                example_id=inst.example_id,
                p_yes=float(p_yes),
                gold=inst.answer,
            )
            for inst, p_yes in zip(instances, p)
        ]

    n_workers = _resolve_workers(workers)
    if n_workers > 1 and getattr(scorer, "concurrency_safe", False) and len(descs) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            per_desc = list(pool.map(score_one, descs))
    else:
        per_desc = [score_one(d) for d in descs]
    rows = [row for rows in per_desc for row in rows]
    return ScoreTable(rows=tuple(rows))


def description_aucs(table: ScoreTable) -> tuple[list[DescriptionAUC], list[str]]:
    """Per-description AUC over a score table.

    Descriptions whose gold sets are single-class are excluded and reported
    as warnings instead of being imputed.
    """
    groups: dict[tuple[str, str], list[ScoreRow]] = {}
    for row in table.rows:
        groups.setdefault((row.dataset_id, row.description_id), []).append(row)
    aucs, warnings = [], []
    for (dataset_id, desc_id) in sorted(groups):
        rows = groups[(dataset_id, desc_id)]
        n_pos = sum(1 for r in rows if r.gold == YES)
        n_neg = len(rows) - n_pos
        if n_pos == 0 or n_neg == 0:
            warnings.append(
                f"{dataset_id}/{desc_id}: single-class gold set "
                f"(n_pos={n_pos}, n_neg={n_neg}); excluded from AUC"
            )
            continue
        value = auc_roc([r.p_yes for r in rows], [r.gold for r in rows])
        aucs.append(
            DescriptionAUC(
                description_id=desc_id,
                label_id=rows[0].label_id,
                dataset_id=dataset_id,
                auc=value,
                n_pos=n_pos,
                n_neg=n_neg,
            )
        )
    return aucs, warnings


def eval_descriptions(scorer, corpus: Corpus, plan: SplitPlan,
                      workers: int | None = None) -> EvalOutcome:
    table = score_plan(scorer, corpus, plan, workers=workers)
    aucs, warnings = description_aucs(table)
    by_dataset: dict[str, list[float]] = {}
    for a in aucs:
        by_dataset.setdefault(a.dataset_id, []).append(a.auc)
    mean_auc = {ds: sum(v) / len(v) for ds, v in sorted(by_dataset.items())}
    return EvalOutcome(table=table, description_aucs=aucs, warnings=warnings, mean_auc=mean_auc)


def ensemble_descriptions(table: ScoreTable) -> ScoreTable:
    """Average p_yes across each label's descriptions, per example.

    Output rows carry the synthetic description id "ens:<label_id>"; a
    label with a single description passes through unchanged (same scores).
    """
    groups: dict[tuple[str, str, str], list[ScoreRow]] = {}
    for row in table.rows:
        groups.setdefault((row.dataset_id, row.label_id, row.example_id), []).append(row)
    rows = []
    for (dataset_id, label_id, example_id) in sorted(groups):
        members = groups[(dataset_id, label_id, example_id)]
        golds = {r.gold for r in members}
        if len(golds) != 1:
            raise MetricsError(
                f"inconsistent golds for {dataset_id}/{label_id}/{example_id}"
            )
        rows.append(
            ScoreRow(
                dataset_id=dataset_id,
                description_id=f"ens:{label_id}",
                label_id=label_id,
                example_id=example_id,
                p_yes=sum(r.p_yes for r in members) / len(members),
                gold=members[0].gold,
            )
        )
    return ScoreTable(rows=tuple(rows))


# ---------------------------------------------------------------------------
# Delta statistics and the 12-condition verdict

@dataclass(frozen=True)
class DeltaStats:
    weighting: str
    thresholds: tuple[float, ...]
    e_delta: float
    p_gt: dict[float, float]
    p_lt: dict[float, float]
    std_delta: float
    n_descriptions: int


@dataclass(frozen=True)
class FailedCondition:
    weighting: str
    threshold: float | None  # None: the E[delta] > 0 condition

    def __str__(self):
        if self.threshold is None:
            return f"E[delta] <= 0 under {self.weighting} weighting"
        t = f"{self.threshold:g}"
        return (
            f"P[delta > {t}] <= P[delta < -{t}] under {self.weighting} weighting"
        )


@dataclass(frozen=True)
class Verdict:
    better: bool
    failed_conditions: tuple[FailedCondition, ...]


def _joined(base: list[DescriptionAUC], cand: list[DescriptionAUC]):
    base_by_key = {(a.dataset_id, a.description_id): a for a in base}
    cand_by_key = {(a.dataset_id, a.description_id): a for a in cand}
    keys = sorted(base_by_key.keys() & cand_by_key.keys())
    if not keys:
        raise MetricsError("no shared descriptions between the two AUC tables")
    return [(base_by_key[k], cand_by_key[k]) for k in keys]


def _weights(joined, weighting: str) -> list[float]:
    if weighting == WEIGHTING_DESCRIPTION:
        return [1.0] * len(joined)
    if weighting == WEIGHTING_LABEL:
        key = lambda b: (b.dataset_id, b.label_id)
    elif weighting == WEIGHTING_DATASET:
        key = lambda b: b.dataset_id
    else:
        raise MetricsError(f"unknown weighting {weighting!r}")
    counts: dict = {}
    for b, _ in joined:
        counts[key(b)] = counts.get(key(b), 0) + 1
    return [1.0 / counts[key(b)] for b, _ in joined]


def weighted_delta_stats(deltas, weights, weighting: str,
                         thresholds=DEFAULT_THRESHOLDS) -> DeltaStats:
    """Weighted moments and strict threshold exceedance fractions of deltas."""
    if len(deltas) != len(weights) or not deltas:
        raise MetricsError("need equal-length, non-empty deltas and weights")
    w_sum = sum(weights)
    e = sum(w * d for w, d in zip(weights, deltas)) / w_sum
    var = sum(w * (d - e) ** 2 for w, d in zip(weights, deltas)) / w_sum
    p_gt = {
        t: sum(w for w, d in zip(weights, deltas) if d > t) / w_sum for t in thresholds
    }
    p_lt = {
        t: sum(w for w, d in zip(weights, deltas) if d < -t) / w_sum for t in thresholds
    }
    return DeltaStats(
        weighting=weighting,
        thresholds=tuple(thresholds),
        e_delta=e,
        p_gt=p_gt,
        p_lt=p_lt,
        std_delta=math.sqrt(var),
        n_descriptions=len(deltas),
    )


def delta_stats(base: list[DescriptionAUC], cand: list[DescriptionAUC],
                weighting: str, thresholds=DEFAULT_THRESHOLDS) -> DeltaStats:
    """Delta statistics over descriptions present in both tables.

    Label/dataset weights normalize within the shared set, so each label
    (or dataset) contributes total weight 1.
    """
    joined = _joined(base, cand)
    deltas = [c.auc - b.auc for b, c in joined]
    weights = _weights(joined, weighting)
    return weighted_delta_stats(deltas, weights, weighting, thresholds)


def verdict(base: list[DescriptionAUC], cand: list[DescriptionAUC],
            thresholds=DEFAULT_THRESHOLDS) -> Verdict:
    """better=True only when all 12 conditions hold (E[delta] > 0 and strict
    threshold dominance for every threshold, under all three weightings)."""
    failed = []
    for weighting in ALL_WEIGHTINGS:
        stats = delta_stats(base, cand, weighting, thresholds)
        if not stats.e_delta > 0:
            failed.append(FailedCondition(weighting=weighting, threshold=None))
        for t in thresholds:
            if not stats.p_gt[t] > stats.p_lt[t]:
                failed.append(FailedCondition(weighting=weighting, threshold=t))
    return Verdict(better=not failed, failed_conditions=tuple(failed))


@dataclass(frozen=True)
class ScatterRow:
    description_id: str
    auc_x: float
    auc_y: float
    w_desc: float
    w_label: float
    w_dataset: float


def scatter_data(base: list[DescriptionAUC], cand: list[DescriptionAUC]) -> list[ScatterRow]:
    """One row per shared description: baseline AUC (x), candidate AUC (y),
    and the three per-description weights, ready for plotting."""
    joined = _joined(base, cand)
    w_desc = _weights(joined, WEIGHTING_DESCRIPTION)
    w_label = _weights(joined, WEIGHTING_LABEL)
    w_dataset = _weights(joined, WEIGHTING_DATASET)
    return [
        ScatterRow(
            description_id=b.description_id,
            auc_x=b.auc,
            auc_y=c.auc,
            w_desc=wd,
            w_label=wl,
            w_dataset=wds,
        )
        for (b, c), wd, wl, wds in zip(joined, w_desc, w_label, w_dataset)
    ]


# ---------------------------------------------------------------------------
# Multi-label benchmark metrics

def resolve_label(p_yes_by_label: dict[str, float], yes_threshold: float = 0.5,
                  null_label: str | None = None) -> str:
    """Highest-probability label among those predicted "Yes" (p > threshold).

    Falls back to `null_label` when nothing crosses the threshold, or to the
    global argmax when no null label exists. Ties break to the
    lexicographically smallest label id.
    """
    if not p_yes_by_label:
        raise MetricsError("empty probability map")
    eligible = {l: p for l, p in p_yes_by_label.items() if p > yes_threshold}
    if not eligible:
        if null_label is not None:
            return null_label
        eligible = p_yes_by_label
    best = max(eligible.values())
    return min(l for l, p in eligible.items() if p == best)


def weighted_f1(preds, golds) -> float:
    """Label-weighted F1: per-label F1 weighted by gold support."""
    if not preds or len(preds) != len(golds):
        raise MetricsError("need equal-length, non-empty prediction/gold lists")
    labels = sorted(set(golds))
    total = 0.0
    for label in labels:
        tp = sum(1 for p, g in zip(preds, golds) if p == label and g == label)
        fp = sum(1 for p, g in zip(preds, golds) if p == label and g != label)
        fn = sum(1 for p, g in zip(preds, golds) if p != label and g == label)
        support = tp + fn
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / support if support else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        total += support * f1
    return total / len(golds)


def accuracy(preds, golds) -> float:
    if not preds or len(preds) != len(golds):
        raise MetricsError("need equal-length, non-empty prediction/gold lists")
    return sum(1 for p, g in zip(preds, golds) if p == g) / len(preds)


# ---------------------------------------------------------------------------
# Kendall rank correlation

@dataclass(frozen=True)
class KendallResult:
    tau: float
    p_value: float  # two-sided
    p_value_one_sided: float  # in the direction of the observed tau
    method: str  # "permutation" or "normal"

    def __iter__(self):
        return iter((self.tau, self.p_value))


def _kendall_s(x, y) -> int:
    s = 0
    for i, j in itertools.combinations(range(len(x)), 2):
        dx = (x[j] > x[i]) - (x[j] < x[i])
        dy = (y[j] > y[i]) - (y[j] < y[i])
        s += dx * dy
    return s


def _tie_sizes(values) -> list[int]:
    counts: dict = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return [c for c in counts.values() if c > 1]


PERMUTATION_MAX_N = 8


def kendall_tau(x, y) -> KendallResult:
    """Kendall tau-b with tie correction.

    p-value: exact permutation over all n! orderings of y for n <= 8,
    tie-corrected normal approximation otherwise. Raises MetricsError for
    n < 2 or constant inputs (tau undefined).
    """
    n = len(x)
    if n != len(y):
        raise MetricsError("x and y differ in length")
    if n < 2:
        raise MetricsError("insufficient points for Kendall tau (need >= 2)")
    n0 = n * (n - 1) // 2
    tx = _tie_sizes(x)
    ty = _tie_sizes(y)
    n1 = sum(t * (t - 1) // 2 for t in tx)
    n2 = sum(u * (u - 1) // 2 for u in ty)
    if n0 == n1 or n0 == n2:
        raise MetricsError("Kendall tau undefined for constant input")
    s = _kendall_s(x, y)
    # (n0-n1)(n0-n2) is an exact integer, so perfect (anti)agreement gives
    # tau of exactly +-1
    tau = s / math.sqrt((n0 - n1) * (n0 - n2))

    if n <= PERMUTATION_MAX_N:
        # tie structure of y is permutation-invariant, so comparing S values
        # is equivalent to comparing taus
        total = 0
        ge_two = 0
        ge_one = 0
        for perm in itertools.permutations(y):
            sp = _kendall_s(x, perm)
            total += 1
            if abs(sp) >= abs(s):
                ge_two += 1
            if (sp >= s) if s >= 0 else (sp <= s):
                ge_one += 1
        return KendallResult(
            tau=tau, p_value=ge_two / total, p_value_one_sided=ge_one / total,
            method="permutation",
        )

    v0 = n * (n - 1) * (2 * n + 5)
    vt = sum(t * (t - 1) * (2 * t + 5) for t in tx)
    vu = sum(u * (u - 1) * (2 * u + 5) for u in ty)
    v1 = (
        sum(t * (t - 1) for t in tx) * sum(u * (u - 1) for u in ty)
        / (2 * n * (n - 1))
    )
    v2 = (
        sum(t * (t - 1) * (t - 2) for t in tx)
        * sum(u * (u - 1) * (u - 2) for u in ty)
        / (9 * n * (n - 1) * (n - 2))
    )
    var_s = (v0 - vt - vu) / 18 + v1 + v2
    z = s / math.sqrt(var_s)
    p_two = math.erfc(abs(z) / math.sqrt(2))
    return KendallResult(
        tau=tau, p_value=p_two, p_value_one_sided=p_two / 2, method="normal"
    )


# ---------------------------------------------------------------------------
# Checkpoint curves

@dataclass
class CurveResult:
    # (step, mean AUC relative to the reference step), sorted by step
    points: list[tuple[int, float]]
    tau: float | None
    p_value: float | None
    p_value_one_sided: float | None
    tau_error: str | None = None


def relative_auc_curve(checkpoint_evals, reference_step: int = 5000) -> CurveResult:
    """Anchor a (step, mean AUC) series at its reference step and rank-test it.

    The relative value at `reference_step` is exactly 0. Kendall tau is
    computed between step index and the absolute mean AUC; when tau is
    undefined (single point, constant series) the error is carried in
    `tau_error` rather than raised.
    """
    series = sorted(checkpoint_evals)
    steps = [s for s, _ in series]
    if len(set(steps)) != len(steps):
        raise MetricsError("duplicate steps in checkpoint series")
    ref = dict(series).get(reference_step)
    if ref is None:
        raise MetricsError(f"reference step {reference_step} missing from series")
    points = [(step, value - ref) for step, value in series]
    try:
        k = kendall_tau(steps, [v for _, v in series])
    except MetricsError as e:
        msg = str(e)
        if "insufficient" in msg:
            msg = "insufficient points"
        return CurveResult(points=points, tau=None, p_value=None,
                           p_value_one_sided=None, tau_error=msg)
    return CurveResult(points=points, tau=k.tau, p_value=k.p_value,
                       p_value_one_sided=k.p_value_one_sided)


# ---------------------------------------------------------------------------
# File formats

EVAL_CSV_HEADER = ["dataset_id", "description_id", "label_id", "auc", "n_pos", "n_neg"]
SCATTER_CSV_HEADER = ["description_id", "auc_x", "auc_y", "w_desc", "w_label", "w_dataset"]


def write_eval_csv(aucs: list[DescriptionAUC], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(EVAL_CSV_HEADER)
        for a in aucs:
            writer.writerow(
                [a.dataset_id, a.description_id, a.label_id, repr(a.auc), a.n_pos, a.n_neg]
            )


def read_eval_csv(path: str | Path) -> list[DescriptionAUC]:
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        missing = set(EVAL_CSV_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise MetricsError(f"{path}: missing column(s) {sorted(missing)}")
        return [
            DescriptionAUC(
                description_id=row["description_id"],
                label_id=row["label_id"],
                dataset_id=row["dataset_id"],
                auc=float(row["auc"]),
                n_pos=int(row["n_pos"]),
                n_neg=int(row["n_neg"]),
            )
            for row in reader
        ]


def write_scatter_csv(rows: list[ScatterRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(SCATTER_CSV_HEADER)
        for r in rows:
            writer.writerow(
                [r.description_id, repr(r.auc_x), repr(r.auc_y),
                 repr(r.w_desc), repr(r.w_label), repr(r.w_dataset)]
            )


def stats_as_dict(stats: DeltaStats) -> dict:
    return {
        "weighting": stats.weighting,
        "thresholds": list(stats.thresholds),
        "e_delta": stats.e_delta,
        "p_gt": {f"{t:g}": v for t, v in stats.p_gt.items()},
        "p_lt": {f"{t:g}": v for t, v in stats.p_lt.items()},
        "std_delta": stats.std_delta,
        "n_descriptions": stats.n_descriptions,
    }


def write_stats_json(blocks: list[DeltaStats], path: str | Path,
                     verdict_result: Verdict | None = None) -> None:
    if len(blocks) == 1 and verdict_result is None:
        doc: dict = stats_as_dict(blocks[0])
    else:
        doc = {"stats": [stats_as_dict(b) for b in blocks]}
        if verdict_result is not None:
            doc["verdict"] = {
                "better": verdict_result.better,
                "failed_conditions": [str(c) for c in verdict_result.failed_conditions],
            }
    Path(path).write_text(
        json.dumps(doc, indent=2) + "\n", encoding="utf-8", newline="\n"
    )
