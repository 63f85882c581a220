"""Tag-based dataset grouping and train/eval split plans.

Two datasets are "similar" when their tag sets are exactly equal (not
merely overlapping): {emotion} and {emotion, social-media} are different
groups. Untagged datasets are each their own singleton group.

Split modes:
  unseen   leave out the eval dataset's whole group from training
  similar  plain leave-one-out: train on everything except the eval dataset
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus

MODE_UNSEEN = "unseen"
MODE_SIMILAR = "similar"


class SplitError(Exception):
    pass


@dataclass(frozen=True)
class Group:
    tag_set: frozenset[str]
    dataset_ids: tuple[str, ...]


@dataclass(frozen=True)
class SplitPlan:
    eval_dataset_id: str
    train_dataset_ids: tuple[str, ...]
    mode: str

    @property
    def split_id(self) -> str:
        return f"{self.mode}:{self.eval_dataset_id}"


def group_by_tags(corpus: Corpus) -> list[Group]:
    """Partition datasets by exact tag-set equality.

    Untagged datasets form singleton groups. Order is deterministic:
    sorted tag set first, then first dataset id.
    """
    by_tags: dict[frozenset, list[str]] = {}
    singletons: list[Group] = []
    for ds in corpus.datasets:  # already sorted by id
        if not ds.tags:
            singletons.append(Group(tag_set=frozenset(), dataset_ids=(ds.id,)))
        else:
            by_tags.setdefault(ds.tags, []).append(ds.id)
    groups = singletons + [
        Group(tag_set=tags, dataset_ids=tuple(ids)) for tags, ids in by_tags.items()
    ]
    groups.sort(key=lambda g: (sorted(g.tag_set), g.dataset_ids[0]))
    return groups


def group_of(corpus: Corpus, dataset_id: str) -> tuple[str, ...]:
    """Dataset ids similar to `dataset_id` (including itself)."""
    ds = corpus.dataset_by_id(dataset_id)
    if not ds.tags:
        return (dataset_id,)
    return tuple(d.id for d in corpus.datasets if d.tags == ds.tags)


def make_splits(corpus: Corpus, mode: str) -> list[SplitPlan]:
    """One plan per eval-allowed dataset.

    Raises SplitError for corpora with fewer than two datasets or when
    excluding a group would leave nothing to train on.
    """
    if mode not in (MODE_UNSEEN, MODE_SIMILAR):
        raise SplitError(f"unknown split mode {mode!r}")
    if len(corpus.datasets) < 2:
        raise SplitError("need at least 2 datasets to split")
    plans = []
    for ds in corpus.datasets:
        if not ds.eval_allowed:
            continue
        if mode == MODE_UNSEEN:
            excluded = set(group_of(corpus, ds.id))
        else:
            excluded = {ds.id}
        train = tuple(d.id for d in corpus.datasets if d.id not in excluded)
        if not train:
            raise SplitError(f"empty training set for eval dataset {ds.id!r} (mode={mode})")
        plans.append(SplitPlan(eval_dataset_id=ds.id, train_dataset_ids=train, mode=mode))
    return plans


def write_splits(plans: list[SplitPlan], path: str | Path) -> None:
    if not plans:
        raise SplitError("no plans to write")
    modes = {p.mode for p in plans}
    if len(modes) != 1:
        raise SplitError("cannot mix split modes in one file")
    doc = {
        "mode": plans[0].mode,
        "plans": [
            {"eval": p.eval_dataset_id, "train": list(p.train_dataset_ids)} for p in plans
        ],
    }
    Path(path).write_text(
        json.dumps(doc, indent=2) + "\n", encoding="utf-8", newline="\n"
    )


def read_splits(path: str | Path) -> list[SplitPlan]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        SplitPlan(
            eval_dataset_id=p["eval"],
            train_dataset_ids=tuple(p["train"]),
            mode=doc["mode"],
        )
        for p in doc["plans"]
    ]


def plan_for(corpus: Corpus, split_id: str) -> SplitPlan:
    """Resolve a "<mode>:<eval_dataset_id>" split id against a corpus."""
    mode, sep, eval_id = split_id.partition(":")
    if not sep or mode not in (MODE_UNSEEN, MODE_SIMILAR):
        raise SplitError(
            f"bad split id {split_id!r} (want 'unseen:<dataset>' or 'similar:<dataset>')"
        )
    for plan in make_splits(corpus, mode):
        if plan.eval_dataset_id == eval_id:
            return plan
    raise SplitError(f"no eval-allowed dataset {eval_id!r} in corpus")
