"""Balanced meta-tuning stream: dataset -> description -> answer -> example.

Each draw picks a training dataset uniformly at random, then one of its
descriptions uniformly at random, then a Yes/No answer with probability
1/2 each, then an unseen example uniformly among those with that gold
answer. A (description, example) pair is never emitted twice over the
sampler's lifetime.

Exhaustion handling (the balance degrades gracefully as pools drain):
  - chosen answer's pool empty -> draw from the other answer's pool;
  - a description with both pools empty leaves its dataset's rotation,
    so description draws only ever see descriptions with unseen pairs
    remaining (this realizes "redraw" without extra RNG draws);
  - a dataset with no live descriptions leaves the dataset rotation.

Streams are fully determined by (seed, plan, corpus): all randomness
comes from one SplitMix64 stream, with exactly four draws per emitted
instance, and all pools are initialized in sorted-id order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import NO, YES, Corpus, QAInstance
from .grouping import SplitPlan
from .rng import SplitMix64


class SamplerError(Exception):
    pass


@dataclass
class SamplerStats:
    """Draw diagnostics; `balanced_*` count draws where both pools were non-empty."""

    emitted: int = 0
    balanced_draws: int = 0
    balanced_yes: int = 0


class _DescriptionPool:
    __slots__ = ("desc_id", "question", "yes", "no")

    def __init__(self, desc_id, question, yes_ids, no_ids):
        self.desc_id = desc_id
        self.question = question
        self.yes = list(yes_ids)
        self.no = list(no_ids)

    def remaining(self) -> int:
        return len(self.yes) + len(self.no)


class _DatasetPool:
    __slots__ = ("dataset_id", "descs")

    def __init__(self, dataset_id, descs):
        self.dataset_id = dataset_id
        self.descs = descs


class Sampler:
    """Stateful, single-consumer stream of QAInstances over a split plan."""

    def __init__(self, corpus: Corpus, plan: SplitPlan, seed: int):
        self.rng = SplitMix64(seed)
        self.stats = SamplerStats()
        self.exhausted = False
        self._text: dict[tuple[str, str], str] = {}
        self._datasets: list[_DatasetPool] = []
        for dataset_id in sorted(plan.train_dataset_ids):
            ds = corpus.dataset_by_id(dataset_id)
            positives: dict[str, list[str]] = {}
            all_ids = []
            for ex in sorted(ds.examples, key=lambda e: e.id):
                all_ids.append(ex.id)
                self._text[(dataset_id, ex.id)] = ex.text
                for g in ex.gold_labels:
                    positives.setdefault(g, []).append(ex.id)
            descs = []
            for label in ds.labels:
                yes_ids = positives.get(label.id, [])
                yes_set = set(yes_ids)
                no_ids = [i for i in all_ids if i not in yes_set]
                for desc in label.descriptions:
                    pool = _DescriptionPool(desc.id, desc.question, yes_ids, no_ids)
                    if pool.remaining():
                        descs.append(pool)
            if not descs:
                raise SamplerError(
                    f"empty training pool: dataset {dataset_id!r} has no "
                    "(description, example) pairs"
                )
            self._datasets.append(_DatasetPool(dataset_id, descs))
        if not self._datasets:
            raise SamplerError("empty training pool: plan has no train datasets")

    def next_batch(self, n: int) -> list[QAInstance]:
        """Up to `n` fresh instances; shorter only when the pool ran dry
        (then `self.exhausted` is set)."""
        if n < 1:
            raise ValueError("batch size must be >= 1")
        batch = []
        while len(batch) < n:
            if not self._datasets:
                self.exhausted = True
                break
            inst = self._draw()
            batch.append(inst)
        return batch

    def _draw(self) -> QAInstance:
        rng = self.rng
        d_idx = rng.below(len(self._datasets))
        dpool = self._datasets[d_idx]
        q_idx = rng.below(len(dpool.descs))
        desc = dpool.descs[q_idx]
        want_yes = rng.below(2) == 0

        both = bool(desc.yes) and bool(desc.no)
        if both:
            self.stats.balanced_draws += 1
        pool = desc.yes if want_yes else desc.no
        if not pool:
            want_yes = not want_yes
            pool = desc.yes if want_yes else desc.no
        e_idx = rng.below(len(pool))
        example_id = pool[e_idx]
        pool[e_idx] = pool[-1]
        pool.pop()

        if both and want_yes:
            self.stats.balanced_yes += 1
        self.stats.emitted += 1

        if not desc.remaining():
            dpool.descs[q_idx] = dpool.descs[-1]
            dpool.descs.pop()
            if not dpool.descs:
                self._datasets[d_idx] = self._datasets[-1]
                self._datasets.pop()

        return QAInstance(
            dataset_id=dpool.dataset_id,
            description_id=desc.desc_id,
            example_id=example_id,
            context=self._text[(dpool.dataset_id, example_id)],
            question=desc.question,
            answer=YES if want_yes else NO,
        )


def new_sampler(corpus: Corpus, plan: SplitPlan, seed: int) -> Sampler:
    return Sampler(corpus, plan, seed)
