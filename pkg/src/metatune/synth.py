"""Synthetic multi-task corpus with known ground truth.

Each group of tasks shares a tag set; each task is a small classification
dataset whose labels are keyword "concepts". A label's questions embed its
keywords, and its positive examples contain all of its keywords plus
shared-distractor filler, so a keyword-overlap rule is a perfect classifier
at noise 0. Concepts recur across groups (assigned to tasks by a per-group
permutation) while staying disjoint *within* every dataset: a scorer can
learn the keyword-match signal from the training groups and apply it to a
held-out group whose tag set it has never seen. That is the meta-tuning
transfer setup in miniature.

`noise_rate` replaces each context token by a random distractor with the
given probability, which degrades individual questions unevenly and gives
description ensembling something to average away.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus, Dataset, Example, Label, LabelDescription, write_corpus
from .rng import SplitMix64

N_DISTRACTORS = 120
FILLER_MIN = 4
FILLER_MAX = 7

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"
_SYLLABLES = [c + v for c in _CONSONANTS for v in _VOWELS]

# question templates; paraphrase p uses template p and a rotated keyword pair
_TEMPLATES = (
    "is this text about {kws}?",
    "does this passage mention {kws}?",
    "is the topic here {kws}?",
)


class SynthError(Exception):
    pass


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_groups: int = 4
    tasks_per_group: int = 2
    labels_per_task: int = 3
    keywords_per_label: int = 4
    examples_per_label: int = 50
    paraphrases_per_label: int = 2
    noise_rate: float = 0.2

    def __post_init__(self):
        counts = (
            self.n_groups, self.tasks_per_group, self.labels_per_task,
            self.keywords_per_label, self.examples_per_label,
            self.paraphrases_per_label,
        )
        if any(c < 1 for c in counts):
            raise SynthError("all synth counts must be >= 1")
        if self.paraphrases_per_label > 3:
            raise SynthError("paraphrases_per_label must be 1-3")
        if not 0.0 <= self.noise_rate <= 0.9:
            raise SynthError("noise_rate must be in [0, 0.9]")


def load_synth_config(path: str | Path) -> SynthConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    unknown = raw.keys() - SynthConfig.__dataclass_fields__.keys()
    if unknown:
        raise SynthError(f"{path}: unknown field(s) {sorted(unknown)}")
    return SynthConfig(**raw)


def write_synth_config(config: SynthConfig, path: str | Path) -> None:
    doc = {name: getattr(config, name) for name in SynthConfig.__dataclass_fields__}
    Path(path).write_text(
        json.dumps(doc, indent=2) + "\n", encoding="utf-8", newline="\n"
    )


def _fresh_words(rng: SplitMix64, n: int, taken: set[str]) -> list[str]:
    space = len(_SYLLABLES) ** 3
    if len(taken) + n > space // 2:
        raise SynthError(
            f"vocabulary too small: need {len(taken) + n} distinct words "
            f"from a space of {space}"
        )
    words = []
    while len(words) < n:
        w = "".join(rng.choice(_SYLLABLES) for _ in range(3))
        if w not in taken:
            taken.add(w)
            words.append(w)
    return words


def _question(keywords: list[str], paraphrase: int) -> str:
    k = len(keywords)
    if k == 1:
        subset = [keywords[0]]
    else:
        subset = [keywords[paraphrase % k], keywords[(paraphrase + 1) % k]]
    return _TEMPLATES[paraphrase].format(kws=" ".join(subset))


def generate_synthetic_corpus(config: SynthConfig, out_dir: str | Path | None = None) -> Corpus:
    """Generate the corpus (and write it under `out_dir` when given).

    Same config => byte-identical files: every random draw comes from one
    SplitMix64 stream in a fixed order.
    """
    rng = SplitMix64(config.seed)
    taken: set[str] = set()
    distractors = _fresh_words(rng, N_DISTRACTORS, taken)
    n_concepts = config.tasks_per_group * config.labels_per_task
    concepts = [
        _fresh_words(rng, config.keywords_per_label, taken) for _ in range(n_concepts)
    ]

    datasets = []
    for g in range(config.n_groups):
        assignment = list(range(n_concepts))
        rng.shuffle(assignment)
        tags = frozenset({"synth", f"group-{g}"})
        for t in range(config.tasks_per_group):
            dataset_id = f"g{g}t{t}"
            labels = []
            examples = []
            for l in range(config.labels_per_task):
                concept = concepts[assignment[t * config.labels_per_task + l]]
                label_id = f"l{l}"
                descriptions = tuple(
                    LabelDescription(
                        id=f"{label_id}d{p}",
                        label_id=label_id,
                        dataset_id=dataset_id,
                        question=_question(concept, p),
                        synthesized=False,
                    )
                    for p in range(config.paraphrases_per_label)
                )
                labels.append(
                    Label(
                        id=label_id,
                        dataset_id=dataset_id,
                        name=f"concept {' '.join(concept)}",
                        null=False,
                        descriptions=descriptions,
                    )
                )
                for e in range(config.examples_per_label):
                    n_filler = FILLER_MIN + rng.below(FILLER_MAX - FILLER_MIN + 1)
                    tokens = list(concept) + [
                        distractors[rng.below(N_DISTRACTORS)] for _ in range(n_filler)
                    ]
                    rng.shuffle(tokens)
                    tokens = [
                        distractors[rng.below(N_DISTRACTORS)]
                        if rng.random() < config.noise_rate
                        else tok
                        for tok in tokens
                    ]
                    examples.append(
                        Example(
                            id=f"{label_id}e{e}",
                            dataset_id=dataset_id,
                            text=" ".join(tokens),
                            gold_labels=frozenset({label_id}),
                        )
                    )
            datasets.append(
                Dataset(
                    id=dataset_id,
                    name=f"synthetic task {dataset_id}",
                    tags=tags,
                    eval_allowed=True,
                    labels=tuple(labels),
                    examples=tuple(examples),
                )
            )
    corpus = Corpus(datasets=tuple(sorted(datasets, key=lambda d: d.id)))
    if out_dir is not None:
        write_corpus(corpus, out_dir)
    return corpus
