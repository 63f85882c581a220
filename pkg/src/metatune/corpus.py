"""Dataset corpus: on-disk format, validation, and Yes/No QA conversion.

A corpus directory looks like:

    corpus.json                      {"version": 1, "datasets": ["imdb", ...]}
    datasets/<id>.meta.json          dataset metadata, labels, descriptions
    datasets/<id>.examples.jsonl     one example per line

Labels carry 1-3 hand-written descriptions (questions) or, for huge label
spaces, template-synthesized ones that are used for training but excluded
from evaluation. Null labels (e.g. "no emotion") are declared with zero
descriptions; their examples simply have empty gold sets, so every
description scores them as "No".

Everything is immutable after load and safe to share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

FORMAT_VERSION = 1

YES = "Yes"
NO = "No"


class CorpusError(Exception):
    """Malformed or inconsistent corpus data."""


@dataclass(frozen=True)
class LabelDescription:
    id: str
    label_id: str
    dataset_id: str
    question: str
    synthesized: bool = False


@dataclass(frozen=True)
class Label:
    id: str
    dataset_id: str
    name: str
    null: bool = False
    descriptions: tuple[LabelDescription, ...] = ()


@dataclass(frozen=True)
class Example:
    id: str
    dataset_id: str
    text: str
    gold_labels: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Dataset:
    id: str
    name: str
    tags: frozenset[str]
    eval_allowed: bool
    labels: tuple[Label, ...]
    examples: tuple[Example, ...]

    def label_by_id(self, label_id: str) -> Label:
        for label in self.labels:
            if label.id == label_id:
                return label
        raise KeyError(f"dataset {self.id!r} has no label {label_id!r}")

    def description_by_id(self, description_id: str) -> LabelDescription:
        for label in self.labels:
            for desc in label.descriptions:
                if desc.id == description_id:
                    return desc
        raise KeyError(f"dataset {self.id!r} has no description {description_id!r}")

    def descriptions(self, include_synthesized: bool = True):
        for label in self.labels:
            for desc in label.descriptions:
                if include_synthesized or not desc.synthesized:
                    yield desc


@dataclass(frozen=True)
class Corpus:
    datasets: tuple[Dataset, ...]  # sorted by id

    def dataset_by_id(self, dataset_id: str) -> Dataset:
        for ds in self.datasets:
            if ds.id == dataset_id:
                return ds
        raise KeyError(f"no dataset {dataset_id!r} in corpus")

    @property
    def dataset_ids(self) -> list[str]:
        return [ds.id for ds in self.datasets]


@dataclass(frozen=True)
class QAInstance:
    """One (context, question) pair with its gold Yes/No answer.

    Context and question are kept separate; concatenation (and any
    separator token) is a scorer/protocol concern.
    """

    dataset_id: str
    description_id: str
    example_id: str
    context: str
    question: str
    answer: str  # YES or NO


def _require_keys(obj: dict, required: set[str], optional: set[str], where: str) -> None:
    if not isinstance(obj, dict):
        raise CorpusError(f"{where}: expected an object, got {type(obj).__name__}")
    missing = required - obj.keys()
    if missing:
        raise CorpusError(f"{where}: missing field(s) {sorted(missing)}")
    unknown = obj.keys() - required - optional
    if unknown:
        raise CorpusError(f"{where}: unknown field(s) {sorted(unknown)}")


def _load_meta(path: Path, dataset_id: str) -> dict:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CorpusError(f"missing dataset file {path}")
    except json.JSONDecodeError as e:
        raise CorpusError(f"{path}: malformed JSON: {e}")
    _require_keys(raw, {"id", "name", "labels"}, {"tags", "eval_allowed"}, str(path))
    if raw["id"] != dataset_id:
        raise CorpusError(f"{path}: id {raw['id']!r} does not match filename")
    return raw


def _parse_labels(raw_labels, dataset_id: str, where: str) -> tuple[Label, ...]:
    labels = []
    seen_label_ids = set()
    seen_desc_ids = set()
    for i, raw in enumerate(raw_labels):
        loc = f"{where}: label #{i}"
        _require_keys(raw, {"id", "name"}, {"null", "descriptions"}, loc)
        label_id = raw["id"]
        if label_id in seen_label_ids:
            raise CorpusError(f"{loc}: duplicate label id {label_id!r}")
        seen_label_ids.add(label_id)
        null = bool(raw.get("null", False))
        descs = []
        for j, rd in enumerate(raw.get("descriptions", [])):
            dloc = f"{loc} ({label_id!r}): description #{j}"
            _require_keys(rd, {"id", "question"}, {"synthesized"}, dloc)
            if not rd["question"]:
                raise CorpusError(f"{dloc}: empty question")
            if rd["id"] in seen_desc_ids:
                raise CorpusError(f"{dloc}: duplicate description id {rd['id']!r}")
            seen_desc_ids.add(rd["id"])
            descs.append(
                LabelDescription(
                    id=rd["id"],
                    label_id=label_id,
                    dataset_id=dataset_id,
                    question=rd["question"],
                    synthesized=bool(rd.get("synthesized", False)),
                )
            )
        if null and descs:
            raise CorpusError(f"{loc}: null label {label_id!r} must not carry descriptions")
        if not null:
            n_hand = sum(1 for d in descs if not d.synthesized)
            if not descs:
                raise CorpusError(
                    f"{loc}: undescribed label {label_id!r} (no descriptions and not null)"
                )
            if n_hand > 3:
                raise CorpusError(
                    f"{loc}: label {label_id!r} has {n_hand} non-synthesized descriptions "
                    "(want 1-3, or only synthesized ones)"
                )
        labels.append(
            Label(
                id=label_id,
                dataset_id=dataset_id,
                name=raw["name"],
                null=null,
                descriptions=tuple(descs),
            )
        )
    return tuple(labels)


def _load_examples(path: Path, dataset_id: str, label_ids: set[str]) -> tuple[Example, ...]:
    examples = []
    seen = set()
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise CorpusError(f"missing dataset file {path}")
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        loc = f"{path}:{lineno}"
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusError(f"{loc}: malformed record: {e}")
        _require_keys(raw, {"id", "text", "labels"}, set(), loc)
        if raw["id"] in seen:
            raise CorpusError(f"{loc}: duplicate example id {raw['id']!r}")
        seen.add(raw["id"])
        golds = raw["labels"]
        for g in golds:
            if g not in label_ids:
                raise CorpusError(f"{loc}: unknown label {g!r} in gold set")
        examples.append(
            Example(
                id=raw["id"],
                dataset_id=dataset_id,
                text=raw["text"],
                gold_labels=frozenset(golds),
            )
        )
    return tuple(examples)


def load_corpus(root_dir: str | Path) -> Corpus:
    """Load and fully validate a corpus directory.

    Raises CorpusError on any structural problem: missing files, malformed
    records, duplicate ids, gold labels referencing unknown labels, or
    non-null labels without descriptions.
    """
    root = Path(root_dir)
    manifest_path = root / "corpus.json"
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CorpusError(f"missing manifest {manifest_path}")
    except json.JSONDecodeError as e:
        raise CorpusError(f"{manifest_path}: malformed JSON: {e}")
    _require_keys(manifest, {"version", "datasets"}, set(), str(manifest_path))
    if manifest["version"] != FORMAT_VERSION:
        raise CorpusError(f"unsupported corpus version {manifest['version']!r}")
    ids = manifest["datasets"]
    if len(ids) != len(set(ids)):
        raise CorpusError("duplicate dataset ids in manifest")

    datasets = []
    for dataset_id in sorted(ids):
        meta = _load_meta(root / "datasets" / f"{dataset_id}.meta.json", dataset_id)
        labels = _parse_labels(meta["labels"], dataset_id, f"dataset {dataset_id!r}")
        examples = _load_examples(
            root / "datasets" / f"{dataset_id}.examples.jsonl",
            dataset_id,
            {l.id for l in labels},
        )
        datasets.append(
            Dataset(
                id=dataset_id,
                name=meta["name"],
                tags=frozenset(meta.get("tags", [])),
                eval_allowed=bool(meta.get("eval_allowed", True)),
                labels=labels,
                examples=examples,
            )
        )
    return Corpus(datasets=tuple(datasets))


def write_corpus(corpus: Corpus, root_dir: str | Path) -> None:
    """Write a corpus in the canonical on-disk format (LF, UTF-8, stable order)."""
    root = Path(root_dir)
    (root / "datasets").mkdir(parents=True, exist_ok=True)
    manifest = {"version": FORMAT_VERSION, "datasets": sorted(ds.id for ds in corpus.datasets)}
    _write_json(root / "corpus.json", manifest)
    for ds in corpus.datasets:
        meta = {
            "id": ds.id,
            "name": ds.name,
            "tags": sorted(ds.tags),
            "eval_allowed": ds.eval_allowed,
            "labels": [
                {
                    "id": label.id,
                    "name": label.name,
                    "null": label.null,
                    "descriptions": [
                        {"id": d.id, "question": d.question, "synthesized": d.synthesized}
                        for d in label.descriptions
                    ],
                }
                for label in ds.labels
            ],
        }
        _write_json(root / "datasets" / f"{ds.id}.meta.json", meta)
        lines = [
            json.dumps(
                {"id": ex.id, "text": ex.text, "labels": sorted(ex.gold_labels)},
                ensure_ascii=False,
            )
            for ex in ds.examples
        ]
        (root / "datasets" / f"{ds.id}.examples.jsonl").write_text(
            "".join(line + "\n" for line in lines), encoding="utf-8", newline="\n"
        )


def _write_json(path: Path, obj) -> None:
    path.write_text(
        json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8", newline="\n"
    )


@dataclass
class DatasetReport:
    dataset_id: str
    n_labels: int
    n_descriptions: int
    n_examples: int
    # description id -> (yes count, no count)
    balance: dict[str, tuple[int, int]] = field(default_factory=dict)


@dataclass
class ValidationReport:
    datasets: list[DatasetReport] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def format(self) -> str:
        out = []
        for rep in self.datasets:
            out.append(
                f"{rep.dataset_id}: {rep.n_labels} labels, "
                f"{rep.n_descriptions} descriptions, {rep.n_examples} examples"
            )
            for desc_id, (n_yes, n_no) in rep.balance.items():
                out.append(f"  {desc_id}: {n_yes} Yes / {n_no} No")
        for w in self.warnings:
            out.append(f"warning: {w}")
        return "\n".join(out)


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """Report per-dataset counts, per-description Yes/No balance, and soft warnings.

    Hard invariants are already enforced by load_corpus; this never raises
    and never mutates the corpus.
    """
    report = ValidationReport()
    for ds in corpus.datasets:
        rep = DatasetReport(
            dataset_id=ds.id,
            n_labels=len(ds.labels),
            n_descriptions=sum(len(l.descriptions) for l in ds.labels),
            n_examples=len(ds.examples),
        )
        gold_counts = {label.id: 0 for label in ds.labels}
        for ex in ds.examples:
            for g in ex.gold_labels:
                gold_counts[g] += 1
        for label in ds.labels:
            n_yes = gold_counts[label.id]
            n_no = len(ds.examples) - n_yes
            for desc in label.descriptions:
                rep.balance[desc.id] = (n_yes, n_no)
                if n_yes == 0:
                    report.warnings.append(
                        f"{ds.id}/{desc.id}: description has 0 positives"
                    )
                elif n_no == 0:
                    report.warnings.append(
                        f"{ds.id}/{desc.id}: description has 0 negatives"
                    )
        if ds.eval_allowed:
            evaluable = [d for d in ds.descriptions(include_synthesized=False)]
            if not evaluable:
                report.warnings.append(f"{ds.id}: no evaluable descriptions")
        report.datasets.append(rep)
    return report


def to_qa_instances(dataset: Dataset, description_id: str) -> list[QAInstance]:
    """Convert every example of `dataset` into a QA instance for one description.

    The answer is Yes exactly when the description's label is in the
    example's gold set, so null-class examples answer No everywhere.
    """
    desc = dataset.description_by_id(description_id)
    return [
        QAInstance(
            dataset_id=dataset.id,
            description_id=desc.id,
            example_id=ex.id,
            context=ex.text,
            question=desc.question,
            answer=YES if desc.label_id in ex.gold_labels else NO,
        )
        for ex in dataset.examples
    ]
