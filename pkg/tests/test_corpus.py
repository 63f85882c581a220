import json

import pytest

from metatune.corpus import (
    CorpusError,
    load_corpus,
    to_qa_instances,
    validate_corpus,
    write_corpus,
)

from conftest import tiny_corpus_files, write_raw_corpus


def test_load_tiny_corpus(tiny_corpus):
    assert tiny_corpus.dataset_ids == ["emotion", "hotel", "imdb", "webtopics"]
    imdb = tiny_corpus.dataset_by_id("imdb")
    assert len(imdb.labels) == 2
    assert len(imdb.examples) == 4
    assert imdb.label_by_id("pos").descriptions[0].question == "Does the user like this movie?"


def test_load_is_order_independent(tmp_path, tiny_corpus):
    root = tiny_corpus_files(tmp_path / "shuffled")
    manifest = json.loads((root / "corpus.json").read_text())
    manifest["datasets"] = list(reversed(manifest["datasets"]))
    (root / "corpus.json").write_text(json.dumps(manifest))
    assert load_corpus(root) == tiny_corpus


def test_roundtrip_identity(tmp_path, tiny_corpus):
    out = tmp_path / "rt"
    write_corpus(tiny_corpus, out)
    assert load_corpus(out) == tiny_corpus


def test_write_is_deterministic(tmp_path, tiny_corpus):
    a, b = tmp_path / "a", tmp_path / "b"
    write_corpus(tiny_corpus, a)
    write_corpus(tiny_corpus, b)
    for rel in ["corpus.json", "datasets/imdb.meta.json", "datasets/imdb.examples.jsonl"]:
        assert (a / rel).read_bytes() == (b / rel).read_bytes()


def test_missing_manifest(tmp_path):
    with pytest.raises(CorpusError, match="missing manifest"):
        load_corpus(tmp_path / "nowhere")


def test_missing_dataset_file(tmp_path):
    root = tmp_path / "c"
    write_raw_corpus(root, metas=[], examples={}, manifest_ids=["ghost"])
    with pytest.raises(CorpusError, match="missing dataset file"):
        load_corpus(root)


def test_unknown_gold_label_rejected(tmp_path):
    root = write_raw_corpus(
        tmp_path,
        metas=[{
            "id": "d", "name": "d", "tags": ["t"], "eval_allowed": True,
            "labels": [{"id": "joy", "name": "joy", "null": False,
                        "descriptions": [{"id": "q1", "question": "joy?"}]}],
        }],
        examples={"d": [{"id": "e1", "text": "hi", "labels": ["joyy"]}]},
    )
    with pytest.raises(CorpusError, match="unknown label 'joyy'"):
        load_corpus(root)


def test_undescribed_label_rejected(tmp_path):
    root = write_raw_corpus(
        tmp_path,
        metas=[{
            "id": "d", "name": "d", "tags": ["t"], "eval_allowed": True,
            "labels": [{"id": "x", "name": "x", "null": False, "descriptions": []}],
        }],
        examples={"d": []},
    )
    with pytest.raises(CorpusError, match="undescribed label"):
        load_corpus(root)


def test_null_label_with_descriptions_rejected(tmp_path):
    root = write_raw_corpus(
        tmp_path,
        metas=[{
            "id": "d", "name": "d", "tags": ["t"], "eval_allowed": True,
            "labels": [{"id": "x", "name": "x", "null": True,
                        "descriptions": [{"id": "q1", "question": "x?"}]}],
        }],
        examples={"d": []},
    )
    with pytest.raises(CorpusError, match="null label"):
        load_corpus(root)


def test_too_many_handwritten_descriptions_rejected(tmp_path):
    descs = [{"id": f"q{i}", "question": f"v{i}?"} for i in range(4)]
    root = write_raw_corpus(
        tmp_path,
        metas=[{
            "id": "d", "name": "d", "tags": ["t"], "eval_allowed": True,
            "labels": [{"id": "x", "name": "x", "null": False, "descriptions": descs}],
        }],
        examples={"d": []},
    )
    with pytest.raises(CorpusError, match="non-synthesized"):
        load_corpus(root)


def test_duplicate_example_id_rejected(tmp_path):
    root = write_raw_corpus(
        tmp_path,
        metas=[{
            "id": "d", "name": "d", "tags": ["t"], "eval_allowed": True,
            "labels": [{"id": "x", "name": "x", "null": False,
                        "descriptions": [{"id": "q1", "question": "x?"}]}],
        }],
        examples={"d": [{"id": "e1", "text": "a", "labels": []},
                        {"id": "e1", "text": "b", "labels": []}]},
    )
    with pytest.raises(CorpusError, match="duplicate example id"):
        load_corpus(root)


def test_unknown_fields_rejected(tmp_path):
    root = write_raw_corpus(
        tmp_path,
        metas=[{
            "id": "d", "name": "d", "tags": ["t"], "eval_allowed": True, "extra": 1,
            "labels": [{"id": "x", "name": "x", "null": False,
                        "descriptions": [{"id": "q1", "question": "x?"}]}],
        }],
        examples={"d": []},
    )
    with pytest.raises(CorpusError, match="unknown field"):
        load_corpus(root)


def test_malformed_example_line(tmp_path):
    root = write_raw_corpus(
        tmp_path,
        metas=[{
            "id": "d", "name": "d", "tags": ["t"], "eval_allowed": True,
            "labels": [{"id": "x", "name": "x", "null": False,
                        "descriptions": [{"id": "q1", "question": "x?"}]}],
        }],
        examples={"d": []},
    )
    (root / "datasets" / "d.examples.jsonl").write_text('{"id": "e1"\n', encoding="utf-8")
    with pytest.raises(CorpusError, match="malformed record"):
        load_corpus(root)


def test_empty_question_rejected(tmp_path):
    root = write_raw_corpus(
        tmp_path,
        metas=[{
            "id": "d", "name": "d", "tags": ["t"], "eval_allowed": True,
            "labels": [{"id": "x", "name": "x", "null": False,
                        "descriptions": [{"id": "q1", "question": ""}]}],
        }],
        examples={"d": []},
    )
    with pytest.raises(CorpusError, match="empty question"):
        load_corpus(root)


# -- validation report --------------------------------------------------------

def test_validation_counts_and_balance(tiny_corpus):
    report = validate_corpus(tiny_corpus)
    imdb = next(r for r in report.datasets if r.dataset_id == "imdb")
    assert imdb.n_labels == 2
    assert imdb.n_descriptions == 3
    assert imdb.n_examples == 4
    assert imdb.balance["pos-q1"] == (2, 2)
    assert imdb.balance["neg-q1"] == (2, 2)


def test_validation_zero_positive_warning(tmp_path):
    root = write_raw_corpus(
        tmp_path,
        metas=[{
            "id": "d", "name": "d", "tags": ["t"], "eval_allowed": True,
            "labels": [
                {"id": "x", "name": "x", "null": False,
                 "descriptions": [{"id": "q1", "question": "x?"}]},
                {"id": "y", "name": "y", "null": False,
                 "descriptions": [{"id": "q2", "question": "y?"}]},
            ],
        }],
        examples={"d": [{"id": "e1", "text": "a", "labels": ["y"]}]},
    )
    report = validate_corpus(load_corpus(root))
    assert any("q1: description has 0 positives" in w for w in report.warnings)


def test_validation_no_evaluable_descriptions_warning(tmp_path):
    root = write_raw_corpus(
        tmp_path,
        metas=[{
            "id": "d", "name": "d", "tags": ["t"], "eval_allowed": True,
            "labels": [{"id": "x", "name": "x", "null": False,
                        "descriptions": [{"id": "q1", "question": "x?", "synthesized": True}]}],
        }],
        examples={"d": [{"id": "e1", "text": "a", "labels": ["x"]}]},
    )
    report = validate_corpus(load_corpus(root))
    assert any("no evaluable descriptions" in w for w in report.warnings)


def test_validation_does_not_mutate(tiny_corpus):
    before = tiny_corpus
    validate_corpus(tiny_corpus)
    assert tiny_corpus == before


# -- QA conversion -------------------------------------------------------------

def test_to_qa_instances_positive_answer(tiny_corpus):
    imdb = tiny_corpus.dataset_by_id("imdb")
    instances = to_qa_instances(imdb, "pos-q1")
    assert len(instances) == len(imdb.examples)
    by_ex = {i.example_id: i for i in instances}
    assert by_ex["m1"].answer == "Yes"
    assert by_ex["m2"].answer == "No"
    assert by_ex["m1"].question == "Does the user like this movie?"
    assert by_ex["m1"].context == imdb.examples[0].text


def test_to_qa_instances_null_class_answers_no(tiny_corpus):
    emotion = tiny_corpus.dataset_by_id("emotion")
    for desc_id in ("joy-q1", "anger-q1"):
        by_ex = {i.example_id: i for i in to_qa_instances(emotion, desc_id)}
        assert by_ex["e3"].answer == "No"


def test_to_qa_instances_counts(tiny_corpus):
    emotion = tiny_corpus.dataset_by_id("emotion")
    instances = to_qa_instances(emotion, "joy-q1")
    assert sum(1 for i in instances if i.answer == "Yes") == 1
    assert sum(1 for i in instances if i.answer == "No") == 2


def test_to_qa_instances_unknown_description(tiny_corpus):
    with pytest.raises(KeyError):
        to_qa_instances(tiny_corpus.dataset_by_id("imdb"), "nope")
