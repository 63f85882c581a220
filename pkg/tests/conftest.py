import json
from pathlib import Path

import pytest

from metatune.corpus import load_corpus


def write_raw_corpus(root: Path, metas: list[dict], examples: dict[str, list[dict]],
                     manifest_ids=None) -> Path:
    """Write corpus files from raw dicts so tests can inject malformed data."""
    (root / "datasets").mkdir(parents=True, exist_ok=True)
    ids = manifest_ids if manifest_ids is not None else [m["id"] for m in metas]
    (root / "corpus.json").write_text(
        json.dumps({"version": 1, "datasets": ids}), encoding="utf-8"
    )
    for meta in metas:
        (root / "datasets" / f"{meta['id']}.meta.json").write_text(
            json.dumps(meta), encoding="utf-8"
        )
    for dataset_id, rows in examples.items():
        lines = "".join(json.dumps(r) + "\n" for r in rows)
        (root / "datasets" / f"{dataset_id}.examples.jsonl").write_text(
            lines, encoding="utf-8"
        )
    return root


def tiny_corpus_files(root: Path) -> Path:
    """A small three-dataset corpus: two similar review tasks plus an
    emotion task with a null class and a train-only untagged dataset."""
    metas = [
        {
            "id": "imdb",
            "name": "movie review sentiment",
            "tags": ["review", "good vs. bad"],
            "eval_allowed": True,
            "labels": [
                {
                    "id": "pos",
                    "name": "positive",
                    "null": False,
                    "descriptions": [
                        {"id": "pos-q1", "question": "Does the user like this movie?",
                         "synthesized": False},
                        {"id": "pos-q2", "question": "Is this a positive review?",
                         "synthesized": False},
                    ],
                },
                {
                    "id": "neg",
                    "name": "negative",
                    "null": False,
                    "descriptions": [
                        {"id": "neg-q1", "question": "Does the user dislike this movie?",
                         "synthesized": False}
                    ],
                },
            ],
        },
        {
            "id": "hotel",
            "name": "hotel review sentiment",
            "tags": ["review", "good vs. bad"],
            "eval_allowed": True,
            "labels": [
                {
                    "id": "pos",
                    "name": "positive",
                    "null": False,
                    "descriptions": [
                        {"id": "h-pos-q1", "question": "Did the guest enjoy the stay?",
                         "synthesized": False}
                    ],
                },
                {
                    "id": "neg",
                    "name": "negative",
                    "null": False,
                    "descriptions": [
                        {"id": "h-neg-q1", "question": "Was the guest unhappy with the hotel?",
                         "synthesized": False}
                    ],
                },
            ],
        },
        {
            "id": "emotion",
            "name": "tweet emotion",
            "tags": ["emotion", "social-media"],
            "eval_allowed": True,
            "labels": [
                {
                    "id": "joy",
                    "name": "joy",
                    "null": False,
                    "descriptions": [
                        {"id": "joy-q1", "question": "Does the text express joy?",
                         "synthesized": False}
                    ],
                },
                {
                    "id": "anger",
                    "name": "anger",
                    "null": False,
                    "descriptions": [
                        {"id": "anger-q1", "question": "Is the writer angry?",
                         "synthesized": False}
                    ],
                },
                {"id": "none", "name": "no emotion", "null": True, "descriptions": []},
            ],
        },
        {
            "id": "webtopics",
            "name": "scraped page topics (noisy, train only)",
            "tags": [],
            "eval_allowed": False,
            "labels": [
                {
                    "id": "sports",
                    "name": "sports",
                    "null": False,
                    "descriptions": [
                        {"id": "sp-syn-1", "question": "Is this page about sports?",
                         "synthesized": True}
                    ],
                }
            ],
        },
    ]
    examples = {
        "imdb": [
            {"id": "m1", "text": "My favourite police series of all time turns to a film.",
             "labels": ["pos"]},
            {"id": "m2", "text": "Stupid! I can not stand this anymore.", "labels": ["neg"]},
            {"id": "m3", "text": "A small gem, smart and alert.", "labels": ["pos"]},
            {"id": "m4", "text": "Total waste of two hours.", "labels": ["neg"]},
        ],
        "hotel": [
            {"id": "h1", "text": "loved stay, clean spacious room friendly staff",
             "labels": ["pos"]},
            {"id": "h2", "text": "rooms like hospital rooms, noisy and overrated",
             "labels": ["neg"]},
            {"id": "h3", "text": "great breakfast, loved location", "labels": ["pos"]},
        ],
        "emotion": [
            {"id": "e1", "text": "Making new friends is always fun", "labels": ["joy"]},
            {"id": "e2", "text": "People that smoke cigarettes irritate my soul.",
             "labels": ["anger"]},
            {"id": "e3", "text": "The meeting is at noon.", "labels": []},
        ],
        "webtopics": [
            {"id": "w1", "text": "formula one driver wins the race", "labels": ["sports"]},
            {"id": "w2", "text": "stochastic heat equation on manifolds", "labels": []},
        ],
    }
    return write_raw_corpus(root, metas, examples)


@pytest.fixture
def tiny_corpus_dir(tmp_path):
    return tiny_corpus_files(tmp_path / "corpus")


@pytest.fixture
def tiny_corpus(tiny_corpus_dir):
    return load_corpus(tiny_corpus_dir)
