"""Protocol loop: one JSON record in, one JSON record out, per line.

Any per-request failure (malformed JSON, missing fields, model errors,
out-of-memory) becomes an {"type": "error"} record; the loop itself never
dies on bad input.
"""

from __future__ import annotations

import json
import sys

from .config import AdapterConfig
from .models import build_model

PROTOCOL_VERSION = 1


def _normalize(score_yes: float, score_no: float) -> float:
    if score_yes < 0 or score_no < 0:
        raise ValueError("model produced negative scores")
    total = score_yes + score_no
    if total == 0:
        return 0.5
    return score_yes / total


def handle_request(req: dict, model, config: AdapterConfig) -> dict:
    kind = req.get("type")
    if kind == "hello":
        return {
            "type": "hello",
            "version": PROTOCOL_VERSION,
            "trainable": bool(model.trainable),
        }
    if kind == "score":
        items = req["items"]
        prompts = [
            config.render(item["question"], item["context"]) for item in items
        ]
        pairs = model.yes_no_scores(prompts)
        return {
            "type": "scores",
            "items": [
                {"id": item["id"], "p_yes": _normalize(y, n)}
                for item, (y, n) in zip(items, pairs)
            ],
        }
    if kind == "train":
        items = req["items"]
        answers = [item["answer"] for item in items]
        if any(a not in ("Yes", "No") for a in answers):
            raise ValueError("answers must be Yes or No")
        prompts = [
            config.render(item["question"], item["context"]) for item in items
        ]
        loss = model.train_step(prompts, answers)
        return {"type": "trained", "loss": float(loss)}
    if kind == "save":
        model.save(req["path"])
        return {"type": "ok"}
    if kind == "load":
        model.load(req["path"])
        return {"type": "ok"}
    raise ValueError(f"unknown request type: {kind!r}")


def serve(config: AdapterConfig, stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    model = build_model(config)
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            if not isinstance(req, dict):
                raise ValueError("record is not an object")
            reply = handle_request(req, model, config)
        except (KeyboardInterrupt, SystemExit):
            raise
        except BaseException as e:  # OOM included: stay alive, report, continue
            reply = {"type": "error", "message": f"{type(e).__name__}: {e}"}
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()
    return 0
