"""Reference adapter for the external-scorer wire protocol.

Run as `python -m metatune.echo_stub`. Scores are a deterministic hash of
(context, question), so the stub needs no model weights and the same input
always gets the same probability. Useful for protocol conformance tests
and as a template for real adapters.

Failure-injection modes (first CLI argument) exercise harness-side error
handling: garbage-hello, version-99, out-of-range, permute-ids.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

from .rng import stable_hash64

PROTOCOL_VERSION = 1


def stub_probability(context: str, question: str) -> float:
    return (stable_hash64(context + "\x1f" + question) % 1000001) / 1000000.0


def _reply(record: dict) -> None:
    sys.stdout.write(json.dumps(record) + "\n")
    sys.stdout.flush()


def serve(mode: str = "ok") -> int:
    if mode == "garbage-hello":
        sys.stdout.write("this is not json\n")
        sys.stdout.flush()
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            if not isinstance(req, dict):
                raise ValueError("record is not an object")
        except ValueError as e:
            _reply({"type": "error", "message": f"malformed request: {e}"})
            continue
        kind = req.get("type")
        if kind == "hello":
            version = 99 if mode == "version-99" else PROTOCOL_VERSION
            _reply({"type": "hello", "version": version, "trainable": True})
        elif kind == "score":
            items = req.get("items", [])
            out = [
                {
                    "id": item.get("id"),
                    "p_yes": 1.3
                    if mode == "out-of-range"
                    else stub_probability(item.get("context", ""), item.get("question", "")),
                }
                for item in items
            ]
            if mode == "permute-ids":
                out = list(reversed(out))
            _reply({"type": "scores", "items": out})
        elif kind == "train":
            # stateless stub: pretend p = 0.5 everywhere
            _reply({"type": "trained", "loss": math.log(2.0)})
        elif kind == "save":
            try:
                Path(req["path"]).write_text('{"stub": true}\n', encoding="utf-8")
                _reply({"type": "ok"})
            except (KeyError, OSError) as e:
                _reply({"type": "error", "message": f"save failed: {e}"})
        elif kind == "load":
            if "path" in req and Path(req["path"]).exists():
                _reply({"type": "ok"})
            else:
                _reply({"type": "error", "message": "load failed: no such checkpoint"})
        else:
            _reply({"type": "error", "message": f"unknown request type: {kind!r}"})
    return 0


if __name__ == "__main__":
    sys.exit(serve(sys.argv[1] if len(sys.argv) > 1 else "ok"))
