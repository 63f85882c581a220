"""Client for external scorers speaking the line-delimited wire protocol.

The adapter is any child process that answers one JSON record per line on
stdout for each record received on stdin:

    harness -> {"type": "hello", "version": 1}
    adapter <- {"type": "hello", "version": 1, "trainable": true}
    harness -> {"type": "score", "items": [{"id", "context", "question"}, ...]}
    adapter <- {"type": "scores", "items": [{"id", "p_yes"}, ...]}   (same order)
    harness -> {"type": "train", "items": [{..., "answer": "Yes"|"No"}, ...]}
    adapter <- {"type": "trained", "loss": 0.69}
    harness -> {"type": "save"|"load", "path": "..."}
    adapter <- {"type": "ok"}
    adapter <- {"type": "error", "message": "..."}   (any request may fail)

The client validates replies strictly: ids must round-trip 1:1 and in
order, probabilities must be numbers in [0, 1], and a reply must arrive
within the timeout (default 300 s per batch).
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import threading

from .scorers import Scorer

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 300.0


class ProtocolError(Exception):
    pass


class ExternalScorer(Scorer):
    concurrency_safe = False  # one request stream per process

    def __init__(self, proc: subprocess.Popen, timeout: float):
        self._proc = proc
        self._timeout = timeout
        self._lines: queue.Queue = queue.Queue()
        self._seq = 0
        self._closed = False
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self.trainable = False  # set by handshake

    @classmethod
    def connect(cls, command_line: str, timeout: float = DEFAULT_TIMEOUT) -> "ExternalScorer":
        """Spawn the adapter and complete the hello handshake."""
        argv = shlex.split(command_line)
        if not argv:
            raise ProtocolError("empty scorer command line")
        try:
            proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as e:
            raise ProtocolError(f"cannot spawn scorer {command_line!r}: {e}")
        scorer = cls(proc, timeout)
        try:
            reply = scorer._roundtrip({"type": "hello", "version": PROTOCOL_VERSION})
        except ProtocolError:
            scorer.close()
            raise
        if reply.get("type") != "hello":
            scorer.close()
            raise ProtocolError(f"expected hello reply, got {reply.get('type')!r}")
        if reply.get("version") != PROTOCOL_VERSION:
            scorer.close()
            raise ProtocolError(
                f"protocol version mismatch: harness speaks {PROTOCOL_VERSION}, "
                f"adapter speaks {reply.get('version')!r}"
            )
        scorer.trainable = bool(reply.get("trainable", False))
        return scorer

    # -- plumbing ------------------------------------------------------------

    def _pump(self):
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF

    def _roundtrip(self, record: dict) -> dict:
        try:
            self._proc.stdin.write(json.dumps(record) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError, OSError) as e:
            raise ProtocolError(f"adapter stdin closed: {e}")
        try:
            line = self._lines.get(timeout=self._timeout)
        except queue.Empty:
            raise ProtocolError(f"adapter reply timed out after {self._timeout:g} s")
        if line is None:
            raise ProtocolError("adapter closed its stdout")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError:
            raise ProtocolError(f"adapter sent a non-JSON line: {line.strip()!r}")
        if not isinstance(reply, dict):
            raise ProtocolError(f"adapter sent a non-object record: {line.strip()!r}")
        if reply.get("type") == "error":
            raise ProtocolError(f"adapter error: {reply.get('message')}")
        return reply

    def _next_ids(self, n: int) -> list[str]:
        self._seq += 1
        return [f"{self._seq}:{k}" for k in range(n)]

    # -- ScorerContract ------------------------------------------------------

    def score_batch(self, items) -> list[float]:
        ids = self._next_ids(len(items))
        reply = self._roundtrip(
            {
                "type": "score",
                "items": [
                    {"id": i, "context": c, "question": q}
                    for i, (c, q) in zip(ids, items)
                ],
            }
        )
        if reply.get("type") != "scores":
            raise ProtocolError(f"expected scores reply, got {reply.get('type')!r}")
        got = reply.get("items")
        if not isinstance(got, list) or len(got) != len(ids):
            raise ProtocolError(
                f"id mismatch: sent {len(ids)} items, got "
                f"{len(got) if isinstance(got, list) else 'no'} back"
            )
        out = []
        for expect_id, item in zip(ids, got):
            if item.get("id") != expect_id:
                raise ProtocolError(
                    f"id mismatch: expected {expect_id!r}, got {item.get('id')!r}"
                )
            p = item.get("p_yes")
            if isinstance(p, bool) or not isinstance(p, (int, float)):
                raise ProtocolError(f"p_yes is not a number: {p!r}")
            if not 0.0 <= p <= 1.0:
                raise ProtocolError(f"probability out of range: {p!r}")
            out.append(float(p))
        return out

    def train_batch(self, instances) -> float:
        if not self.trainable:
            raise ProtocolError("adapter declared trainable=false in its handshake")
        ids = self._next_ids(len(instances))
        reply = self._roundtrip(
            {
                "type": "train",
                "items": [
                    {
                        "id": i,
                        "context": inst.context,
                        "question": inst.question,
                        "answer": inst.answer,
                    }
                    for i, inst in zip(ids, instances)
                ],
            }
        )
        if reply.get("type") != "trained":
            raise ProtocolError(f"expected trained reply, got {reply.get('type')!r}")
        loss = reply.get("loss")
        if isinstance(loss, bool) or not isinstance(loss, (int, float)):
            raise ProtocolError(f"loss is not a number: {loss!r}")
        return float(loss)

    def save(self, path) -> None:
        reply = self._roundtrip({"type": "save", "path": str(path)})
        if reply.get("type") != "ok":
            raise ProtocolError(f"expected ok reply, got {reply.get('type')!r}")

    def load(self, path) -> None:
        reply = self._roundtrip({"type": "load", "path": str(path)})
        if reply.get("type") != "ok":
            raise ProtocolError(f"expected ok reply, got {reply.get('type')!r}")

    # -- lifecycle -------------------------------------------------------------

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            if self._proc.stdin:
                self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
