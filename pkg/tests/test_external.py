import json
import subprocess
import sys

import pytest

from metatune.corpus import QAInstance
from metatune.external import ExternalScorer, ProtocolError

STUB = f'"{sys.executable}" -m metatune.echo_stub'


def stub(mode=None):
    cmd = STUB if mode is None else f"{STUB} {mode}"
    return ExternalScorer.connect(cmd, timeout=30)


def qa(context, question, answer="Yes"):
    return QAInstance(dataset_id="d", description_id="q", example_id="e",
                      context=context, question=question, answer=answer)


def test_handshake_ok():
    with stub() as scorer:
        assert scorer.trainable


def test_score_roundtrip_deterministic():
    with stub() as scorer:
        items = [("ctx one", "q one?"), ("ctx two", "q two?"), ("ctx one", "q one?")]
        p = scorer.score_batch(items)
        assert len(p) == 3
        assert all(0.0 <= v <= 1.0 for v in p)
        assert p[0] == p[2]
        assert p == scorer.score_batch(items)


def test_train_roundtrip():
    with stub() as scorer:
        loss = scorer.train_batch([qa("a", "b", "Yes"), qa("c", "d", "No")])
        assert loss == pytest.approx(0.6931471805599453)


def test_save_load_roundtrip(tmp_path):
    path = tmp_path / "stub.ckpt"
    with stub() as scorer:
        scorer.save(path)
        assert path.exists()
        scorer.load(path)
        with pytest.raises(ProtocolError, match="no such checkpoint"):
            scorer.load(tmp_path / "missing.ckpt")


def test_garbage_first_line_rejected():
    with pytest.raises(ProtocolError, match="non-JSON"):
        stub("garbage-hello")


def test_version_mismatch_rejected():
    with pytest.raises(ProtocolError, match="version mismatch"):
        stub("version-99")


def test_out_of_range_probability_rejected():
    with stub("out-of-range") as scorer:
        with pytest.raises(ProtocolError, match="probability out of range"):
            scorer.score_batch([("a", "b")])


def test_permuted_ids_rejected():
    with stub("permute-ids") as scorer:
        with pytest.raises(ProtocolError, match="id mismatch"):
            scorer.score_batch([("a", "b"), ("c", "d")])


def test_spawn_failure():
    with pytest.raises(ProtocolError, match="cannot spawn"):
        ExternalScorer.connect("/no/such/binary-xyz")


def test_reply_timeout():
    cmd = f'"{sys.executable}" -c "import time; time.sleep(60)"'
    with pytest.raises(ProtocolError, match="timed out"):
        ExternalScorer.connect(cmd, timeout=0.5)


def test_stub_recovers_from_malformed_line():
    # poke the raw protocol: a malformed record must produce an error reply
    # and must not kill the adapter
    proc = subprocess.Popen(
        [sys.executable, "-m", "metatune.echo_stub"],
        stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1,
    )
    try:
        proc.stdin.write('{"type": "hello", "version": 1}\n')
        proc.stdin.write("{oops\n")
        proc.stdin.write('{"type": "score", "items": [{"id": "1", "context": "c", "question": "q"}]}\n')
        proc.stdin.flush()
        hello = json.loads(proc.stdout.readline())
        err = json.loads(proc.stdout.readline())
        scores = json.loads(proc.stdout.readline())
        assert hello["type"] == "hello"
        assert err["type"] == "error" and "malformed" in err["message"]
        assert scores["type"] == "scores"
        assert scores["items"][0]["id"] == "1"
    finally:
        proc.stdin.close()
        proc.wait(timeout=10)


def test_unknown_request_type_gets_error_record():
    proc = subprocess.Popen(
        [sys.executable, "-m", "metatune.echo_stub"],
        stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1,
    )
    try:
        proc.stdin.write('{"type": "frobnicate"}\n')
        proc.stdin.flush()
        reply = json.loads(proc.stdout.readline())
        assert reply["type"] == "error"
        assert "unknown request type" in reply["message"]
    finally:
        proc.stdin.close()
        proc.wait(timeout=10)
