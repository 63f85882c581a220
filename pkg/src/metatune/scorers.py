"""Scorers: anything that maps (context, question) to P(Yes).

`NativeScorer` is a hashed-feature logistic model trained by SGD. It is a
desk-scale stand-in for a fine-tuned language model: fast, deterministic,
and expressive enough (via question x context cross features) to pick up
"the context mentions what the question asks about".

External models plug in through the line protocol client in
`metatune.external`; both obey the same contract:

    score_batch([(context, question), ...]) -> [p_yes, ...]
    train_batch([QAInstance, ...])          -> batch loss (pre-update)
    save(path) / load(path)
"""

from __future__ import annotations

import functools
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import YES
from .rng import stable_hash128

HASH_DIM = 1 << 20
DEFAULT_LEARNING_RATE = 0.05

_TOKEN_RE = re.compile(r"[^0-9a-z]+")


class ScorerError(Exception):
    pass


class Scorer:
    """Contract shared by native and external scorers."""

    concurrency_safe = False
    trainable = True

    def score_batch(self, items) -> list[float]:
        raise NotImplementedError

    def train_batch(self, instances) -> float:
        raise NotImplementedError

    def save(self, path) -> None:
        raise NotImplementedError

    def load(self, path) -> None:
        raise NotImplementedError


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumeric characters."""
    return [t for t in _TOKEN_RE.split(text.lower()) if t]


@functools.lru_cache(maxsize=1 << 16)
def _featurize(context: str, question: str, salt: int):
    """Hashed feature indices/signs for one (context, question) pair.

    Features (deduplicated, first-occurrence order): context unigrams "C:",
    context bigrams "CB:a|b", question unigrams "Q:", and every question x
    context unigram pair "X:q|c". Each feature hashes to a bucket in
    [0, 2^20) with a +-1 sign from an independent second hash; the value of
    every feature is 1/sqrt(#features).
    """
    ctx_tokens = tokenize(context)
    q_tokens = tokenize(question)
    feats: dict[str, None] = {}
    for t in ctx_tokens:
        feats[f"C:{t}"] = None
    for a, b in zip(ctx_tokens, ctx_tokens[1:]):
        feats[f"CB:{a}|{b}"] = None
    for t in q_tokens:
        feats[f"Q:{t}"] = None
    for q in dict.fromkeys(q_tokens):
        for c in dict.fromkeys(ctx_tokens):
            feats[f"X:{q}|{c}"] = None
    if not feats:
        idx = np.empty(0, dtype=np.int64)
        coef = np.empty(0, dtype=np.float64)
        return idx, coef
    idx = np.empty(len(feats), dtype=np.int64)
    coef = np.empty(len(feats), dtype=np.float64)
    scale = 1.0 / math.sqrt(len(feats))
    for i, feat in enumerate(feats):
        low, high = stable_hash128(feat, salt)
        idx[i] = low & (HASH_DIM - 1)
        coef[i] = scale if (high & 1) == 0 else -scale
    idx.flags.writeable = False
    coef.flags.writeable = False
    return idx, coef


def feature_bucket(feature: str, salt: int = 0) -> tuple[int, float]:
    """Bucket index and sign of one feature string (e.g. "X:sports|football")."""
    low, high = stable_hash128(feature, salt)
    return low & (HASH_DIM - 1), 1.0 if (high & 1) == 0 else -1.0


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class NativeScorer(Scorer):
    """Logistic regression over signed hashed text features.

    Zero-initialized, so an untrained scorer outputs exactly 0.5 for every
    input (all-ties, AUC 0.5 on any evaluation set).
    """

    concurrency_safe = True  # scoring reads weights only

    CHECKPOINT_FORMAT = "metatune-native-checkpoint"
    CHECKPOINT_VERSION = 1

    def __init__(self, learning_rate: float = DEFAULT_LEARNING_RATE, salt: int = 0):
        self.weights = np.zeros(HASH_DIM, dtype=np.float64)
        self.bias = 0.0
        self.learning_rate = float(learning_rate)
        self.salt = int(salt)

    # -- scoring -----------------------------------------------------------

    def _logits(self, items) -> tuple[np.ndarray, list]:
        feats = [_featurize(context, question, self.salt) for context, question in items]
        z = np.array(
            [float(self.weights[idx] @ coef) + self.bias for idx, coef in feats],
            dtype=np.float64,
        )
        return z, feats

    def score_batch(self, items) -> list[float]:
        z, _ = self._logits(items)
        return [float(p) for p in _sigmoid(z)]

    # -- training ----------------------------------------------------------

    def batch_loss(self, instances) -> float:
        """Mean binary cross-entropy of the current weights on a batch."""
        z, _ = self._logits([(i.context, i.question) for i in instances])
        y = np.array([1.0 if i.answer == YES else 0.0 for i in instances])
        # log(1 + e^z) - y*z, computed stably
        return float(np.mean(np.logaddexp(0.0, z) - y * z))

    def batch_gradients(self, instances):
        """(loss, per-bucket weight gradients, bias gradient) of the mean BCE."""
        z, feats = self._logits([(i.context, i.question) for i in instances])
        y = np.array([1.0 if i.answer == YES else 0.0 for i in instances])
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        g = (_sigmoid(z) - y) / len(instances)
        grads: dict[int, float] = {}
        for gi, (idx, coef) in zip(g, feats):
            for bucket, c in zip(idx.tolist(), coef.tolist()):
                grads[bucket] = grads.get(bucket, 0.0) + gi * c
        return loss, grads, float(g.sum())

    def train_batch(self, instances) -> float:
        """One SGD step on the mean BCE; returns the pre-update loss."""
        if not instances:
            raise ScorerError("empty training batch")
        z, feats = self._logits([(i.context, i.question) for i in instances])
        y = np.array([1.0 if i.answer == YES else 0.0 for i in instances])
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        g = (_sigmoid(z) - y) / len(instances)
        all_idx = np.concatenate([idx for idx, _ in feats])
        all_upd = np.concatenate(
            [(-self.learning_rate * gi) * coef for gi, (_, coef) in zip(g, feats)]
        )
        np.add.at(self.weights, all_idx, all_upd)
        self.bias -= self.learning_rate * float(g.sum())
        return loss

    # -- checkpoints ---------------------------------------------------------

    def _header(self) -> dict:
        return {
            "format": self.CHECKPOINT_FORMAT,
            "version": self.CHECKPOINT_VERSION,
            "dim": HASH_DIM,
            "bias": self.bias,
            "learning_rate": self.learning_rate,
            "salt": self.salt,
        }

    def save(self, path) -> None:
        # one JSON header line + raw little-endian float64 weights; no
        # timestamps, so identical state gives identical bytes
        header = json.dumps(self._header(), sort_keys=True).encode("utf-8")
        with open(path, "wb") as f:
            f.write(header + b"\n")
            f.write(np.ascontiguousarray(self.weights, dtype="<f8").tobytes())

    def load(self, path) -> None:
        with open(path, "rb") as f:
            header = json.loads(f.readline().decode("utf-8"))
            if header.get("format") != self.CHECKPOINT_FORMAT:
                raise ScorerError(f"{path}: not a native scorer checkpoint")
            if header.get("version") != self.CHECKPOINT_VERSION:
                raise ScorerError(f"{path}: unsupported checkpoint version")
            if header.get("dim") != HASH_DIM:
                raise ScorerError(f"{path}: hash dimension mismatch")
            raw = f.read()
        weights = np.frombuffer(raw, dtype="<f8")
        if weights.shape != (HASH_DIM,):
            raise ScorerError(f"{path}: truncated checkpoint")
        self.weights = weights.astype(np.float64)
        self.bias = float(header["bias"])
        self.learning_rate = float(header["learning_rate"])
        self.salt = int(header["salt"])

    def state_digest(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self._header(), sort_keys=True).encode("utf-8"))
        h.update(np.ascontiguousarray(self.weights, dtype="<f8").tobytes())
        return h.hexdigest()


class OverlapScorer(Scorer):
    """Frozen baseline: p_yes grows with question/context token overlap.

    p = k / (k + 1) for k shared unique tokens -- strictly increasing in
    overlap, so its AUC reflects pure lexical match. Not trainable.
    """

    concurrency_safe = True
    trainable = False

    def score_batch(self, items) -> list[float]:
        out = []
        for context, question in items:
            k = len(set(tokenize(context)) & set(tokenize(question)))
            out.append(k / (k + 1.0))
        return out

    def train_batch(self, instances) -> float:
        raise ScorerError("overlap scorer is not trainable")


# ---------------------------------------------------------------------------
# Meta-tuning loop

@dataclass
class TrainRunConfig:
    steps: int = 5000
    batch_size: int = 32
    checkpoint_every: int = 0  # 0: only the final checkpoint
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1:
            raise ScorerError("steps and batch_size must be >= 1")
        if self.checkpoint_every < 0:
            raise ScorerError("checkpoint_every must be >= 0")


@dataclass(frozen=True)
class Checkpoint:
    step: int
    path: Path


@dataclass
class CheckpointSeries:
    checkpoints: list[Checkpoint] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    steps_completed: int = 0
    exhausted: bool = False


def run_meta_tuning(scorer, sampler, config: TrainRunConfig,
                    out_dir: str | Path | None = None) -> CheckpointSeries:
    """Train `scorer` on `config.steps` batches from `sampler`.

    Checkpoints are written every `checkpoint_every` steps plus once at the
    end. If the sampler's pool drains first, training stops early and the
    series is flagged `exhausted`.
    """
    if out_dir is None:
        raise ScorerError("run_meta_tuning needs an output directory for checkpoints")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series = CheckpointSeries()

    def save_checkpoint(step: int) -> None:
        path = out / f"checkpoint-{step:07d}.ckpt"
        scorer.save(path)
        series.checkpoints.append(Checkpoint(step=step, path=path))

    for step in range(1, config.steps + 1):
        batch = sampler.next_batch(config.batch_size)
        if not batch:
            series.exhausted = True
            break
        series.losses.append(scorer.train_batch(batch))
        series.steps_completed = step
        if config.checkpoint_every and step % config.checkpoint_every == 0:
            save_checkpoint(step)
        if sampler.exhausted:
            series.exhausted = True
            break
    last = series.steps_completed
    if not series.checkpoints or series.checkpoints[-1].step != last:
        save_checkpoint(last)
    return series
