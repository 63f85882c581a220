"""Model backends behind the adapter.

Every backend answers `yes_no_scores(prompts)` with non-negative
(score_yes, score_no) pairs; the serving layer normalizes them to
p = yes / (yes + no). Stub backends are dependency-free and deterministic,
for protocol conformance testing; the HuggingFace backend does real
seq2seq scoring and fine-tuning and is only imported when requested.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

from .config import AdapterConfig, ConfigError


def _hash_unit(text: str) -> float:
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return (int.from_bytes(digest, "little") % 1000001) / 1000000.0


class StubModel:
    """Deterministic model with no weights.

    Variants:
        stub:hash          p depends on a stable hash of the prompt
        stub:constant:<p>  the same p for every prompt
        stub:equal         equal unnormalized Yes/No scores (p = 0.5)
    """

    trainable = True

    def __init__(self, variant: str):
        self.variant = variant
        self.steps = 0
        if variant.startswith("constant:"):
            self.constant = float(variant.split(":", 1)[1])
            if not 0.0 <= self.constant <= 1.0:
                raise ConfigError(f"stub constant must be in [0,1]: {self.constant}")
        elif variant not in ("hash", "equal"):
            raise ConfigError(f"unknown stub variant {variant!r}")

    def _p(self, prompt: str) -> float:
        if self.variant == "hash":
            return _hash_unit(prompt)
        if self.variant == "equal":
            return 0.5
        return self.constant

    def yes_no_scores(self, prompts):
        if self.variant == "equal":
            return [(0.7, 0.7) for _ in prompts]  # normalizes to exactly 0.5
        return [(self._p(p), 1.0 - self._p(p)) for p in prompts]

    def train_step(self, prompts, answers) -> float:
        # no weights to move; report the binary cross-entropy of the current
        # (fixed) predictions so losses are still meaningful
        self.steps += 1
        total = 0.0
        for prompt, answer in zip(prompts, answers):
            p = min(max(self._p(prompt), 1e-12), 1.0 - 1e-12)
            total += -math.log(p if answer == "Yes" else 1.0 - p)
        return total / max(len(prompts), 1)

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps({"variant": self.variant, "steps": self.steps}) + "\n",
            encoding="utf-8",
        )

    def load(self, path) -> None:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("variant") != self.variant:
            raise ConfigError(
                f"checkpoint variant {doc.get('variant')!r} does not match {self.variant!r}"
            )
        self.steps = int(doc.get("steps", 0))


class HFSeq2SeqModel:
    """T5-style seq2seq backend: P(Yes)/P(No) of the first decoded token.

    Training runs one AdamW step per request on the standard seq2seq
    cross-entropy against the gold "Yes"/"No" target.
    """

    trainable = True

    def __init__(self, model_id: str, device: str, max_len: int,
                 learning_rate: float = 1e-4):
        import torch
        from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

        self._torch = torch
        self.device = device
        self.max_len = max_len
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForSeq2SeqLM.from_pretrained(model_id).to(device)
        self.optimizer = torch.optim.AdamW(self.model.parameters(), lr=learning_rate)
        self.yes_id = self.tokenizer("Yes", add_special_tokens=False).input_ids[0]
        self.no_id = self.tokenizer("No", add_special_tokens=False).input_ids[0]

    def _encode(self, prompts):
        return self.tokenizer(
            prompts, return_tensors="pt", padding=True,
            truncation=True, max_length=self.max_len,
        ).to(self.device)

    def yes_no_scores(self, prompts):
        torch = self._torch
        enc = self._encode(prompts)
        start = self.model.config.decoder_start_token_id
        decoder_input = torch.full(
            (len(prompts), 1), start, dtype=torch.long, device=self.device
        )
        self.model.eval()
        with torch.no_grad():
            logits = self.model(**enc, decoder_input_ids=decoder_input).logits[:, 0, :]
            probs = torch.softmax(logits, dim=-1)
        return [
            (float(row[self.yes_id]), float(row[self.no_id])) for row in probs
        ]

    def train_step(self, prompts, answers) -> float:
        enc = self._encode(prompts)
        labels = self.tokenizer(
            list(answers), return_tensors="pt", padding=True
        ).input_ids.to(self.device)
        self.model.train()
        self.optimizer.zero_grad()
        loss = self.model(**enc, labels=labels).loss
        loss.backward()
        self.optimizer.step()
        return float(loss.detach())

    def save(self, path) -> None:
        self.model.save_pretrained(path)
        self.tokenizer.save_pretrained(path)

    def load(self, path) -> None:
        from transformers import AutoModelForSeq2SeqLM

        self.model = AutoModelForSeq2SeqLM.from_pretrained(path).to(self.device)
        self.optimizer = self._torch.optim.AdamW(
            self.model.parameters(), lr=self.optimizer.defaults["lr"]
        )


def build_model(config: AdapterConfig):
    if config.model.startswith("stub:"):
        return StubModel(config.model.split(":", 1)[1])
    return HFSeq2SeqModel(config.model, config.device, config.max_len)
