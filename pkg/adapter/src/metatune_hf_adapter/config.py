"""Adapter configuration: model id, device, input budget, prompt template."""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_TEMPLATE = "{question} [SEP] {context}"
DEFAULT_MAX_LEN = 512


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class AdapterConfig:
    model: str = "stub:hash"
    device: str = "cpu"
    max_len: int = DEFAULT_MAX_LEN
    template: str = DEFAULT_TEMPLATE

    def __post_init__(self):
        if self.max_len < 8:
            raise ConfigError("max_len must be at least 8")
        for slot in ("{question}", "{context}"):
            if self.template.count(slot) != 1:
                raise ConfigError(
                    f"template must contain {slot} exactly once: {self.template!r}"
                )

    def render(self, question: str, context: str) -> str:
        """Fill the template, tail-truncating the context to the length
        budget. The question is never truncated."""
        scaffold = self.template.format(question=question, context="")
        budget = self.max_len - len(scaffold.split())
        ctx_tokens = context.split()
        if budget < len(ctx_tokens):
            context = " ".join(ctx_tokens[: max(budget, 0)])
        return self.template.format(question=question, context=context)
