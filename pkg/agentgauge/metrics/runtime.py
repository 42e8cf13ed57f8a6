"""Metrics computed from trace timing and token accounting."""

import json
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

from agentgauge.metrics.base import BaseMetric
from agentgauge.models import Case, Conversation, Measurement, Unit


class LatencyMetric(BaseMetric):
    """Total latency of a conversation with a per-step breakdown."""

    name = "Latency"
    unit = Unit.MILLISECONDS

    async def evaluate_conversation(
        self, conversation: Conversation, case: Case | None = None
    ) -> list[Measurement]:
        breakdown = {f"seq:{trace.seq}": trace.latency_ms for trace in conversation}
        total = sum(trace.latency_ms for trace in conversation)
        return [self._measurement(conversation, total, **breakdown)]


class TokensMetric(BaseMetric):
    """Input and output tokens summed over the LLM calls."""

    name = "Tokens"
    unit = Unit.TOKENS

    async def evaluate_conversation(
        self, conversation: Conversation, case: Case | None = None
    ) -> list[Measurement]:
        llm_traces = [trace for trace in conversation if trace.is_llm]
        return [
            self._measurement(
                conversation, sum(t.input_tokens for t in llm_traces), name="InputTokens"
            ),
            self._measurement(
                conversation, sum(t.output_tokens for t in llm_traces), name="OutputTokens"
            ),
        ]


class HopsMetric(BaseMetric):
    """Number of LLM calls in a conversation."""

    name = "Hops"
    unit = Unit.COUNT

    async def evaluate_conversation(
        self, conversation: Conversation, case: Case | None = None
    ) -> list[Measurement]:
        return [self._measurement(conversation, sum(1 for t in conversation if t.is_llm))]


@dataclass(frozen=True)
class ModelPrice:
    """USD per 1000 tokens."""

    input_per_1k: float
    output_per_1k: float

    def __post_init__(self):
        if self.input_per_1k < 0 or self.output_per_1k < 0:
            raise ValueError("Prices must be non-negative")


class PricingTable:
    """Token prices per model id."""

    def __init__(self, prices: Mapping[str, ModelPrice]):
        self.prices = dict(prices)

    def __contains__(self, model_id: str) -> bool:
        return model_id in self.prices

    def __getitem__(self, model_id: str) -> ModelPrice:
        return self.prices[model_id]

    @staticmethod
    def from_dict(data: Mapping[str, Mapping[str, float]]) -> "PricingTable":
        """Parse `{model_id: {input_per_1k, output_per_1k}}`."""
        prices = {}
        for model_id, entry in data.items():
            try:
                prices[model_id] = ModelPrice(
                    input_per_1k=float(entry["input_per_1k"]),
                    output_per_1k=float(entry["output_per_1k"]),
                )
            except (KeyError, TypeError, ValueError) as e:
                raise ValueError(f"Invalid price for model {model_id!r}: {e}") from e
        return PricingTable(prices)

    @staticmethod
    def load(path: Path) -> "PricingTable":
        with path.open(encoding="utf-8") as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ValueError(f"Pricing file {path} must contain a JSON object")
        return PricingTable.from_dict(data)


class CostMetric(BaseMetric):
    """USD cost of the LLM calls of a conversation."""

    name = "Cost"
    unit = Unit.USD

    def __init__(self, pricing: PricingTable):
        self.pricing = pricing

    async def evaluate_conversation(
        self, conversation: Conversation, case: Case | None = None
    ) -> list[Measurement]:
        cost = 0.0
        for trace in conversation:
            if not trace.is_llm:
                continue
            if trace.model_id not in self.pricing:
                return [
                    self._error(
                        conversation,
                        f"No price for model {trace.model_id!r}",
                        missing_model=trace.model_id,
                    )
                ]
            price = self.pricing[trace.model_id]
            cost += trace.input_tokens / 1000 * price.input_per_1k
            cost += trace.output_tokens / 1000 * price.output_per_1k
        return [self._measurement(conversation, cost)]
