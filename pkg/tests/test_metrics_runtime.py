"""Tests for latency, token, hop and cost metrics."""

import json

import pytest

from agentgauge.metrics.runtime import (
    CostMetric,
    HopsMetric,
    LatencyMetric,
    PricingTable,
    TokensMetric,
)
from agentgauge.models import Conversation, Message, Role, Unit
from tests.factories import llm_trace, simple_conversation, tool_conversation

PRICING = PricingTable.from_dict({"model-a": {"input_per_1k": 1.0, "output_per_1k": 2.0}})
MESSAGES = (Message(Role.USER, "Hi"), Message(Role.ASSISTANT, "Hello"))


class TestLatencyMetric:
    """Test conversation latency."""

    async def test_total_and_breakdown(self):
        """Test that latency sums every step and keeps the per-step values."""
        (m,) = await LatencyMetric().evaluate_conversation(tool_conversation())
        assert m.value == 203
        assert m.unit == Unit.MILLISECONDS
        assert m.additional_info["seq:0"] == "100"
        assert m.additional_info["seq:1"] == "3"


class TestTokensMetric:
    """Test token accounting."""

    async def test_input_and_output(self):
        """Test that only LLM steps are summed."""
        measurements = await TokensMetric().evaluate_conversation(tool_conversation())
        assert {m.name: m.value for m in measurements} == {
            "InputTokens": 20,
            "OutputTokens": 10,
        }
        assert all(m.unit == Unit.TOKENS for m in measurements)


class TestHopsMetric:
    """Test LLM call counting."""

    @pytest.mark.parametrize(
        "conversation, hops", [(simple_conversation(), 1), (tool_conversation(), 2)]
    )
    async def test_counts_llm_steps(self, conversation, hops):
        """Test that tool steps are not hops."""
        (m,) = await HopsMetric().evaluate_conversation(conversation)
        assert m.value == hops


class TestCostMetric:
    """Test USD cost from the pricing table."""

    async def test_cost(self):
        """Test that input and output tokens are priced separately."""
        (m,) = await CostMetric(PRICING).evaluate_conversation(tool_conversation())
        assert m.value == pytest.approx(20 / 1000 * 1.0 + 10 / 1000 * 2.0)
        assert m.unit == Unit.USD

    async def test_worked_example(self):
        """Test 1000 input and 500 output tokens at 0.003 and 0.015 per 1k."""
        pricing = PricingTable.from_dict({"m": {"input_per_1k": 0.003, "output_per_1k": 0.015}})
        conversation = Conversation(
            (llm_trace(0, MESSAGES, input_tokens=1000, output_tokens=500, model_id="m"),)
        )
        (m,) = await CostMetric(pricing).evaluate_conversation(conversation)
        assert m.value == pytest.approx(0.0105, abs=1e-12)

    async def test_additive_across_traces(self):
        """Test that a conversation costs the sum of its steps' costs."""
        pricing = PricingTable.from_dict(
            {
                "m1": {"input_per_1k": 0.003, "output_per_1k": 0.015},
                "m2": {"input_per_1k": 0.5, "output_per_1k": 1.5},
            }
        )
        metric = CostMetric(pricing)
        first = dict(input_tokens=1000, output_tokens=500, model_id="m1")
        second = dict(input_tokens=240, output_tokens=75, model_id="m2")

        (alone_first,) = await metric.evaluate_conversation(
            Conversation((llm_trace(0, MESSAGES, **first),))
        )
        (alone_second,) = await metric.evaluate_conversation(
            Conversation((llm_trace(0, MESSAGES, **second),))
        )
        (both,) = await metric.evaluate_conversation(
            Conversation((llm_trace(0, MESSAGES, **first), llm_trace(1, MESSAGES, **second)))
        )
        assert both.value == pytest.approx(alone_first.value + alone_second.value, abs=1e-12)
        assert both.value == pytest.approx(0.0105 + 0.12 + 0.1125, abs=1e-12)

    async def test_unknown_model(self):
        """Test that a model without a price gives an error measurement."""
        conversation = simple_conversation(model_id="model-z")
        (m,) = await CostMetric(PRICING).evaluate_conversation(conversation)
        assert m.name == "Cost.error"
        assert m.additional_info["missing_model"] == "model-z"

    def test_invalid_prices(self):
        """Test that incomplete or negative prices are rejected."""
        with pytest.raises(ValueError, match="model-a"):
            PricingTable.from_dict({"model-a": {"input_per_1k": 1.0}})
        with pytest.raises(ValueError, match="model-a"):
            PricingTable.from_dict({"model-a": {"input_per_1k": -1, "output_per_1k": 0}})

    def test_load(self, tmp_path):
        """Test loading a pricing file."""
        path = tmp_path / "pricing.json"
        path.write_text(json.dumps({"m": {"input_per_1k": 0.5, "output_per_1k": 1.5}}))
        pricing = PricingTable.load(path)
        assert "m" in pricing
        assert pricing["m"].output_per_1k == 1.5

        path.write_text("[]")
        with pytest.raises(ValueError, match="JSON object"):
            PricingTable.load(path)
