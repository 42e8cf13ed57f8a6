"""Tests for tool-usage metrics."""

from agentgauge.metrics.tools import CorrectToolMetric, NoToolMetric, resolve_expected_tool
from agentgauge.models import Case, Conversation, Message, Role, ToolInvocation, Turn
from tests.factories import llm_trace, simple_conversation, tool_conversation


def invoking(*tool_names: str) -> Conversation:
    """A one-step conversation whose final trace lists the given invocations."""
    messages = [Message(Role.USER, "Do it"), Message(Role.ASSISTANT, "Done")]
    invocations = [ToolInvocation(name) for name in tool_names]
    return Conversation(
        (llm_trace(0, messages, case_name="Tool use: get_weather", invocations=invocations),)
    )


class TestNoToolMetric:
    """Test detection of conversations without tool use."""

    async def test_values(self):
        """Test 1 without invocations and 0 with."""
        metric = NoToolMetric()
        (without,) = await metric.evaluate_conversation(simple_conversation())
        (with_tool,) = await metric.evaluate_conversation(tool_conversation())
        assert (without.value, with_tool.value) == (1, 0)
        assert without.is_boolean


class TestResolveExpectedTool:
    """Test where the expected tool comes from."""

    def test_case_wins(self):
        """Test that the case's expected tool takes precedence."""
        case = Case("Anything", (Turn("Hi"),), expected_tool="get_time")
        conversation = simple_conversation(case_name="Tool use: get_weather")
        assert resolve_expected_tool(conversation, case) == "get_time"

    def test_trace_extras(self):
        """Test the expected tool stamped on the traces."""
        conversation = simple_conversation(extras={"expected_tool": "get_time"})
        assert resolve_expected_tool(conversation) == "get_time"

    def test_case_name_prefix(self):
        """Test the case name, including a generated locale suffix."""
        conversation = simple_conversation(case_name="Tool use: get_weather [de_DE]")
        assert resolve_expected_tool(conversation) == "get_weather"

    def test_unresolvable(self):
        """Test a conversation without any hint."""
        assert resolve_expected_tool(simple_conversation()) is None


class TestCorrectToolMetric:
    """Test correct tool invocation."""

    async def test_correct(self):
        """Test that invoking only the expected tool scores 1."""
        conversation = tool_conversation(case_name="Tool use: get_weather")
        (m,) = await CorrectToolMetric().evaluate_conversation(conversation)
        assert m.value == 1
        assert m.additional_info["expected_tool"] == "get_weather"

    async def test_wrong_tool(self):
        """Test that another tool scores 0."""
        conversation = tool_conversation("get_time", case_name="Tool use: get_weather")
        (m,) = await CorrectToolMetric().evaluate_conversation(conversation)
        assert m.value == 0

    async def test_repeated_expected_tool(self):
        """Test that calling the expected tool twice is still correct."""
        (m,) = await CorrectToolMetric().evaluate_conversation(
            invoking("get_weather", "get_weather")
        )
        assert m.value == 1

    async def test_extra_tool(self):
        """Test that an additional tool makes the answer incorrect."""
        (m,) = await CorrectToolMetric().evaluate_conversation(invoking("get_weather", "get_time"))
        assert m.value == 0

    async def test_no_tool(self):
        """Test that not calling any tool scores 0."""
        (m,) = await CorrectToolMetric().evaluate_conversation(invoking())
        assert m.value == 0

    async def test_unresolvable(self):
        """Test that an unknown expected tool yields an error measurement."""
        (m,) = await CorrectToolMetric().evaluate_conversation(simple_conversation())
        assert m.name == "AgentInvokesCorrectTool.error"
        assert m.is_error
