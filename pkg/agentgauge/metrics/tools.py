"""Tool-usage metrics."""

from agentgauge.metrics.base import BOOLEAN_KIND, BaseMetric
from agentgauge.models import TOOL_USE_PREFIX, Case, Conversation, Measurement, Unit


class NoToolMetric(BaseMetric):
    """1 when the final trace lists no tool invocations, else 0."""

    name = "AgentDoesntInvokeAnyTool"
    unit = Unit.COUNT

    async def evaluate_conversation(
        self, conversation: Conversation, case: Case | None = None
    ) -> list[Measurement]:
        value = 0 if conversation.final_trace.tool_invocations else 1
        return [self._measurement(conversation, value, kind=BOOLEAN_KIND)]


def resolve_expected_tool(conversation: Conversation, case: Case | None = None) -> str | None:
    """Expected tool from the case, the trace extras or the case name prefix."""
    if case is not None and case.expected_tool:
        return case.expected_tool
    for trace in conversation:
        if trace.extras.get("expected_tool"):
            return trace.extras["expected_tool"]
    if conversation.case_name.startswith(TOOL_USE_PREFIX):
        # Generated cases carry a " [locale]" suffix in their key
        name = conversation.case_name[len(TOOL_USE_PREFIX) :]
        return name.split(" [", 1)[0] or None
    return None


class CorrectToolMetric(BaseMetric):
    """1 when the expected tool was invoked and no other tool was."""

    name = "AgentInvokesCorrectTool"
    unit = Unit.COUNT

    async def evaluate_conversation(
        self, conversation: Conversation, case: Case | None = None
    ) -> list[Measurement]:
        expected = resolve_expected_tool(conversation, case)
        if expected is None:
            return [self._error(conversation, "Expected tool cannot be resolved")]

        correct_tool_count = 0
        used_other_tool = False
        for invocation in conversation.final_trace.tool_invocations:
            if invocation.tool_name == expected:
                correct_tool_count += 1
            else:
                used_other_tool = True
                break

        value = not used_other_tool and correct_tool_count > 0
        return [self._measurement(conversation, value, kind=BOOLEAN_KIND, expected_tool=expected)]
