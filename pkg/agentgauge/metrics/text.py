"""Metrics scanning the assistant's replies."""

import json
import re
from collections.abc import Sequence

from agentgauge.metrics.base import BOOLEAN_KIND, BaseMetric
from agentgauge.models import Case, Conversation, Measurement, Role, Unit

# Each phrase indicates the agent does not know what to do
DEFAULT_UNABLE_TO_HELP_INDICATORS = (
    "unfortunately",
    "I am sorry",
    "I'm sorry",
    "I am afraid",
    "I'm afraid",
    "I apologize",
)


def _assistant_texts(conversation: Conversation) -> list[str] | None:
    """Assistant messages of the final LLM trace, or None if the final trace is a tool call."""
    if not conversation.final_trace.is_llm:
        return None
    return [
        message.text
        for message in conversation.final_trace.user_conversation
        if message.role == Role.ASSISTANT
    ]


def _normalize(text: str) -> str:
    return text.replace("’", "'").lower()


def find_indicators(text: str, indicators: Sequence[str]) -> list[str]:
    """Case-insensitive, overlapping occurrences of the indicators in order of position."""
    haystack = _normalize(text)
    found = []
    for indicator in indicators:
        needle = _normalize(indicator)
        if not needle:
            continue
        for match in re.finditer(f"(?={re.escape(needle)})", haystack):
            found.append((match.start(), indicator))
    found.sort(key=lambda item: item[0])
    return [indicator for _, indicator in found]


class UnableToHelpMetric(BaseMetric):
    """Counts phrases signaling that the agent could not help the user."""

    name = "AgentIsUnableToHelpUser"
    unit = Unit.COUNT

    def __init__(self, indicators: Sequence[str] = DEFAULT_UNABLE_TO_HELP_INDICATORS):
        self.indicators = tuple(indicators)

    async def evaluate_conversation(
        self, conversation: Conversation, case: Case | None = None
    ) -> list[Measurement]:
        texts = _assistant_texts(conversation)
        if texts is None:
            return []
        found = [
            indicator for text in texts for indicator in find_indicators(text, self.indicators)
        ]
        return [self._measurement(conversation, len(found), found=json.dumps(found))]


class KeywordPresenceMetric(BaseMetric):
    """1 when any allowed term occurs in an assistant reply, else 0."""

    unit = Unit.COUNT

    def __init__(self, allowed_terms: Sequence[str], name: str = "KeywordPresence"):
        self.allowed_terms = tuple(term for term in allowed_terms if term)
        if not self.allowed_terms:
            raise ValueError("KeywordPresenceMetric needs at least one allowed term")
        self.name = name

    async def evaluate_conversation(
        self, conversation: Conversation, case: Case | None = None
    ) -> list[Measurement]:
        final = conversation.final_llm_trace
        messages = final.user_conversation if final else ()
        replies = [m.text.lower() for m in messages if m.role == Role.ASSISTANT]
        used_term = any(term.lower() in reply for reply in replies for term in self.allowed_terms)
        return [
            self._measurement(
                conversation, used_term, kind=BOOLEAN_KIND, case=conversation.case_name
            )
        ]
