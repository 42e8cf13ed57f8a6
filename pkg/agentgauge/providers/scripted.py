"""Deterministic rule-based provider for tests and demos."""

import asyncio
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any

from agentgauge.models import Message, Role, ToolSpec
from agentgauge.providers.base import (
    BaseProvider,
    ModelReply,
    ProviderError,
    ToolCall,
    count_whitespace_tokens,
)


class MatchKind(str, Enum):
    """How a scripted rule matches the last message."""

    EXACT = "exact"
    SUBSTRING = "substring"
    ANY = "any"


@dataclass(frozen=True)
class ScriptedRule:
    """Reply to give when the last user/tool message matches."""

    match: MatchKind = MatchKind.ANY
    pattern: str = ""
    text: str | None = None
    tool_calls: tuple[ToolCall, ...] = ()
    role: Role | None = None  # only match messages from this role
    model_id: str | None = None  # only match calls for this model
    delay_ms: int = 0

    def __post_init__(self):
        object.__setattr__(self, "match", MatchKind(self.match))
        object.__setattr__(self, "tool_calls", tuple(self.tool_calls))
        if self.role is not None:
            object.__setattr__(self, "role", Role(self.role))
        if not self.text and not self.tool_calls:
            raise ValueError("Scripted rule must reply with text or tool calls")
        if self.match != MatchKind.ANY and not self.pattern:
            raise ValueError(f"Scripted rule with match '{self.match.value}' needs a pattern")
        if self.delay_ms < 0:
            raise ValueError(f"delay_ms must be non-negative, got {self.delay_ms}")

    def matches(self, message: Message, model_id: str) -> bool:
        if self.role is not None and message.role != self.role:
            return False
        if self.model_id is not None and model_id != self.model_id:
            return False
        if self.match == MatchKind.EXACT:
            return message.text == self.pattern
        if self.match == MatchKind.SUBSTRING:
            return self.pattern in message.text
        return True

    @staticmethod
    def from_dict(data: Mapping[str, Any]) -> "ScriptedRule":
        """Parse `{match, pattern?, text?, tool_calls?, role?, model_id?, delay_ms?}`."""
        try:
            match = MatchKind(str(data.get("match", "any")).lower())
        except ValueError:
            valid = ", ".join(kind.value for kind in MatchKind)
            raise ValueError(
                f"Invalid scripted rule match {data.get('match')!r}. Valid values: {valid}"
            ) from None
        tool_calls = tuple(
            ToolCall(
                tool_name=str(call["name"]),
                arguments={str(k): str(v) for k, v in (call.get("arguments") or {}).items()},
            )
            for call in data.get("tool_calls") or []
        )
        return ScriptedRule(
            match=match,
            pattern=str(data.get("pattern", "")),
            text=data.get("text"),
            tool_calls=tool_calls,
            role=data.get("role"),
            model_id=data.get("model_id"),
            delay_ms=int(data.get("delay_ms", 0)),
        )


class ScriptedProvider(BaseProvider):
    """Replies from an ordered rule list; the first matching rule wins.

    Token accounting: input tokens are the whitespace tokens of the system
    prompt and all messages, output tokens those of the reply text.
    """

    def __init__(self, rules: Sequence[ScriptedRule]):
        self.rules = list(rules)

    async def converse(
        self,
        system_prompt: str,
        messages: Sequence[Message],
        model_id: str,
        temperature: float,
        tools: Sequence[ToolSpec] = (),
    ) -> ModelReply:
        self._check_messages(messages)
        last = messages[-1]

        for rule in self.rules:
            if rule.matches(last, model_id):
                if rule.delay_ms:
                    await asyncio.sleep(rule.delay_ms / 1000)
                return ModelReply(
                    text=rule.text or None,
                    tool_calls=rule.tool_calls,
                    input_tokens=count_whitespace_tokens(
                        system_prompt, *(message.text for message in messages)
                    ),
                    output_tokens=count_whitespace_tokens(rule.text),
                )

        raise ProviderError(
            f"No scripted rule matches {last.role.value} message {last.text!r} "
            f"for model {model_id!r}"
        )
