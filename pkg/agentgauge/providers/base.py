"""Base provider class for all model backends."""

from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass, field

from agentgauge.models import Message, Role, ToolSpec


class ProviderError(Exception):
    """Raised when a model call fails.

    `retriable` tells callers whether repeating the same call may succeed
    (transport failures, throttling) or not (refusals, malformed replies).
    """

    def __init__(self, message: str, *, retriable: bool = False):
        super().__init__(message)
        self.retriable = retriable


@dataclass(frozen=True)
class ToolCall:
    """A tool call requested by the model."""

    tool_name: str
    arguments: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ModelReply:
    """Reply of one model call."""

    text: str | None = None
    tool_calls: tuple[ToolCall, ...] = ()
    input_tokens: int = 0
    output_tokens: int = 0

    def __post_init__(self):
        object.__setattr__(self, "tool_calls", tuple(self.tool_calls))
        if not self.text and not self.tool_calls:
            raise ValueError("Model reply must carry text or tool calls")
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("Token counts must be non-negative")


class BaseProvider(ABC):
    """Abstract base class for all model providers.

    Providers are shared between concurrently running agents and must
    accept concurrent `converse` calls.
    """

    @abstractmethod
    async def converse(
        self,
        system_prompt: str,
        messages: Sequence[Message],
        model_id: str,
        temperature: float,
        tools: Sequence[ToolSpec] = (),
    ) -> ModelReply:
        """Send the conversation to the model and return its reply.

        Raises:
            ProviderError: On transport failure, refusal or malformed reply
        """

    async def close(self) -> None:
        """Release resources held by the provider."""

    @staticmethod
    def _check_messages(messages: Sequence[Message]) -> None:
        if not messages:
            raise ValueError("Cannot converse without messages")
        if messages[-1].role not in (Role.USER, Role.TOOL):
            raise ValueError(
                f"Last message must come from the user or a tool, got {messages[-1].role.value}"
            )


def count_whitespace_tokens(*texts: str | None) -> int:
    """Whitespace-token count of the concatenated texts."""
    return len(" ".join(text for text in texts if text).split())
