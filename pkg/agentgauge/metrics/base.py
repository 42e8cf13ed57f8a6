"""Base metric class for all conversation metrics."""

from abc import ABC, abstractmethod
from typing import Any

from agentgauge.models import Case, Conversation, Measurement, Unit

BOOLEAN_KIND = "boolean"


class BaseMetric(ABC):
    """Abstract base class for all metrics.

    Metrics are shared between concurrent evaluations and must not keep
    per-conversation state.
    """

    name: str = ""
    unit: Unit = Unit.DIMENSIONLESS

    @abstractmethod
    async def evaluate_conversation(
        self, conversation: Conversation, case: Case | None = None
    ) -> list[Measurement]:
        """Measure one conversation.

        Args:
            conversation: Ordered traces of the conversation
            case: The case the conversation ran, when known

        Returns:
            Zero or more measurements
        """

    def _measurement(
        self,
        conversation: Conversation,
        value: float,
        *,
        name: str | None = None,
        unit: Unit | None = None,
        **info: Any,
    ) -> Measurement:
        return Measurement(
            name=name or self.name,
            value=value,
            unit=unit or self.unit,
            additional_info={k: str(v) for k, v in info.items()},
            conversation_id=conversation.conversation_id,
            case_name=conversation.case_name,
            permutation_id=conversation.permutation_id,
            run_index=conversation.run_index,
        )

    def _error(self, conversation: Conversation, error: str, **info: Any) -> Measurement:
        """Measurement recording that the metric could not produce a value."""
        return self._measurement(
            conversation, 0, name=f"{self.name}.error", unit=Unit.COUNT, error=error, **info
        )

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name={self.name!r})"


def error_measurement(
    metric_name: str, conversation: Conversation, error: BaseException | str
) -> Measurement:
    """Error measurement for a metric that raised instead of returning."""
    message = error if isinstance(error, str) else (str(error) or type(error).__name__)
    return Measurement(
        name=f"{metric_name}.error",
        value=0,
        unit=Unit.COUNT,
        additional_info={"error": message},
        conversation_id=conversation.conversation_id,
        case_name=conversation.case_name,
        permutation_id=conversation.permutation_id,
        run_index=conversation.run_index,
    )
