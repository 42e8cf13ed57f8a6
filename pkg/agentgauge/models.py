"""Core data models for agentgauge."""

import itertools
import json
import math
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, NamedTuple

# Cases named "Tool use: <tool>" expect the agent to call <tool>
TOOL_USE_PREFIX = "Tool use: "


class InvalidGridError(ValueError):
    """Raised when a parameter grid cannot be expanded."""


class ConversationError(ValueError):
    """Raised when traces do not form a valid conversation."""


class Role(str, Enum):
    """Author of a conversation message."""

    USER = "user"
    ASSISTANT = "assistant"
    SYSTEM = "system"
    TOOL = "tool"


class TraceTarget(str, Enum):
    """What a traced step talked to."""

    LLM = "LLM"
    TOOL = "Tool"


class Unit(str, Enum):
    """Unit attached to every measurement."""

    COUNT = "Count"
    MILLISECONDS = "Milliseconds"
    TOKENS = "Tokens"
    USD = "USD"
    SCORE = "Score"
    DIMENSIONLESS = "Dimensionless"


@dataclass(frozen=True)
class Message:
    """One visible message of a conversation."""

    role: Role
    text: str

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        if not self.text and self.role != Role.TOOL:
            raise ValueError(f"Message text may only be empty for tool messages, got {self.role}")


@dataclass(frozen=True)
class ToolInvocation:
    """A single tool call with its outcome."""

    tool_name: str
    arguments: dict[str, str] = field(default_factory=dict)
    result_text: str = ""
    latency_ms: int = 0
    success: bool = True

    def __post_init__(self):
        if not self.tool_name:
            raise ValueError("Tool invocation must name a tool")
        if self.latency_ms < 0:
            raise ValueError(f"Tool latency must be non-negative, got {self.latency_ms}")


@dataclass(frozen=True)
class ToolParameter:
    """One property of a tool's parameter schema."""

    name: str
    type: str = "string"
    description: str = ""
    required: bool = False


@dataclass(frozen=True)
class ToolSpec:
    """Description of a tool an agent may call."""

    name: str
    description: str = ""
    parameters: tuple[ToolParameter, ...] = ()

    def __post_init__(self):
        if not self.name:
            raise ValueError("Tool spec must have a name")
        object.__setattr__(self, "parameters", tuple(self.parameters))

    @property
    def required_parameters(self) -> list[str]:
        return [p.name for p in self.parameters if p.required]

    @property
    def parameter_schema(self) -> str:
        """JSON-object schema text for the tool's parameters."""
        schema = {
            "type": "object",
            "properties": {
                p.name: {"type": p.type, "description": p.description} for p in self.parameters
            },
            "required": self.required_parameters,
        }
        return json.dumps(schema, sort_keys=True)

    @staticmethod
    def from_dict(data: Mapping[str, Any]) -> "ToolSpec":
        """Build a spec from `{name, description, parameters: {prop: {...}}}`."""
        name = data.get("name")
        if not name:
            raise ValueError(f"Tool object missing 'name' field: {dict(data)}")
        parameters = []
        for prop_name, prop in (data.get("parameters") or {}).items():
            prop = prop or {}
            parameters.append(
                ToolParameter(
                    name=prop_name,
                    type=str(prop.get("type", "string")),
                    description=str(prop.get("description", "")),
                    required=bool(prop.get("required", False)),
                )
            )
        return ToolSpec(
            name=str(name),
            description=str(data.get("description", "")),
            parameters=tuple(parameters),
        )


@dataclass(frozen=True)
class Trace:
    """One step of an agent conversation: an LLM call or a tool call.

    An LLM step that produced text ends `user_conversation` with that text as
    an assistant message. A step that only requested tools adds no assistant
    message; its output is the `tool_invocations` it carries.
    """

    conversation_id: str
    case_name: str
    permutation_id: str
    run_index: int
    seq: int
    to: TraceTarget
    timestamp_ms: int
    latency_ms: int = 0
    input_tokens: int = 0
    output_tokens: int = 0
    model_id: str = ""
    user_conversation: tuple[Message, ...] = ()
    tool_invocations: tuple[ToolInvocation, ...] = ()
    extras: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "to", TraceTarget(self.to))
        object.__setattr__(self, "user_conversation", tuple(self.user_conversation))
        object.__setattr__(self, "tool_invocations", tuple(self.tool_invocations))

        for attr in ("run_index", "seq", "latency_ms", "input_tokens", "output_tokens"):
            if getattr(self, attr) < 0:
                raise ValueError(f"Trace {attr} must be non-negative, got {getattr(self, attr)}")

        if self.to == TraceTarget.TOOL:
            if self.input_tokens or self.output_tokens:
                raise ValueError("Tool traces must not carry token counts")
            if len(self.tool_invocations) != 1:
                raise ValueError("Tool traces record exactly one tool invocation")
        elif not self.user_conversation:
            raise ValueError("LLM traces must carry the conversation")

    @property
    def is_llm(self) -> bool:
        return self.to == TraceTarget.LLM

    def with_extras(self, **extras: str) -> "Trace":
        return replace(self, extras={**self.extras, **extras})


@dataclass(frozen=True)
class Conversation:
    """Validated, ordered traces of one conversation."""

    traces: tuple[Trace, ...]

    def __post_init__(self):
        traces = tuple(self.traces)
        object.__setattr__(self, "traces", traces)
        if not traces:
            raise ConversationError("A conversation needs at least one trace")

        conversation_id = traces[0].conversation_id
        for expected_seq, trace in enumerate(traces):
            if trace.conversation_id != conversation_id:
                raise ConversationError(
                    f"Mixed conversation ids: {conversation_id!r} and {trace.conversation_id!r}"
                )
            if trace.seq != expected_seq:
                raise ConversationError(
                    f"Conversation {conversation_id}: expected seq {expected_seq}, "
                    f"got {trace.seq} (gap or repeat)"
                )

    def __len__(self) -> int:
        return len(self.traces)

    def __iter__(self) -> Iterator[Trace]:
        return iter(self.traces)

    def __getitem__(self, index: int) -> Trace:
        return self.traces[index]

    @property
    def conversation_id(self) -> str:
        return self.traces[0].conversation_id

    @property
    def case_name(self) -> str:
        return self.traces[0].case_name

    @property
    def permutation_id(self) -> str:
        return self.traces[0].permutation_id

    @property
    def run_index(self) -> int:
        return self.traces[0].run_index

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.permutation_id, self.case_name, self.run_index)

    @property
    def final_trace(self) -> Trace:
        return self.traces[-1]

    @property
    def final_llm_trace(self) -> Trace | None:
        for trace in reversed(self.traces):
            if trace.is_llm:
                return trace
        return None

    @property
    def error(self) -> str | None:
        """Error message if the conversation failed."""
        for trace in reversed(self.traces):
            if "error" in trace.extras:
                return trace.extras["error"]
        return None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def assistant_replies_per_turn(self) -> list[str | None]:
        """Last assistant reply following each user message, in turn order."""
        replies: list[str | None] = []
        for message in self.final_trace.user_conversation:
            if message.role == Role.USER:
                replies.append(None)
            elif message.role == Role.ASSISTANT and replies:
                replies[-1] = message.text
        return replies


@dataclass(frozen=True)
class Turn:
    """One user input with the responses considered acceptable."""

    user_input: str
    acceptable_responses: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.user_input:
            raise ValueError("Turn user_input must not be empty")
        object.__setattr__(self, "acceptable_responses", tuple(self.acceptable_responses))


@dataclass(frozen=True)
class Case:
    """A repeatable evaluation scenario."""

    name: str
    turns: tuple[Turn, ...]
    overall_expectations: str | None = None
    expected_tool: str | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.name:
            raise ValueError("Case name must not be empty")
        object.__setattr__(self, "turns", tuple(self.turns))
        if not self.turns:
            raise ValueError(f"Case {self.name!r} needs at least one turn")
        if self.expected_tool is None and self.name.startswith(TOOL_USE_PREFIX):
            object.__setattr__(self, "expected_tool", self.name[len(TOOL_USE_PREFIX) :] or None)

    @property
    def locale(self) -> str | None:
        locale = self.metadata.get("locale")
        return str(locale) if locale else None

    @property
    def key(self) -> str:
        """Identity of the case within a case set."""
        return f"{self.name} [{self.locale}]" if self.locale else self.name


@dataclass(frozen=True)
class Measurement:
    """Result of applying a metric to one conversation."""

    name: str
    value: float
    unit: Unit = Unit.DIMENSIONLESS
    additional_info: dict[str, str] = field(default_factory=dict)
    conversation_id: str = ""
    case_name: str = ""
    permutation_id: str = ""
    run_index: int = 0

    def __post_init__(self):
        if not self.name:
            raise ValueError("Measurement name must not be empty")
        value = float(self.value)  # booleans become 0/1
        if not math.isfinite(value):
            raise ValueError(f"Measurement {self.name} value must be finite, got {value}")
        if self.run_index < 0:
            raise ValueError(f"Measurement run_index must be non-negative, got {self.run_index}")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "unit", Unit(self.unit))
        object.__setattr__(
            self, "additional_info", {str(k): str(v) for k, v in self.additional_info.items()}
        )

    @property
    def is_error(self) -> bool:
        return self.name.endswith(".error")

    @property
    def is_boolean(self) -> bool:
        return self.additional_info.get("kind") == "boolean"


class Permute:
    """Marks an agent parameter whose candidate values are permuted."""

    def __init__(self, values: Sequence[Any]):
        self.values = tuple(values)

    def __repr__(self) -> str:
        return f"Permute({list(self.values)!r})"


@dataclass(frozen=True)
class ParameterGrid:
    """Agent parameters, some fixed and some permuted over candidate lists."""

    fixed: dict[str, str] = field(default_factory=dict)
    permuted: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "fixed", {str(k): str(v) for k, v in self.fixed.items()})
        object.__setattr__(
            self,
            "permuted",
            {str(k): tuple(str(v) for v in values) for k, values in self.permuted.items()},
        )
        overlap = set(self.fixed) & set(self.permuted)
        if overlap:
            raise InvalidGridError(
                f"Parameters both fixed and permuted: {', '.join(sorted(overlap))}"
            )

    @staticmethod
    def from_parameters(parameters: Mapping[str, Any]) -> "ParameterGrid":
        """Build a grid where `Permute(...)` values are permuted and others fixed."""
        fixed = {}
        permuted = {}
        for name, value in parameters.items():
            if isinstance(value, Permute):
                permuted[name] = value.values
            else:
                fixed[name] = value
        return ParameterGrid(fixed=fixed, permuted=permuted)

    @property
    def permutation_count(self) -> int:
        return math.prod(len(values) for values in self.permuted.values())


class Permutation(NamedTuple):
    """One expanded grid assignment."""

    permutation_id: str
    parameters: dict[str, str]


def _escape(text: str) -> str:
    return text.replace("%", "%25").replace("=", "%3D").replace(";", "%3B")


def permutation_id(assignments: Mapping[str, str]) -> str:
    """Canonical id of a permuted assignment: sorted `name=value` pairs joined by `;`."""
    return ";".join(
        f"{_escape(str(name))}={_escape(str(assignments[name]))}" for name in sorted(assignments)
    )


def expand_grid(grid: ParameterGrid) -> list[Permutation]:
    """Cartesian product of the permuted values merged with the fixed ones."""
    for name, values in grid.permuted.items():
        if not values:
            raise InvalidGridError(f"Permuted parameter {name!r} has no candidate values")

    names = list(grid.permuted)
    permutations = []
    for combination in itertools.product(*(grid.permuted[name] for name in names)):
        assignments = dict(zip(names, combination, strict=True))
        permutations.append(
            Permutation(
                permutation_id=permutation_id(assignments),
                parameters={**grid.fixed, **assignments},
            )
        )
    return permutations


@dataclass(frozen=True)
class TraceSet:
    """Conversations of a batch, indexed by (permutation, case, run)."""

    conversations: tuple[Conversation, ...] = ()
    cases: dict[str, Case] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "conversations", tuple(self.conversations))
        seen_ids = set()
        seen_keys = set()
        for conversation in self.conversations:
            if conversation.conversation_id in seen_ids:
                raise ConversationError(
                    f"Duplicate conversation id {conversation.conversation_id!r}"
                )
            if conversation.key in seen_keys:
                raise ConversationError(f"Duplicate (permutation, case, run) {conversation.key}")
            seen_ids.add(conversation.conversation_id)
            seen_keys.add(conversation.key)

    @staticmethod
    def from_traces(traces: Sequence[Trace], cases: Mapping[str, Case] | None = None) -> "TraceSet":
        """Group traces by conversation id and order each group by seq."""
        groups: dict[str, list[Trace]] = {}
        for trace in traces:
            groups.setdefault(trace.conversation_id, []).append(trace)
        conversations = [
            Conversation(tuple(sorted(groups[conversation_id], key=lambda t: t.seq)))
            for conversation_id in sorted(groups)
        ]
        return TraceSet(conversations=tuple(conversations), cases=dict(cases or {}))

    def __len__(self) -> int:
        return len(self.conversations)

    def __iter__(self) -> Iterator[Conversation]:
        return iter(self.conversations)

    @property
    def by_conversation_id(self) -> dict[str, Conversation]:
        return {c.conversation_id: c for c in self.conversations}

    def get(self, permutation_id: str, case_name: str, run_index: int) -> Conversation | None:
        for conversation in self.conversations:
            if conversation.key == (permutation_id, case_name, run_index):
                return conversation
        return None

    def permutation_ids(self) -> list[str]:
        """Permutation ids in order of first appearance."""
        return list(dict.fromkeys(c.permutation_id for c in self.conversations))

    def traces(self) -> list[Trace]:
        return [trace for conversation in self.conversations for trace in conversation]

    def case_for(self, conversation: Conversation) -> Case | None:
        return self.cases.get(conversation.case_name)
