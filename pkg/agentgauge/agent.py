"""Tool-calling agent loop with trace capture."""

import inspect
import logging
import time
from collections.abc import Awaitable, Callable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from string import Template
from typing import Any

from agentgauge.models import (
    Case,
    Message,
    Role,
    ToolInvocation,
    ToolSpec,
    Trace,
    TraceTarget,
)
from agentgauge.providers.base import BaseProvider, ModelReply, ProviderError, ToolCall
from agentgauge.sinks import TraceSink

logger = logging.getLogger(__name__)

DEFAULT_MAX_HOPS = 8

ToolFunction = Callable[[dict[str, str]], str | None | Awaitable[str | None]]


class HopLimitError(RuntimeError):
    """Raised when an agent turn needs more model calls than allowed."""

    def __init__(self, max_hops: int, messages: Sequence[Message]):
        super().__init__(f"Hop limit of {max_hops} model calls reached without a final reply")
        self.max_hops = max_hops
        self.messages = list(messages)


class ToolResolutionError(LookupError):
    """Raised when the model requests a tool the agent does not have."""

    def __init__(self, tool_name: str, messages: Sequence[Message]):
        super().__init__(f"Model requested unknown tool {tool_name!r}")
        self.tool_name = tool_name
        self.messages = list(messages)


class ConversationFailedError(RuntimeError):
    """Raised by run_conversation; keeps the traces recorded before the failure."""

    def __init__(self, traces: Sequence[Trace], cause: BaseException):
        super().__init__(f"Conversation failed: {cause}")
        self.traces = list(traces)


@dataclass(frozen=True)
class AgentConfig:
    """Parameters an agent is built from."""

    system_prompt: str
    model_id: str
    temperature: float = 0.0
    max_hops: int = DEFAULT_MAX_HOPS
    tools: tuple[ToolSpec, ...] = ()
    parameters: dict[str, str] = field(default_factory=dict)  # keys for custom factories

    def __post_init__(self):
        object.__setattr__(self, "tools", tuple(self.tools))
        object.__setattr__(self, "temperature", float(self.temperature))
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature must be within [0, 1], got {self.temperature}")
        if self.max_hops < 1:
            raise ValueError(f"max_hops must be at least 1, got {self.max_hops}")
        names = [tool.name for tool in self.tools]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise ValueError(f"Duplicate tool names: {', '.join(duplicates)}")

    def with_parameters(self, parameters: Mapping[str, str]) -> "AgentConfig":
        """Apply one permutation's parameter values.

        `tools` is a comma-separated subset of the configured tool names.
        Unknown keys are kept in `parameters` for custom agent factories.
        """
        changes: dict[str, Any] = {}
        extra = dict(self.parameters)
        for name, value in parameters.items():
            if name in ("system_prompt", "model_id"):
                changes[name] = value
            elif name == "temperature":
                changes[name] = _parse_number(name, value, float)
            elif name == "max_hops":
                changes[name] = _parse_number(name, value, int)
            elif name == "tools":
                changes[name] = self._select_tools(value)
            else:
                extra[name] = value
        return replace(self, **changes, parameters=extra)

    def _select_tools(self, value: str) -> tuple[ToolSpec, ...]:
        by_name = {tool.name: tool for tool in self.tools}
        selected = []
        for name in (part.strip() for part in value.split(",")):
            if not name:
                continue
            if name not in by_name:
                available = ", ".join(sorted(by_name)) or "none"
                raise ValueError(
                    f"Unknown tool {name!r} in 'tools' parameter. Available: {available}"
                )
            selected.append(by_name[name])
        return tuple(selected)


def _parse_number(name: str, value: str, kind: type) -> Any:
    try:
        return kind(value)
    except ValueError:
        raise ValueError(f"Parameter {name!r} must be a {kind.__name__}, got {value!r}") from None


class StaticTool:
    """Tool answering from configuration: a `$argument` template or a fixed error."""

    def __init__(self, result: str = "", error: str | None = None):
        self.result = Template(result)
        self.error = error

    def __call__(self, arguments: dict[str, str]) -> str:
        if self.error is not None:
            raise RuntimeError(self.error)
        return self.result.safe_substitute(arguments)


def _now_ms() -> int:
    return int(time.time() * 1000)


def _elapsed_ms(started: float) -> int:
    return max(0, round((time.perf_counter() - started) * 1000))


class ConversationTracer:
    """Turns agent steps into Traces and delivers them to a sink.

    The newest trace is held back until the next one arrives or the
    conversation finishes, so a failure can be stamped onto it before it
    reaches the sink.
    """

    def __init__(
        self,
        sink: TraceSink,
        *,
        conversation_id: str,
        case_name: str,
        permutation_id: str = "",
        run_index: int = 0,
        extras: Mapping[str, str] | None = None,
    ):
        self.sink = sink
        self.conversation_id = conversation_id
        self.case_name = case_name
        self.permutation_id = permutation_id
        self.run_index = run_index
        self.extras = dict(extras or {})
        self.traces: list[Trace] = []
        self._pending: Trace | None = None
        self._next_seq = 0

    @property
    def empty(self) -> bool:
        return self._pending is None and not self.traces

    async def record_llm(
        self,
        *,
        timestamp_ms: int,
        latency_ms: int,
        model_id: str,
        messages: Sequence[Message],
        input_tokens: int = 0,
        output_tokens: int = 0,
        tool_invocations: Sequence[ToolInvocation] = (),
    ) -> None:
        await self._push(
            to=TraceTarget.LLM,
            timestamp_ms=timestamp_ms,
            latency_ms=latency_ms,
            model_id=model_id,
            messages=messages,
            input_tokens=input_tokens,
            output_tokens=output_tokens,
            tool_invocations=tool_invocations,
        )

    async def record_tool(
        self,
        *,
        timestamp_ms: int,
        model_id: str,
        messages: Sequence[Message],
        invocation: ToolInvocation,
    ) -> None:
        await self._push(
            to=TraceTarget.TOOL,
            timestamp_ms=timestamp_ms,
            latency_ms=invocation.latency_ms,
            model_id=model_id,
            messages=messages,
            tool_invocations=(invocation,),
        )

    async def finish(self, error: BaseException | None = None) -> list[Trace]:
        """Deliver the held-back trace, stamped with the error if the conversation failed."""
        if self._pending is not None:
            pending = self._pending
            if error is not None:
                pending = pending.with_extras(
                    error=str(error) or type(error).__name__, error_kind=type(error).__name__
                )
            self._pending = None
            await self._deliver(pending)
        return list(self.traces)

    async def _push(self, *, to: TraceTarget, messages: Sequence[Message], **fields: Any) -> None:
        trace = Trace(
            conversation_id=self.conversation_id,
            case_name=self.case_name,
            permutation_id=self.permutation_id,
            run_index=self.run_index,
            seq=self._next_seq,
            to=to,
            user_conversation=tuple(messages),
            extras=dict(self.extras),
            **fields,
        )
        self._next_seq += 1
        if self._pending is not None:
            await self._deliver(self._pending)
        self._pending = trace

    async def _deliver(self, trace: Trace) -> None:
        self.traces.append(trace)
        await self.sink.append(trace)


class Agent:
    """Tool-calling conversation loop over a model provider.

    One instance holds one conversation (short-term memory across turns)
    and must not be used for concurrent `converse` calls.
    """

    def __init__(
        self,
        config: AgentConfig,
        provider: BaseProvider,
        tools: Mapping[str, ToolFunction] | None = None,
        tracer: ConversationTracer | None = None,
    ):
        self.config = config
        self.provider = provider
        self.tools = dict(tools or {})
        self.tracer = tracer
        self.messages: list[Message] = []
        self._specs = {spec.name: spec for spec in config.tools}
        self._invocations: list[ToolInvocation] = []

        missing = sorted(set(self._specs) - set(self.tools))
        if missing:
            raise ValueError(f"No implementation for tools: {', '.join(missing)}")

    def attach_tracer(self, tracer: ConversationTracer) -> None:
        self.tracer = tracer

    async def converse(self, user_input: str) -> str:
        """Run one user turn until the model replies without tool calls.

        Raises:
            HopLimitError: If max_hops model calls did not produce a final reply
            ToolResolutionError: If the model requested a tool the agent lacks
            ProviderError: If the model call failed
        """
        self.messages.append(Message(Role.USER, user_input))

        for _ in range(self.config.max_hops):
            timestamp_ms = _now_ms()
            started = time.perf_counter()
            try:
                reply = await self.provider.converse(
                    self.config.system_prompt,
                    list(self.messages),
                    self.config.model_id,
                    self.config.temperature,
                    self.config.tools,
                )
            except ProviderError:
                await self._trace_llm(timestamp_ms, _elapsed_ms(started), None, ())
                raise
            latency_ms = _elapsed_ms(started)

            if reply.text:
                self.messages.append(Message(Role.ASSISTANT, reply.text))

            if not reply.tool_calls:
                # The final step of a turn reports every invocation so far
                await self._trace_llm(timestamp_ms, latency_ms, reply, self._invocations)
                return reply.text or ""

            # Without text the step adds no assistant message
            llm_messages = list(self.messages)
            unknown = [c.tool_name for c in reply.tool_calls if c.tool_name not in self._specs]
            if unknown:
                await self._trace_llm(timestamp_ms, latency_ms, reply, (), llm_messages)
                raise ToolResolutionError(unknown[0], self.messages)

            steps = []
            for call in reply.tool_calls:
                tool_timestamp_ms = _now_ms()
                invocation = await self._invoke(call)
                self.messages.append(Message(Role.TOOL, invocation.result_text))
                steps.append((tool_timestamp_ms, invocation, list(self.messages)))

            invocations = [invocation for _, invocation, _ in steps]
            self._invocations.extend(invocations)
            await self._trace_llm(timestamp_ms, latency_ms, reply, invocations, llm_messages)
            if self.tracer is not None:
                for tool_timestamp_ms, invocation, messages in steps:
                    await self.tracer.record_tool(
                        timestamp_ms=tool_timestamp_ms,
                        model_id=self.config.model_id,
                        messages=messages,
                        invocation=invocation,
                    )

        raise HopLimitError(self.config.max_hops, self.messages)

    async def _invoke(self, call: ToolCall) -> ToolInvocation:
        """Run a tool; failures become an "ERROR: ..." result instead of an exception."""
        spec = self._specs[call.tool_name]
        started = time.perf_counter()

        missing = [name for name in spec.required_parameters if name not in call.arguments]
        if missing:
            error = f"missing required argument(s): {', '.join(missing)}"
        else:
            try:
                result = self.tools[call.tool_name](dict(call.arguments))
                if inspect.isawaitable(result):
                    result = await result
                return ToolInvocation(
                    tool_name=call.tool_name,
                    arguments=dict(call.arguments),
                    result_text="" if result is None else str(result),
                    latency_ms=_elapsed_ms(started),
                    success=True,
                )
            except Exception as e:
                error = str(e) or type(e).__name__

        logger.debug("Tool %s failed: %s", call.tool_name, error)
        return ToolInvocation(
            tool_name=call.tool_name,
            arguments=dict(call.arguments),
            result_text=f"ERROR: {error}",
            latency_ms=_elapsed_ms(started),
            success=False,
        )

    async def _trace_llm(
        self,
        timestamp_ms: int,
        latency_ms: int,
        reply: ModelReply | None,
        invocations: Sequence[ToolInvocation],
        messages: Sequence[Message] | None = None,
    ) -> None:
        if self.tracer is None:
            return
        await self.tracer.record_llm(
            timestamp_ms=timestamp_ms,
            latency_ms=latency_ms,
            model_id=self.config.model_id,
            messages=list(self.messages) if messages is None else messages,
            input_tokens=reply.input_tokens if reply else 0,
            output_tokens=reply.output_tokens if reply else 0,
            tool_invocations=tuple(invocations),
        )


AgentFactory = Callable[[AgentConfig], Agent]


async def run_conversation(
    agent_factory: AgentFactory,
    config: AgentConfig,
    case: Case,
    *,
    conversation_id: str,
    permutation_id: str = "",
    run_index: int = 0,
    sink: TraceSink,
) -> list[Trace]:
    """Run every turn of a case through a fresh agent and return its traces.

    Raises:
        ConversationFailedError: Wrapping the agent error; carries the traces
            recorded so far, the last one stamped with extras["error"]
    """
    extras = {"expected_tool": case.expected_tool} if case.expected_tool else {}
    tracer = ConversationTracer(
        sink,
        conversation_id=conversation_id,
        case_name=case.key,
        permutation_id=permutation_id,
        run_index=run_index,
        extras=extras,
    )

    error: Exception | None = None
    try:
        agent = agent_factory(config)
        agent.attach_tracer(tracer)
        for turn in case.turns:
            await agent.converse(turn.user_input)
    except Exception as e:
        error = e
        if tracer.empty:
            # Nothing was traced (e.g. the factory failed); keep a record of the attempt
            await tracer.record_llm(
                timestamp_ms=_now_ms(),
                latency_ms=0,
                model_id=config.model_id,
                messages=[Message(Role.USER, case.turns[0].user_input)],
            )

    traces = await tracer.finish(error)
    if error is not None:
        logger.warning(
            "Conversation %s failed (case %r, permutation %r, run %d): %s",
            conversation_id,
            case.key,
            permutation_id,
            run_index,
            error,
        )
        raise ConversationFailedError(traces, error) from error
    return traces
