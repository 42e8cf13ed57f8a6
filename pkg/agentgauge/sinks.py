"""Trace sinks and the JSONL trace format."""

import asyncio
import json
import logging
import os
import threading
from abc import ABC, abstractmethod
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

import aiohttp

from agentgauge.models import Case, Message, ToolInvocation, Trace, TraceSet, TraceTarget

logger = logging.getLogger(__name__)

TRACE_FORMAT_VERSION = "1"

_TRACE_FIELDS = (
    "version",
    "conversation_id",
    "case_name",
    "permutation_id",
    "run_index",
    "seq",
    "to",
    "timestamp_ms",
    "latency_ms",
    "input_tokens",
    "output_tokens",
    "model_id",
    "messages",
    "tool_invocations",
    "extras",
)


class TraceParseError(ValueError):
    """Raised when a trace line cannot be decoded."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


def trace_to_dict(trace: Trace) -> dict[str, Any]:
    """Wire representation of a trace."""
    return {
        "version": TRACE_FORMAT_VERSION,
        "conversation_id": trace.conversation_id,
        "case_name": trace.case_name,
        "permutation_id": trace.permutation_id,
        "run_index": trace.run_index,
        "seq": trace.seq,
        "to": trace.to.value,
        "timestamp_ms": trace.timestamp_ms,
        "latency_ms": trace.latency_ms,
        "input_tokens": trace.input_tokens,
        "output_tokens": trace.output_tokens,
        "model_id": trace.model_id,
        "messages": [{"role": m.role.value, "text": m.text} for m in trace.user_conversation],
        "tool_invocations": [
            {
                "tool_name": invocation.tool_name,
                "arguments": dict(invocation.arguments),
                "result_text": invocation.result_text,
                "latency_ms": invocation.latency_ms,
                "success": invocation.success,
            }
            for invocation in trace.tool_invocations
        ],
        "extras": dict(trace.extras),
    }


def trace_from_dict(data: Any) -> Trace:
    """Decode a wire trace; unknown top-level fields are kept in extras.

    Raises:
        TraceParseError: If a field is missing or has the wrong shape
    """
    if not isinstance(data, dict):
        raise TraceParseError(f"expected a JSON object, got {type(data).__name__}")

    version = str(data.get("version", TRACE_FORMAT_VERSION))
    if version != TRACE_FORMAT_VERSION:
        raise TraceParseError(f"unsupported trace format version {version!r}")

    raw_extras = data.get("extras") or {}
    if not isinstance(raw_extras, dict):
        raise TraceParseError("field 'extras' must be an object")
    extras = {str(k): str(v) for k, v in raw_extras.items()}
    for key, value in data.items():
        if key not in _TRACE_FIELDS:
            extras[key] = value if isinstance(value, str) else json.dumps(value, sort_keys=True)

    try:
        return Trace(
            conversation_id=str(data["conversation_id"]),
            case_name=str(data["case_name"]),
            permutation_id=str(data.get("permutation_id", "")),
            run_index=int(data.get("run_index", 0)),
            seq=int(data["seq"]),
            to=TraceTarget(data["to"]),
            timestamp_ms=int(data["timestamp_ms"]),
            latency_ms=int(data.get("latency_ms", 0)),
            input_tokens=int(data.get("input_tokens", 0)),
            output_tokens=int(data.get("output_tokens", 0)),
            model_id=str(data.get("model_id", "")),
            user_conversation=tuple(
                Message(role=m["role"], text=str(m.get("text", "")))
                for m in data.get("messages") or []
            ),
            tool_invocations=tuple(
                ToolInvocation(
                    tool_name=str(i["tool_name"]),
                    arguments={str(k): str(v) for k, v in (i.get("arguments") or {}).items()},
                    result_text=str(i.get("result_text", "")),
                    latency_ms=int(i.get("latency_ms", 0)),
                    success=bool(i.get("success", True)),
                )
                for i in data.get("tool_invocations") or []
            ),
            extras=extras,
        )
    except KeyError as e:
        raise TraceParseError(f"missing field {e.args[0]!r}") from None
    except (TypeError, ValueError, AttributeError) as e:
        raise TraceParseError(str(e)) from e


def load_traces(path: Path, cases: Mapping[str, Case] | None = None) -> TraceSet:
    """Load a JSONL trace file, regrouping traces by conversation and seq.

    Raises:
        TraceParseError: On a malformed line, naming the line number
    """
    traces = []
    with path.open(encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as e:
                raise TraceParseError(f"invalid JSON: {e.msg}", line_number) from None
            try:
                traces.append(trace_from_dict(data))
            except TraceParseError as e:
                raise TraceParseError(str(e), line_number) from None
    return TraceSet.from_traces(traces, cases)


def save_traces(trace_set: TraceSet | Iterable[Trace], path: Path) -> None:
    """Write traces as JSONL, one trace per line."""
    traces = trace_set.traces() if isinstance(trace_set, TraceSet) else list(trace_set)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for trace in traces:
            f.write(json.dumps(trace_to_dict(trace), ensure_ascii=False) + "\n")


class TraceSink(ABC):
    """Destination for traces as they are produced.

    Sinks receive appends from many concurrent conversations; traces of one
    conversation arrive in seq order and must stay in that order.
    """

    @abstractmethod
    async def append(self, trace: Trace) -> None:
        """Accept one trace."""

    async def flush(self) -> None:
        """Make every appended trace durable."""

    async def close(self) -> None:
        await self.flush()


class NullSink(TraceSink):
    """Discards traces."""

    async def append(self, trace: Trace) -> None:
        pass


class MemorySink(TraceSink):
    """Keeps traces in a list."""

    def __init__(self):
        self.traces: list[Trace] = []
        self._lock = threading.Lock()

    async def append(self, trace: Trace) -> None:
        with self._lock:
            self.traces.append(trace)


class JsonlSink(TraceSink):
    """Appends traces to a JSONL file."""

    def __init__(self, path: Path):
        self.path = path
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = path.open("a", encoding="utf-8")
        self._lock = threading.Lock()

    async def append(self, trace: Trace) -> None:
        line = json.dumps(trace_to_dict(trace), ensure_ascii=False) + "\n"
        with self._lock:
            self._file.write(line)

    async def flush(self) -> None:
        with self._lock:
            if self._file.closed:
                return
            self._file.flush()
            os.fsync(self._file.fileno())

    async def close(self) -> None:
        await self.flush()
        with self._lock:
            self._file.close()


class HttpSink(TraceSink):
    """POSTs every trace to a collector endpoint in the background.

    Delivery never blocks or fails the agent: after the last retry a trace is
    dropped with a warning. `flush` waits for all pending deliveries.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 10.0,
        retries: int = 3,
        backoff_base_seconds: float = 0.2,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.backoff_base_seconds = backoff_base_seconds
        self.delivered = 0
        self.dropped = 0
        self._pending: set[asyncio.Task] = set()
        self._order_locks: dict[str, asyncio.Lock] = {}
        self._waiting: dict[str, int] = {}

    async def append(self, trace: Trace) -> None:
        task = asyncio.create_task(self._deliver(trace))
        self._pending.add(task)
        task.add_done_callback(self._pending.discard)

    async def flush(self) -> None:
        while self._pending:
            await asyncio.gather(*list(self._pending), return_exceptions=True)

    async def _deliver(self, trace: Trace) -> None:
        # Serialize per conversation so the collector sees seq order
        conversation_id = trace.conversation_id
        lock = self._order_locks.setdefault(conversation_id, asyncio.Lock())
        self._waiting[conversation_id] = self._waiting.get(conversation_id, 0) + 1
        try:
            async with lock:
                await self._send(trace)
        finally:
            self._waiting[conversation_id] -= 1
            if not self._waiting[conversation_id]:
                del self._waiting[conversation_id]
                del self._order_locks[conversation_id]

    async def _send(self, trace: Trace) -> None:
        body = trace_to_dict(trace)
        for attempt in range(self.retries + 1):
            error = await self._post(body)
            if error is None:
                self.delivered += 1
                return
            if attempt < self.retries:
                await asyncio.sleep(self.backoff_base_seconds * (2**attempt))

        self.dropped += 1
        logger.warning(
            "Dropping trace %s#%d after %d attempts: %s",
            trace.conversation_id,
            trace.seq,
            self.retries + 1,
            error,
        )

    async def _post(self, body: dict[str, Any]) -> str | None:
        """POST once; returns an error description or None on success."""
        try:
            timeout = aiohttp.ClientTimeout(total=self.timeout)
            async with aiohttp.ClientSession(timeout=timeout) as session:
                async with session.post(self.endpoint, json=body) as response:
                    if 200 <= response.status < 300:
                        return None
                    return f"HTTP {response.status} {response.reason}"
        except aiohttp.ClientError as e:
            return f"Connection failed: {e}"
        except TimeoutError:
            return f"Request timeout (>{self.timeout}s)"


class FanOutSink(TraceSink):
    """Forwards every trace to several sinks."""

    def __init__(self, *sinks: TraceSink):
        self.sinks = list(sinks)

    async def append(self, trace: Trace) -> None:
        for sink in self.sinks:
            await sink.append(trace)

    async def flush(self) -> None:
        for sink in self.sinks:
            await sink.flush()

    async def close(self) -> None:
        for sink in self.sinks:
            await sink.close()
