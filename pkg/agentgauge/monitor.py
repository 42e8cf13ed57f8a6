"""Runtime monitoring of deployed agents with sliding-window alarms."""

import asyncio
import json
import logging
import math
import threading
import time
from collections import deque
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any

import aiohttp
from aiohttp import web

from agentgauge.evaluation import Comparator, evaluate_conversation, parse_comparator
from agentgauge.metrics.base import BaseMetric
from agentgauge.models import Conversation, ConversationError, Measurement, Trace
from agentgauge.sinks import TraceParseError, trace_from_dict

logger = logging.getLogger(__name__)


class Aggregation(str, Enum):
    """How the values in an alarm window are combined."""

    SUM = "sum"
    MEAN = "mean"
    COUNT_NONZERO = "count_nonzero"

    def apply(self, values: Sequence[float]) -> float:
        if self == Aggregation.SUM:
            return math.fsum(values)
        if self == Aggregation.MEAN:
            return math.fsum(values) / len(values) if values else 0.0
        return float(sum(1 for value in values if value != 0))


@dataclass(frozen=True)
class AlarmRule:
    """Alarm over a metric's values in the last `window` completed conversations."""

    metric: str
    aggregation: Aggregation = Aggregation.SUM
    comparator: Comparator = Comparator.GE
    threshold: float = 0.0
    window: int = 10
    name: str = ""

    def __post_init__(self):
        if not self.metric:
            raise ValueError("Alarm rule must name a metric")
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))
        object.__setattr__(self, "comparator", Comparator(self.comparator))
        object.__setattr__(self, "threshold", float(self.threshold))
        if not math.isfinite(self.threshold):
            raise ValueError(f"Alarm threshold for {self.metric} must be finite")
        if self.window < 1:
            raise ValueError(f"Alarm window must be at least 1, got {self.window}")
        if not self.name:
            object.__setattr__(
                self,
                "name",
                f"{self.metric} {self.aggregation.value} {self.comparator.value} "
                f"{self.threshold:g} over {self.window}",
            )

    @staticmethod
    def from_dict(data: Mapping[str, Any]) -> "AlarmRule":
        """Parse `{name?, metric, aggregation, comparator, threshold, window}`."""
        if "metric" not in data or "threshold" not in data:
            raise ValueError(f"Alarm rule needs 'metric' and 'threshold': {dict(data)}")
        try:
            aggregation = Aggregation(str(data.get("aggregation", "sum")).lower())
        except ValueError:
            valid = ", ".join(a.value for a in Aggregation)
            raise ValueError(
                f"Invalid aggregation {data.get('aggregation')!r}. Valid values: {valid}"
            ) from None
        return AlarmRule(
            metric=str(data["metric"]),
            aggregation=aggregation,
            comparator=parse_comparator(data.get("comparator", ">=")),
            threshold=float(data["threshold"]),
            window=int(data.get("window", 10)),
            name=str(data.get("name", "")),
        )


@dataclass(frozen=True)
class AlarmEvent:
    rule: str
    metric: str
    aggregation: Aggregation
    value: float
    threshold: float
    window: int
    fired_at_ms: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "rule": self.rule,
            "metric": self.metric,
            "aggregation": self.aggregation.value,
            "value": self.value,
            "threshold": self.threshold,
            "window": self.window,
            "fired_at_ms": self.fired_at_ms,
        }


class _RuleState:
    def __init__(self, rule: AlarmRule):
        self.rule = rule
        self.values: deque[float] = deque(maxlen=rule.window)
        self.active = False

    @property
    def full(self) -> bool:
        return len(self.values) == self.rule.window


class Monitor:
    """Evaluates completed conversations and tracks alarm rules.

    Each rule keeps the metric values of the last `window` conversations.
    An alarm fires when the window is full and the aggregated value meets
    the comparator; it fires again only after the condition was false.
    """

    def __init__(self, metrics: Sequence[BaseMetric], rules: Sequence[AlarmRule]):
        self.metrics = list(metrics)
        self.rules = list(rules)
        self._states = [_RuleState(rule) for rule in self.rules]
        self._lock = threading.Lock()

    async def on_conversation_complete(
        self, traces: Sequence[Trace] | Conversation
    ) -> list[AlarmEvent]:
        """Measure a completed conversation, record the values and check the alarms."""
        conversation = (
            traces
            if isinstance(traces, Conversation)
            else Conversation(tuple(sorted(traces, key=lambda t: t.seq)))
        )
        measurements = []
        for metric in self.metrics:
            measurements.extend(await evaluate_conversation(metric, conversation))
        self.record(measurements)
        return self.check_alarms()

    def record(self, measurements: Sequence[Measurement]) -> None:
        """Add one conversation's measurements to the rule windows.

        A metric measured several times in one conversation contributes the mean.
        """
        values: dict[str, list[float]] = {}
        for measurement in measurements:
            values.setdefault(measurement.name, []).append(measurement.value)

        with self._lock:
            for state in self._states:
                metric_values = values.get(state.rule.metric)
                if metric_values:
                    state.values.append(math.fsum(metric_values) / len(metric_values))

    def check_alarms(self) -> list[AlarmEvent]:
        """Alarm events for rules whose condition newly became true."""
        events = []
        now_ms = int(time.time() * 1000)
        with self._lock:
            for state in self._states:
                if not state.full:
                    continue
                rule = state.rule
                value = rule.aggregation.apply(list(state.values))
                condition = rule.comparator.holds(value, rule.threshold)
                if condition and not state.active:
                    events.append(
                        AlarmEvent(
                            rule=rule.name,
                            metric=rule.metric,
                            aggregation=rule.aggregation,
                            value=value,
                            threshold=rule.threshold,
                            window=rule.window,
                            fired_at_ms=now_ms,
                        )
                    )
                state.active = condition
        return events

    def rule_status(self) -> list[dict[str, Any]]:
        with self._lock:
            return [
                {
                    "rule": state.rule.name,
                    "filled": len(state.values),
                    "window": state.rule.window,
                    "active": state.active,
                }
                for state in self._states
            ]


class AlarmNotifier:
    """Delivers alarm events to the log and an optional webhook."""

    def __init__(self, webhook_url: str | None = None, timeout: float = 10.0):
        self.webhook_url = webhook_url
        self.timeout = timeout
        self.delivered = 0

    async def notify(self, events: Sequence[AlarmEvent]) -> None:
        for event in events:
            logger.warning(
                "ALARM %s: %s of %s over last %d conversations is %g (threshold %g)",
                event.rule,
                event.aggregation.value,
                event.metric,
                event.window,
                event.value,
                event.threshold,
            )
            if self.webhook_url:
                await self._post(event)

    async def _post(self, event: AlarmEvent) -> None:
        try:
            timeout = aiohttp.ClientTimeout(total=self.timeout)
            async with aiohttp.ClientSession(timeout=timeout) as session:
                async with session.post(self.webhook_url, json=event.to_dict()) as response:
                    if response.status >= 400:
                        logger.warning(
                            "Alarm webhook rejected %s: HTTP %d", event.rule, response.status
                        )
                        return
            self.delivered += 1
        except (aiohttp.ClientError, TimeoutError) as e:
            logger.warning("Alarm webhook delivery failed for %s: %s", event.rule, e)


class MonitorServer:
    """HTTP collector feeding posted traces into a Monitor.

    A conversation counts as complete once no trace for it arrived for
    `completion_timeout_seconds`, as the trace format has no end marker.
    """

    def __init__(
        self,
        monitor: Monitor,
        notifier: AlarmNotifier | None = None,
        completion_timeout_seconds: float = 30.0,
        sweep_interval_seconds: float = 1.0,
    ):
        self.monitor = monitor
        self.notifier = notifier or AlarmNotifier()
        self.completion_timeout_seconds = completion_timeout_seconds
        self.sweep_interval_seconds = sweep_interval_seconds
        self.completed = 0
        self._pending: dict[str, list[Trace]] = {}
        self._last_seen: dict[str, float] = {}

    def create_app(self) -> web.Application:
        app = web.Application()
        app.router.add_post("/traces", self.handle_traces)
        app.router.add_get("/health", self.handle_health)
        app.cleanup_ctx.append(self._sweeper)
        return app

    async def handle_traces(self, request: web.Request) -> web.Response:
        try:
            payload = await request.json()
        except (json.JSONDecodeError, UnicodeDecodeError):
            logger.info("Rejected trace POST: body is not JSON")
            return web.json_response({"error": "body is not valid JSON"}, status=400)

        items = payload if isinstance(payload, list) else [payload]
        try:
            traces = [trace_from_dict(item) for item in items]
        except TraceParseError as e:
            logger.info("Rejected trace POST: %s", e)
            return web.json_response({"error": str(e)}, status=400)

        now = time.monotonic()
        for trace in traces:
            self._pending.setdefault(trace.conversation_id, []).append(trace)
            self._last_seen[trace.conversation_id] = now
        return web.json_response({"accepted": len(traces)}, status=202)

    async def handle_health(self, request: web.Request) -> web.Response:
        return web.json_response(
            {
                "status": "ok",
                "pending_conversations": len(self._pending),
                "completed_conversations": self.completed,
                "rules": self.monitor.rule_status(),
            }
        )

    async def sweep(self, now: float | None = None) -> list[AlarmEvent]:
        """Complete idle conversations and deliver resulting alarms."""
        now = time.monotonic() if now is None else now
        idle = [
            conversation_id
            for conversation_id, last_seen in self._last_seen.items()
            if now - last_seen >= self.completion_timeout_seconds
        ]

        events = []
        for conversation_id in idle:
            traces = self._pending.pop(conversation_id)
            del self._last_seen[conversation_id]
            try:
                conversation = Conversation(tuple(sorted(traces, key=lambda t: t.seq)))
            except ConversationError as e:
                logger.warning("Discarding incomplete conversation %s: %s", conversation_id, e)
                continue
            self.completed += 1
            events.extend(await self.monitor.on_conversation_complete(conversation))

        if events:
            await self.notifier.notify(events)
        return events

    async def _sweeper(self, app: web.Application):
        async def loop():
            while True:
                await asyncio.sleep(self.sweep_interval_seconds)
                try:
                    await self.sweep()
                except Exception:
                    logger.exception("Monitor sweep failed")

        task = asyncio.create_task(loop())
        yield
        task.cancel()
        try:
            await task
        except asyncio.CancelledError:
            pass

    async def serve(self, host: str, port: int) -> None:
        """Run until cancelled."""
        runner = web.AppRunner(self.create_app())
        await runner.setup()
        site = web.TCPSite(runner, host, port)
        await site.start()
        logger.info("Monitor listening on http://%s:%d", host, port)
        try:
            await asyncio.Event().wait()
        finally:
            await runner.cleanup()
