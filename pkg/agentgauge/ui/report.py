"""Self-contained static HTML report of traces and measurements."""

import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jinja2

from agentgauge.evaluation import MeasurementSet, summarize
from agentgauge.models import Conversation, Measurement, Message, TraceSet
from agentgauge.ui.constants import (
    FAIL_LABEL,
    MEAN_DECIMALS,
    MISSING_CELL,
    PASS_LABEL,
    format_value,
    get_latency_class,
)


@dataclass(frozen=True)
class BadgeRules:
    """Which measurements decide a conversation's pass/fail badge.

    Without `boolean_metrics`, measurements tagged kind=boolean count.
    Error measurements fail the badge unless their metric is ignored.
    """

    boolean_metrics: tuple[str, ...] | None = None
    ignore_metrics: tuple[str, ...] = ()

    def _ignored(self, measurement: Measurement) -> bool:
        base_name = measurement.name.removesuffix(".error")
        return measurement.name in self.ignore_metrics or base_name in self.ignore_metrics

    def _is_boolean(self, measurement: Measurement) -> bool:
        if self.boolean_metrics is not None:
            return measurement.name in self.boolean_metrics
        return measurement.is_boolean

    def passes(self, measurements: Iterable[Measurement]) -> bool:
        for measurement in measurements:
            if self._ignored(measurement):
                continue
            if measurement.is_error:
                return False
            if self._is_boolean(measurement) and measurement.value != 1:
                return False
        return True


def _anchor(conversation: Conversation) -> str:
    return f"conv-{conversation.conversation_id}"


def _new_messages(previous: Sequence[Message], current: Sequence[Message]) -> Sequence[Message]:
    """Messages a step added to the conversation."""
    if len(previous) <= len(current) and tuple(current[: len(previous)]) == tuple(previous):
        return current[len(previous) :]
    return current


_environment = jinja2.Environment(
    loader=jinja2.PackageLoader("agentgauge.ui", "templates"),
    autoescape=True,
    undefined=jinja2.StrictUndefined,
)


def build_report(
    trace_set: TraceSet,
    measurements: MeasurementSet,
    badge_rules: BadgeRules | None = None,
    title: str = "Agent evaluation report",
) -> str:
    """Render the HTML report.

    The overview has one row per case and one column per permutation, with
    a pass/fail badge per run linking to the conversation's detail section.
    """
    badge_rules = badge_rules or BadgeRules()
    by_conversation = measurements.by_conversation()

    permutations = trace_set.permutation_ids()
    cases = list(dict.fromkeys(c.case_name for c in trace_set))
    overview: dict[tuple[str, str], list[dict[str, Any]]] = {
        (case, permutation): [] for case in cases for permutation in permutations
    }

    details = []
    passed_count = 0
    for conversation in trace_set:
        conversation_measurements = by_conversation.get(conversation.conversation_id, [])
        passed = badge_rules.passes(conversation_measurements)
        passed_count += passed
        overview[(conversation.case_name, conversation.permutation_id)].append(
            {"passed": passed, "anchor": _anchor(conversation), "run_index": conversation.run_index}
        )

        steps = []
        previous: Sequence[Message] = ()
        for trace in conversation:
            steps.append(
                {
                    "trace": trace,
                    "messages": _new_messages(previous, trace.user_conversation),
                    "latency_class": get_latency_class(trace.latency_ms),
                }
            )
            previous = trace.user_conversation
        details.append(
            {
                "conversation": conversation,
                "anchor": _anchor(conversation),
                "steps": steps,
                "measurements": conversation_measurements,
            }
        )

    for cell in overview.values():
        cell.sort(key=lambda item: item["run_index"])

    template = _environment.get_template("report.html.j2")
    return template.render(
        title=title,
        permutations=permutations,
        cases=cases,
        overview=overview,
        details=details,
        passed_count=passed_count,
        summary=summarize(measurements),
        pass_label=PASS_LABEL,
        fail_label=FAIL_LABEL,
        missing_cell=MISSING_CELL,
        mean_decimals=MEAN_DECIMALS,
        format_value=format_value,
        format_info=lambda info: json.dumps(info, indent=1, ensure_ascii=False) if info else "",
    )


def write_report(
    path: Path,
    trace_set: TraceSet,
    measurements: MeasurementSet,
    badge_rules: BadgeRules | None = None,
) -> None:
    path.write_text(build_report(trace_set, measurements, badge_rules), encoding="utf-8")
