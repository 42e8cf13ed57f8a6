"""Metric evaluation, summaries and threshold assertions."""

import asyncio
import csv
import io
import json
import logging
import math
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from agentgauge.metrics.base import BaseMetric, error_measurement
from agentgauge.models import Case, Conversation, Measurement, TraceSet, Unit

logger = logging.getLogger(__name__)

DEFAULT_EVAL_PARALLEL = 8

# Absolute slack for threshold comparisons of averaged floats
COMPARISON_TOLERANCE = 1e-12


class Comparator(str, Enum):
    """Inclusive threshold comparison."""

    GE = ">="
    LE = "<="

    def holds(self, value: float, threshold: float) -> bool:
        if self == Comparator.GE:
            return value >= threshold - COMPARISON_TOLERANCE
        return value <= threshold + COMPARISON_TOLERANCE


def parse_comparator(value: Any) -> Comparator:
    try:
        return Comparator(str(value).strip())
    except ValueError:
        valid = ", ".join(f"'{c.value}'" for c in Comparator)
        raise ValueError(f"Invalid comparator {value!r}. Valid values: {valid}") from None


def measurement_to_dict(measurement: Measurement) -> dict[str, Any]:
    data = asdict(measurement)
    data["unit"] = measurement.unit.value
    return data


def measurement_from_dict(data: Mapping[str, Any]) -> Measurement:
    try:
        return Measurement(
            name=str(data["name"]),
            value=float(data["value"]),
            unit=Unit(data.get("unit", Unit.DIMENSIONLESS.value)),
            additional_info=dict(data.get("additional_info") or {}),
            conversation_id=str(data.get("conversation_id", "")),
            case_name=str(data.get("case_name", "")),
            permutation_id=str(data.get("permutation_id", "")),
            run_index=int(data.get("run_index", 0)),
        )
    except KeyError as e:
        raise ValueError(f"missing field {e.args[0]!r}") from None
    except (TypeError, AttributeError) as e:
        raise ValueError(str(e)) from e


@dataclass(frozen=True)
class MeasurementSet:
    """All measurements of an evaluation."""

    measurements: tuple[Measurement, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "measurements", tuple(self.measurements))

    def __len__(self) -> int:
        return len(self.measurements)

    def __iter__(self) -> Iterator[Measurement]:
        return iter(self.measurements)

    def by_conversation(self) -> dict[str, list[Measurement]]:
        grouped: dict[str, list[Measurement]] = {}
        for measurement in self.measurements:
            grouped.setdefault(measurement.conversation_id, []).append(measurement)
        return grouped

    def by_metric_and_permutation(self) -> dict[tuple[str, str], list[Measurement]]:
        grouped: dict[tuple[str, str], list[Measurement]] = {}
        for measurement in self.measurements:
            key = (measurement.name, measurement.permutation_id)
            grouped.setdefault(key, []).append(measurement)
        return grouped

    def metric_names(self) -> list[str]:
        return sorted({m.name for m in self.measurements})

    def summary(self) -> "SummaryTable":
        return summarize(self)

    def save(self, path: Path) -> None:
        """Write one JSON object per measurement."""
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as f:
            for measurement in self.measurements:
                f.write(json.dumps(measurement_to_dict(measurement), ensure_ascii=False) + "\n")

    @staticmethod
    def load(path: Path) -> "MeasurementSet":
        measurements = []
        with path.open(encoding="utf-8") as f:
            for line_number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    measurements.append(measurement_from_dict(json.loads(line)))
                except (json.JSONDecodeError, ValueError) as e:
                    raise ValueError(f"{path}: line {line_number}: {e}") from None
        return MeasurementSet(tuple(measurements))


async def evaluate_conversation(
    metric: BaseMetric, conversation: Conversation, case: Case | None = None
) -> list[Measurement]:
    """Run one metric on one conversation, turning an exception into an error measurement."""
    metric_name = metric.name or type(metric).__name__
    try:
        return list(await metric.evaluate_conversation(conversation, case))
    except Exception as e:
        logger.warning(
            "Metric %s failed on conversation %s: %s", metric_name, conversation.conversation_id, e
        )
        return [error_measurement(metric_name, conversation, e)]


async def evaluate_traces(
    traces: TraceSet,
    metrics: Sequence[BaseMetric],
    max_parallel: int = DEFAULT_EVAL_PARALLEL,
) -> MeasurementSet:
    """Apply every metric to every conversation.

    A metric raising on a conversation yields a "<metric>.error" measurement
    instead; other metrics and conversations are unaffected. Measurements are
    ordered by conversation, then by metric.
    """
    semaphore = asyncio.Semaphore(max_parallel)

    async def run(metric: BaseMetric, conversation: Conversation) -> list[Measurement]:
        async with semaphore:
            return await evaluate_conversation(metric, conversation, traces.case_for(conversation))

    results = await asyncio.gather(
        *(run(metric, conversation) for conversation in traces for metric in metrics)
    )
    return MeasurementSet(tuple(m for measurements in results for m in measurements))


@dataclass(frozen=True)
class SummaryRow:
    """Aggregate of one metric within one permutation."""

    permutation_id: str
    metric: str
    mean: float
    count: int
    min: float
    max: float
    unit: Unit


SUMMARY_COLUMNS = ("permutation", "metric", "mean", "count", "min", "max", "unit")


@dataclass(frozen=True)
class SummaryTable:
    """Per-permutation metric averages."""

    rows: tuple[SummaryRow, ...] = ()

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[SummaryRow]:
        return iter(self.rows)

    def rows_for(self, metric: str) -> list[SummaryRow]:
        return [row for row in self.rows if row.metric == metric]

    def to_records(self) -> list[dict[str, Any]]:
        return [
            {
                "permutation": row.permutation_id,
                "metric": row.metric,
                "mean": row.mean,
                "count": row.count,
                "min": row.min,
                "max": row.max,
                "unit": row.unit.value,
            }
            for row in self.rows
        ]

    def to_json(self) -> str:
        return json.dumps(self.to_records(), indent=2, ensure_ascii=False)

    def to_csv(self) -> str:
        """CSV with full float precision."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for record in self.to_records():
            writer.writerow(
                repr(value) if isinstance(value, float) else value for value in record.values()
            )
        return buffer.getvalue()


def summarize(measurements: Iterable[Measurement]) -> SummaryTable:
    """One row per (permutation, metric), sorted by permutation then metric."""
    grouped: dict[tuple[str, str], list[Measurement]] = {}
    for measurement in measurements:
        grouped.setdefault((measurement.permutation_id, measurement.name), []).append(measurement)

    rows = []
    for (permutation, metric), items in sorted(grouped.items()):
        values = [m.value for m in items]
        rows.append(
            SummaryRow(
                permutation_id=permutation,
                metric=metric,
                mean=math.fsum(values) / len(values),
                count=len(values),
                min=min(values),
                max=max(values),
                unit=items[0].unit,
            )
        )
    return SummaryTable(tuple(rows))


class Scope(str, Enum):
    """Whether a rule checks the overall mean or every permutation's mean."""

    OVERALL = "overall"
    PER_PERMUTATION = "per_permutation"


@dataclass(frozen=True)
class AssertionRule:
    """CI threshold on a metric's mean."""

    metric: str
    scope: Scope = Scope.OVERALL
    comparator: Comparator = Comparator.GE
    threshold: float = 0.0

    def __post_init__(self):
        if not self.metric:
            raise ValueError("Assertion rule must name a metric")
        object.__setattr__(self, "scope", Scope(self.scope))
        object.__setattr__(self, "comparator", Comparator(self.comparator))
        object.__setattr__(self, "threshold", float(self.threshold))
        if not math.isfinite(self.threshold):
            raise ValueError(f"Threshold for {self.metric} must be finite")

    def describe(self) -> str:
        return f"{self.metric} ({self.scope.value}) {self.comparator.value} {self.threshold:g}"

    @staticmethod
    def from_dict(data: Mapping[str, Any]) -> "AssertionRule":
        """Parse `{metric, scope?, comparator?, threshold}`."""
        if "metric" not in data or "threshold" not in data:
            raise ValueError(f"Assertion rule needs 'metric' and 'threshold': {dict(data)}")
        try:
            scope = Scope(str(data.get("scope", Scope.OVERALL.value)))
        except ValueError:
            valid = ", ".join(s.value for s in Scope)
            raise ValueError(
                f"Invalid scope {data.get('scope')!r}. Valid values: {valid}"
            ) from None
        return AssertionRule(
            metric=str(data["metric"]),
            scope=scope,
            comparator=parse_comparator(data.get("comparator", ">=")),
            threshold=float(data["threshold"]),
        )


@dataclass(frozen=True)
class RuleResult:
    """Outcome of one assertion rule."""

    rule: AssertionRule
    passed: bool
    reason: str = ""
    value: float | None = None  # overall mean, for scope=overall
    offending: tuple[tuple[str, float], ...] = ()  # (permutation, mean) violating the rule


@dataclass(frozen=True)
class Verdict:
    results: tuple[RuleResult, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.results)

    @property
    def failures(self) -> list[RuleResult]:
        return [result for result in self.results if not result.passed]


def check_rule(summary: SummaryTable, rule: AssertionRule) -> RuleResult:
    rows = summary.rows_for(rule.metric)
    if not rows:
        return RuleResult(rule, passed=False, reason="metric missing")

    if rule.scope == Scope.OVERALL:
        total = sum(row.count for row in rows)
        mean = math.fsum(row.mean * row.count for row in rows) / total
        passed = rule.comparator.holds(mean, rule.threshold)
        reason = "" if passed else f"overall mean {mean:.4f} violates {rule.describe()}"
        return RuleResult(rule, passed=passed, reason=reason, value=mean)

    offending = tuple(
        (row.permutation_id, row.mean)
        for row in rows
        if not rule.comparator.holds(row.mean, rule.threshold)
    )
    if offending:
        names = ", ".join(repr(permutation) for permutation, _ in offending)
        return RuleResult(
            rule, passed=False, reason=f"violated by permutation(s) {names}", offending=offending
        )
    return RuleResult(rule, passed=True)


def assert_thresholds(summary: SummaryTable, rules: Sequence[AssertionRule]) -> Verdict:
    """Check every rule; the verdict passes iff all rules pass."""
    return Verdict(tuple(check_rule(summary, rule) for rule in rules))
