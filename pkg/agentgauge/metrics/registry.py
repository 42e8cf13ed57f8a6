"""Metric selection by name for the command line.

A metric spec is a comma-separated list of `name` or `name:config.json`
entries, e.g. `latency,hops,cost:pricing.json`.
"""

import json
from collections.abc import Callable
from pathlib import Path
from typing import Any

from agentgauge.config import ProviderSpec, Settings, build_provider
from agentgauge.metrics.base import BaseMetric
from agentgauge.metrics.bleu import BleuMetric
from agentgauge.metrics.judge import ConcisenessJudgeMetric, ExpectationJudgeMetric
from agentgauge.metrics.runtime import (
    CostMetric,
    HopsMetric,
    LatencyMetric,
    PricingTable,
    TokensMetric,
)
from agentgauge.metrics.similarity import (
    HashedBagOfWordsEmbedder,
    HttpEmbedder,
    ResponseSimilarityMetric,
)
from agentgauge.metrics.text import (
    DEFAULT_UNABLE_TO_HELP_INDICATORS,
    KeywordPresenceMetric,
    UnableToHelpMetric,
)
from agentgauge.metrics.tools import CorrectToolMetric, NoToolMetric


class UnknownMetricError(ValueError):
    """Raised for a metric name the registry does not know."""


MetricBuilder = Callable[[Any, Settings], BaseMetric]


def _no_config(metric_type: type[BaseMetric]) -> MetricBuilder:
    def build(config: Any, settings: Settings) -> BaseMetric:
        if config is not None:
            raise ValueError(f"{metric_type.__name__} takes no configuration")
        return metric_type()

    return build


def _require(config: Any, metric: str) -> dict[str, Any]:
    if not isinstance(config, dict):
        raise ValueError(f"Metric {metric!r} requires a JSON object configuration")
    return config


def _build_cost(config: Any, settings: Settings) -> BaseMetric:
    return CostMetric(PricingTable.from_dict(_require(config, "cost")))


def _build_keyword(config: Any, settings: Settings) -> BaseMetric:
    config = _require(config, "keyword")
    terms = config.get("terms")
    if not isinstance(terms, list) or not all(isinstance(t, str) for t in terms):
        raise ValueError("Metric 'keyword' requires 'terms': a list of strings")
    return KeywordPresenceMetric(terms, name=str(config.get("name", "KeywordPresence")))


def _build_unable_to_help(config: Any, settings: Settings) -> BaseMetric:
    if config is None:
        return UnableToHelpMetric()
    indicators = _require(config, "unable_to_help").get(
        "indicators", list(DEFAULT_UNABLE_TO_HELP_INDICATORS)
    )
    if not isinstance(indicators, list) or not all(isinstance(i, str) for i in indicators):
        raise ValueError("Metric 'unable_to_help': 'indicators' must be a list of strings")
    return UnableToHelpMetric(indicators)


def _build_similarity(config: Any, settings: Settings) -> BaseMetric:
    if config is None:
        return ResponseSimilarityMetric(HashedBagOfWordsEmbedder())
    config = _require(config, "similarity")
    kind = config.get("embedder", "hashed")
    dimension = int(config.get("dimension", 64))
    if kind == "hashed":
        return ResponseSimilarityMetric(HashedBagOfWordsEmbedder(dimension))
    if kind == "http":
        if not config.get("endpoint") or not config.get("model"):
            raise ValueError("HTTP embedder requires 'endpoint' and 'model'")
        embedder = HttpEmbedder(
            endpoint=config["endpoint"],
            model=config["model"],
            dimension=dimension,
            timeout=settings.http.timeout_seconds,
        )
        return ResponseSimilarityMetric(embedder)
    raise ValueError(f"Unknown embedder {kind!r}. Valid values: hashed, http")


def _build_bleu(config: Any, settings: Settings) -> BaseMetric:
    if config is None:
        return BleuMetric()
    return BleuMetric(max_n=int(_require(config, "bleu").get("max_n", 4)))


def _judge_builder(metric_type: type) -> MetricBuilder:
    def build(config: Any, settings: Settings) -> BaseMetric:
        config = _require(config, metric_type.name)
        if not isinstance(config.get("model_id"), str):
            raise ValueError(f"Judge metric {metric_type.name!r} requires 'model_id'")
        spec = ProviderSpec.from_dict(config.get("provider"), config.get("scripted_rules"))
        return metric_type(build_provider(spec, settings), config["model_id"])

    return build


METRICS: dict[str, MetricBuilder] = {
    "latency": _no_config(LatencyMetric),
    "tokens": _no_config(TokensMetric),
    "cost": _build_cost,
    "hops": _no_config(HopsMetric),
    "no_tool": _no_config(NoToolMetric),
    "correct_tool": _no_config(CorrectToolMetric),
    "unable_to_help": _build_unable_to_help,
    "keyword": _build_keyword,
    "similarity": _build_similarity,
    "bleu": _build_bleu,
    "conciseness": _judge_builder(ConcisenessJudgeMetric),
    "expectation": _judge_builder(ExpectationJudgeMetric),
}


def _load_config(path_text: str, base_dir: Path) -> Any:
    path = Path(path_text)
    if not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise FileNotFoundError(f"Metric config file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"Invalid JSON in {path}: line {e.lineno}: {e.msg}") from None


def build_metric(entry: str, settings: Settings | None = None, base_dir: Path | None = None):
    """Build one metric from `name` or `name:config.json`.

    Relative config paths are resolved against `base_dir` (default: cwd).
    """
    settings = settings or Settings()
    name, sep, path_text = entry.strip().partition(":")
    builder = METRICS.get(name)
    if builder is None:
        raise UnknownMetricError(
            f"Unknown metric {name!r}. Known metrics: {', '.join(METRICS)}"
        )
    config = _load_config(path_text, base_dir or Path.cwd()) if sep else None
    try:
        return builder(config, settings)
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"Invalid configuration for metric {name!r}: {e}") from None


def build_metrics(
    spec: str | list[str] | tuple[str, ...],
    settings: Settings | None = None,
    base_dir: Path | None = None,
) -> list[BaseMetric]:
    """Build the metrics named by a comma-separated spec (or a list of entries)."""
    entries = spec.split(",") if isinstance(spec, str) else list(spec)
    entries = [entry for entry in entries if entry.strip()]
    if not entries:
        raise ValueError("No metrics selected")
    return [build_metric(entry, settings, base_dir) for entry in entries]
