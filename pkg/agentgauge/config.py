"""Configuration management for agentgauge."""

import json
import os
import sys
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from agentgauge.agent import Agent, AgentConfig, StaticTool
from agentgauge.evaluation import AssertionRule
from agentgauge.models import ParameterGrid, ToolSpec
from agentgauge.monitor import AlarmRule
from agentgauge.providers.base import BaseProvider
from agentgauge.providers.http import HTTPProvider
from agentgauge.providers.scripted import ScriptedProvider, ScriptedRule
from agentgauge.ui.report import BadgeRules

# Parameters the file-configured agent understands; other keys are rejected
AGENT_PARAMETERS = ("system_prompt", "model_id", "temperature", "max_hops", "tools")


@dataclass
class RunSettings:
    """Batch execution configuration."""

    max_parallel: int = 4
    runs_per_case: int = 1


@dataclass
class HttpSettings:
    """HTTP provider configuration."""

    timeout_seconds: float = 30.0
    retries: int = 3
    backoff_base_seconds: float = 0.2
    auth_env: str = "AGENTGAUGE_AUTH_HEADER"  # environment variable holding the auth header value


@dataclass
class MonitorSettings:
    """Monitor server configuration."""

    listen: str = "127.0.0.1:8787"
    completion_timeout_seconds: float = 30.0
    sweep_interval_seconds: float = 1.0


@dataclass
class Settings:
    """Application settings for agentgauge."""

    run: RunSettings = field(default_factory=RunSettings)
    http: HttpSettings = field(default_factory=HttpSettings)
    monitor: MonitorSettings = field(default_factory=MonitorSettings)

    @staticmethod
    def load(settings_path: Path | None = None) -> "Settings":
        """Load settings from TOML.

        Without an explicit path the default file is used if it exists,
        otherwise all defaults apply. An explicit path must exist.
        """
        if settings_path is None:
            settings_path = get_default_settings_path()
            if not settings_path.exists():
                return Settings()

        if not settings_path.exists():
            raise FileNotFoundError(
                f"Settings file not found: {settings_path}\n"
                f"Run 'agentgauge init' to create a default settings file."
            )

        with settings_path.open("rb") as f:
            try:
                data = tomllib.load(f)
            except tomllib.TOMLDecodeError as e:
                raise ValueError(f"Invalid TOML in {settings_path}: {e}") from None

        run_data = data.get("run", {})
        run = RunSettings(
            max_parallel=int(run_data.get("max_parallel", 4)),
            runs_per_case=int(run_data.get("runs_per_case", 1)),
        )
        if run.max_parallel < 1:
            raise ValueError(f"run.max_parallel must be at least 1, got {run.max_parallel}")
        if run.runs_per_case < 1:
            raise ValueError(f"run.runs_per_case must be at least 1, got {run.runs_per_case}")

        http_data = data.get("http", {})
        http = HttpSettings(
            timeout_seconds=float(http_data.get("timeout_seconds", 30.0)),
            retries=int(http_data.get("retries", 3)),
            backoff_base_seconds=float(http_data.get("backoff_base_seconds", 0.2)),
            auth_env=str(http_data.get("auth_env", "AGENTGAUGE_AUTH_HEADER")),
        )
        if http.retries < 0:
            raise ValueError(f"http.retries must be non-negative, got {http.retries}")

        monitor_data = data.get("monitor", {})
        monitor = MonitorSettings(
            listen=str(monitor_data.get("listen", "127.0.0.1:8787")),
            completion_timeout_seconds=float(
                monitor_data.get("completion_timeout_seconds", 30.0)
            ),
            sweep_interval_seconds=float(monitor_data.get("sweep_interval_seconds", 1.0)),
        )
        parse_listen_address(monitor.listen)

        return Settings(run=run, http=http, monitor=monitor)


def get_default_settings_path() -> Path:
    """Get the default settings file path."""
    return Path.home() / ".config" / "agentgauge" / "settings.toml"


def create_default_settings(settings_path: Path | None = None) -> Path:
    """Create a default settings file."""
    if settings_path is None:
        settings_path = get_default_settings_path()

    settings_path.parent.mkdir(parents=True, exist_ok=True)

    default_settings = """# agentgauge settings
# Command-line flags override these values.

[run]
# Conversations running at the same time
max_parallel = 4

# How often every case is repeated per permutation
runs_per_case = 1

[http]
# Timeout of a single provider request (in seconds)
timeout_seconds = 30.0

# Retries of transport failures and HTTP 408/429/5xx responses
retries = 3

# First retry delay (in seconds), doubled on every further retry
backoff_base_seconds = 0.2

# Environment variable holding the value of the provider auth header
auth_env = "AGENTGAUGE_AUTH_HEADER"

[monitor]
# Address the monitor listens on for traces
listen = "127.0.0.1:8787"

# A conversation is complete once no trace arrived for this long (in seconds)
completion_timeout_seconds = 30.0

# How often idle conversations are checked (in seconds)
sweep_interval_seconds = 1.0
"""

    settings_path.write_text(default_settings)
    return settings_path


def parse_listen_address(listen: str) -> tuple[str, int]:
    """Split "host:port" (IPv6 hosts in brackets)."""
    host, sep, port_text = listen.rpartition(":")
    if not sep or not host:
        raise ValueError(f"Listen address must be 'host:port', got: {listen}")
    if host.startswith("[") and host.endswith("]"):
        host = host[1:-1]
    try:
        port = int(port_text)
    except ValueError:
        raise ValueError(f"Invalid port in listen address: {listen}") from None
    if not 0 <= port <= 65535:
        raise ValueError(f"Port must be between 0 and 65535, got: {port}")
    return host, port


def _read_json(path: Path, what: str) -> Any:
    if not path.exists():
        raise FileNotFoundError(f"{what} file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"Invalid JSON in {path}: line {e.lineno}: {e.msg}") from None


def _read_toml(path: Path, what: str) -> dict[str, Any]:
    if not path.exists():
        raise FileNotFoundError(f"{what} file not found: {path}")
    with path.open("rb") as f:
        try:
            return tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ValueError(f"Invalid TOML in {path}: {e}") from None


class ProviderKind(str, Enum):
    SCRIPTED = "scripted"
    HTTP = "http"


@dataclass(frozen=True)
class ProviderSpec:
    """Which provider an agent or judge talks to."""

    kind: ProviderKind
    endpoint: str | None = None
    auth_header_name: str = "Authorization"
    scripted_rules: tuple[ScriptedRule, ...] = ()

    def __post_init__(self):
        if self.kind == ProviderKind.HTTP and not self.endpoint:
            raise ValueError("HTTP provider requires an 'endpoint'")

    @staticmethod
    def from_dict(data: Any, scripted_rules: Any = None) -> "ProviderSpec":
        """Parse `{kind, endpoint?, auth_header_name?}` plus the scripted rule list."""
        if not isinstance(data, dict):
            raise ValueError("'provider' must be an object with a 'kind' field")
        try:
            kind = ProviderKind(str(data.get("kind", "")).lower())
        except ValueError:
            valid = ", ".join(k.value for k in ProviderKind)
            raise ValueError(
                f"Invalid provider kind {data.get('kind')!r}. Valid values: {valid}"
            ) from None

        rules = ()
        if kind == ProviderKind.SCRIPTED:
            if not isinstance(scripted_rules, list) or not scripted_rules:
                raise ValueError("Scripted provider requires a non-empty 'scripted_rules' list")
            rules = tuple(
                _parse_item(ScriptedRule.from_dict, rule, f"scripted_rules[{i}]")
                for i, rule in enumerate(scripted_rules)
            )

        return ProviderSpec(
            kind=kind,
            endpoint=data.get("endpoint"),
            auth_header_name=str(data.get("auth_header_name", "Authorization")),
            scripted_rules=rules,
        )


def _parse_item(parse, data: Any, where: str):
    if not isinstance(data, dict):
        raise ValueError(f"{where}: expected an object")
    try:
        return parse(data)
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"{where}: {e}") from None


def build_provider(spec: ProviderSpec, settings: Settings | None = None) -> BaseProvider:
    """Instantiate the provider described by `spec`."""
    settings = settings or Settings()
    if spec.kind == ProviderKind.SCRIPTED:
        return ScriptedProvider(spec.scripted_rules)

    auth_value = os.environ.get(settings.http.auth_env)
    return HTTPProvider(
        endpoint=spec.endpoint or "",
        timeout=settings.http.timeout_seconds,
        auth_header=(spec.auth_header_name, auth_value) if auth_value else None,
        retries=settings.http.retries,
        backoff_base_seconds=settings.http.backoff_base_seconds,
    )


@dataclass
class AgentFile:
    """Agent configuration file: base config, provider and static tools."""

    config: AgentConfig
    provider: ProviderSpec
    tools: dict[str, StaticTool] = field(default_factory=dict)

    def agent_factory(self, provider: BaseProvider):
        """Factory building a fresh agent per conversation, sharing the provider."""

        def factory(config: AgentConfig) -> Agent:
            if config.parameters:
                unknown = ", ".join(sorted(config.parameters))
                raise ValueError(f"Unsupported agent parameters: {unknown}")
            tools = {tool.name: self.tools[tool.name] for tool in config.tools}
            return Agent(config, provider, tools)

        return factory


def load_agent_file(path: Path) -> AgentFile:
    """Load an agent configuration JSON file.

    Format: `{provider: {kind, endpoint?, auth_header_name?}, system_prompt,
    model_id, temperature?, max_hops?, tools?: [...], scripted_rules?: [...]}`.
    Tool entries are tool specs plus optional `result` template or `error`.
    """
    data = _read_json(path, "Agent config")
    if not isinstance(data, dict):
        raise ValueError(f"Agent config {path} must contain a JSON object")

    try:
        provider = ProviderSpec.from_dict(data.get("provider"), data.get("scripted_rules"))

        specs = []
        tools = {}
        for i, tool_data in enumerate(data.get("tools") or []):
            spec = _parse_item(ToolSpec.from_dict, tool_data, f"tools[{i}]")
            specs.append(spec)
            tools[spec.name] = StaticTool(
                result=str(tool_data.get("result", "")),
                error=tool_data.get("error"),
            )

        for required in ("system_prompt", "model_id"):
            if not isinstance(data.get(required), str):
                raise ValueError(f"field {required!r} must be a string")

        config = AgentConfig(
            system_prompt=data["system_prompt"],
            model_id=data["model_id"],
            temperature=float(data.get("temperature", 0.0)),
            max_hops=int(data.get("max_hops", 8)),
            tools=tuple(specs),
        )
    except (TypeError, ValueError) as e:
        raise ValueError(f"Invalid agent config {path}: {e}") from None

    return AgentFile(config=config, provider=provider, tools=tools)


def load_parameter_grid(path: Path) -> ParameterGrid:
    """Load `{fixed: {name: value}, permuted: {name: [values]}}`."""
    data = _read_json(path, "Parameters")
    if not isinstance(data, dict):
        raise ValueError(f"Parameters file {path} must contain a JSON object")

    fixed = data.get("fixed") or {}
    permuted = data.get("permuted") or {}
    if not isinstance(fixed, dict) or not isinstance(permuted, dict):
        raise ValueError(f"Parameters file {path}: 'fixed' and 'permuted' must be objects")
    for name, values in permuted.items():
        if not isinstance(values, list):
            raise ValueError(f"Parameters file {path}: permuted {name!r} must be a list")

    return ParameterGrid(
        fixed={name: _parameter_text(value) for name, value in fixed.items()},
        permuted={
            name: tuple(_parameter_text(value) for value in values)
            for name, values in permuted.items()
        },
    )


def _parameter_text(value: Any) -> str:
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return str(value)


def check_agent_parameters(grid: ParameterGrid) -> None:
    """Reject parameters the file-configured agent cannot apply."""
    unknown = sorted((set(grid.fixed) | set(grid.permuted)) - set(AGENT_PARAMETERS))
    if unknown:
        raise ValueError(
            f"Unsupported agent parameters: {', '.join(unknown)}. "
            f"Supported: {', '.join(AGENT_PARAMETERS)}"
        )


def load_assertion_rules(path: Path) -> list[AssertionRule]:
    """Load `[[assertions]]` tables."""
    data = _read_toml(path, "Rules")
    items = data.get("assertions")
    if not isinstance(items, list) or not items:
        raise ValueError(f"Rules file {path} defines no [[assertions]]")
    return [
        _parse_item(AssertionRule.from_dict, item, f"{path}: assertions[{i}]")
        for i, item in enumerate(items)
    ]


@dataclass(frozen=True)
class MonitorRules:
    """Metric selection and alarm rules for the monitor."""

    metrics: tuple[str, ...]
    alarms: tuple[AlarmRule, ...]


def load_monitor_rules(path: Path) -> MonitorRules:
    """Load `[monitor] metrics = [...]` and `[[alarms]]` tables."""
    data = _read_toml(path, "Monitor rules")
    metrics = data.get("monitor", {}).get("metrics", [])
    if not isinstance(metrics, list) or not all(isinstance(m, str) for m in metrics):
        raise ValueError(f"{path}: monitor.metrics must be a list of metric names")
    if not metrics:
        raise ValueError(f"{path}: monitor.metrics names no metrics")

    items = data.get("alarms") or []
    if not isinstance(items, list):
        raise ValueError(f"{path}: 'alarms' must be an array of tables")
    alarms = tuple(
        _parse_item(AlarmRule.from_dict, item, f"{path}: alarms[{i}]")
        for i, item in enumerate(items)
    )
    return MonitorRules(metrics=tuple(metrics), alarms=alarms)


def load_badge_rules(path: Path) -> BadgeRules:
    """Load `[badge] boolean_metrics = [...], ignore_metrics = [...]`."""
    data = _read_toml(path, "Badge rules").get("badge", {})
    boolean_metrics = data.get("boolean_metrics")
    ignore_metrics = data.get("ignore_metrics", [])
    for key, value in (("boolean_metrics", boolean_metrics), ("ignore_metrics", ignore_metrics)):
        if value is not None and not isinstance(value, list):
            raise ValueError(f"{path}: badge.{key} must be a list")
    return BadgeRules(
        boolean_metrics=tuple(boolean_metrics) if boolean_metrics is not None else None,
        ignore_metrics=tuple(ignore_metrics),
    )
