"""Tests for settings and configuration file loading."""

import json
from pathlib import Path

import pytest

from agentgauge.agent import AgentConfig
from agentgauge.config import (
    ProviderKind,
    ProviderSpec,
    Settings,
    build_provider,
    check_agent_parameters,
    create_default_settings,
    load_agent_file,
    load_assertion_rules,
    load_badge_rules,
    load_monitor_rules,
    load_parameter_grid,
    parse_listen_address,
)
from agentgauge.evaluation import Comparator, Scope
from agentgauge.models import ParameterGrid, expand_grid
from agentgauge.monitor import Aggregation
from agentgauge.providers.http import HTTPProvider
from agentgauge.providers.scripted import ScriptedProvider

DEMO = Path(__file__).parent.parent / "demo"


class TestSettings:
    """Test loading settings from TOML files."""

    def test_load_settings(self, tmp_path):
        """Test loading a settings file with every section."""
        settings_file = tmp_path / "settings.toml"
        settings_file.write_text("""
[run]
max_parallel = 8
runs_per_case = 3

[http]
timeout_seconds = 5.0
retries = 0
auth_env = "MY_TOKEN"

[monitor]
listen = "0.0.0.0:9000"
completion_timeout_seconds = 2.5
""")

        settings = Settings.load(settings_file)
        assert settings.run.max_parallel == 8
        assert settings.run.runs_per_case == 3
        assert settings.http.timeout_seconds == 5.0
        assert settings.http.retries == 0
        assert settings.http.backoff_base_seconds == 0.2
        assert settings.http.auth_env == "MY_TOKEN"
        assert settings.monitor.listen == "0.0.0.0:9000"
        assert settings.monitor.completion_timeout_seconds == 2.5

    def test_missing_sections_use_defaults(self, tmp_path):
        """Test that an empty file gives default settings."""
        settings_file = tmp_path / "settings.toml"
        settings_file.write_text("")
        assert Settings.load(settings_file) == Settings()

    def test_default_path_missing(self, tmp_path, monkeypatch):
        """Test that without a default file all defaults apply."""
        monkeypatch.setattr(
            "agentgauge.config.get_default_settings_path", lambda: tmp_path / "none.toml"
        )
        assert Settings.load() == Settings()

    def test_explicit_path_missing(self, tmp_path):
        """Test that an explicit settings path must exist."""
        with pytest.raises(FileNotFoundError, match="agentgauge init"):
            Settings.load(tmp_path / "missing.toml")

    def test_invalid_toml(self, tmp_path):
        """Test that syntax errors are reported as ValueError."""
        settings_file = tmp_path / "settings.toml"
        settings_file.write_text("[run\nmax_parallel = ")
        with pytest.raises(ValueError, match="Invalid TOML"):
            Settings.load(settings_file)

    @pytest.mark.parametrize(
        "content, message",
        [
            ("[run]\nmax_parallel = 0", "max_parallel"),
            ("[run]\nruns_per_case = 0", "runs_per_case"),
            ("[http]\nretries = -1", "retries"),
            ('[monitor]\nlisten = "localhost"', "host:port"),
        ],
    )
    def test_invalid_values(self, tmp_path, content, message):
        """Test validation of setting values."""
        settings_file = tmp_path / "settings.toml"
        settings_file.write_text(content)
        with pytest.raises(ValueError, match=message):
            Settings.load(settings_file)

    def test_create_default_settings(self, tmp_path):
        """Test that the generated file loads back as the defaults."""
        settings_file = create_default_settings(tmp_path / "nested" / "settings.toml")
        assert settings_file.exists()
        assert "max_parallel = 4" in settings_file.read_text()
        assert Settings.load(settings_file) == Settings()


class TestListenAddress:
    """Test host:port parsing."""

    @pytest.mark.parametrize(
        "listen, expected",
        [
            ("127.0.0.1:8787", ("127.0.0.1", 8787)),
            ("localhost:0", ("localhost", 0)),
            ("[::1]:9000", ("::1", 9000)),
        ],
    )
    def test_valid(self, listen, expected):
        """Test IPv4, hostname and bracketed IPv6 addresses."""
        assert parse_listen_address(listen) == expected

    @pytest.mark.parametrize("listen", ["8787", ":8787", "host:http", "host:70000"])
    def test_invalid(self, listen):
        """Test that malformed addresses are rejected."""
        with pytest.raises(ValueError):
            parse_listen_address(listen)


class TestProviderSpec:
    """Test provider selection."""

    def test_scripted(self):
        """Test that scripted providers need rules."""
        spec = ProviderSpec.from_dict({"kind": "Scripted"}, [{"text": "Hi"}])
        assert spec.kind == ProviderKind.SCRIPTED
        assert isinstance(build_provider(spec), ScriptedProvider)
        with pytest.raises(ValueError, match="scripted_rules"):
            ProviderSpec.from_dict({"kind": "scripted"}, [])

    def test_http_auth_from_environment(self, monkeypatch):
        """Test that the auth header value is read from the configured variable."""
        monkeypatch.setenv("AGENTGAUGE_AUTH_HEADER", "Bearer t0ken")
        spec = ProviderSpec.from_dict(
            {"kind": "http", "endpoint": "http://x/chat", "auth_header_name": "X-Key"}
        )
        provider = build_provider(spec, Settings())
        assert isinstance(provider, HTTPProvider)
        assert provider.auth_header == ("X-Key", "Bearer t0ken")

    @pytest.mark.parametrize(
        "data, message",
        [(None, "kind"), ({"kind": "grpc"}, "Valid values"), ({"kind": "http"}, "endpoint")],
    )
    def test_invalid(self, data, message):
        """Test unknown kinds and missing endpoints."""
        with pytest.raises(ValueError, match=message):
            ProviderSpec.from_dict(data)


class TestAgentFile:
    """Test agent configuration files."""

    def test_demo_agent(self):
        """Test that the bundled demo agent loads."""
        agent_file = load_agent_file(DEMO / "agent.json")
        assert agent_file.provider.kind == ProviderKind.SCRIPTED
        assert [t.name for t in agent_file.config.tools] == list(agent_file.tools)
        assert "get_weather" in agent_file.tools

    def test_factory(self, tmp_path):
        """Test that the factory rejects parameters the agent cannot apply."""
        path = tmp_path / "agent.json"
        path.write_text(
            json.dumps(
                {
                    "provider": {"kind": "scripted"},
                    "scripted_rules": [{"text": "Hello"}],
                    "system_prompt": "You help.",
                    "model_id": "m",
                    "tools": [{"name": "ping", "description": "Pings", "result": "pong"}],
                }
            )
        )
        agent_file = load_agent_file(path)
        factory = agent_file.agent_factory(build_provider(agent_file.provider))
        agent = factory(agent_file.config)
        assert agent.config.model_id == "m"
        with pytest.raises(ValueError, match="style"):
            factory(agent_file.config.with_parameters({"style": "terse"}))

    @pytest.mark.parametrize(
        "data, message",
        [
            ({"provider": {"kind": "http", "endpoint": "http://x"}}, "system_prompt"),
            (
                {
                    "provider": {"kind": "http", "endpoint": "http://x"},
                    "system_prompt": "p",
                    "model_id": "m",
                    "temperature": 3,
                },
                "temperature",
            ),
            ([], "JSON object"),
        ],
    )
    def test_invalid(self, tmp_path, data, message):
        """Test that invalid files name the problem."""
        path = tmp_path / "agent.json"
        path.write_text(json.dumps(data))
        with pytest.raises(ValueError, match=message):
            load_agent_file(path)

    def test_missing(self, tmp_path):
        """Test that a missing file raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            load_agent_file(tmp_path / "agent.json")


class TestParameterGrid:
    """Test parameter grid files."""

    def test_load(self, tmp_path):
        """Test that values are kept as text and lists joined."""
        path = tmp_path / "params.json"
        path.write_text(
            json.dumps(
                {
                    "fixed": {"temperature": 0.5},
                    "permuted": {"model_id": ["a", "b"], "tools": [["x", "y"], ["x"]]},
                }
            )
        )
        grid = load_parameter_grid(path)
        assert grid.fixed == {"temperature": "0.5"}
        assert grid.permuted == {"model_id": ("a", "b"), "tools": ("x,y", "x")}

    def test_permuted_must_be_list(self, tmp_path):
        """Test that a permuted value must list candidates."""
        path = tmp_path / "params.json"
        path.write_text(json.dumps({"permuted": {"model_id": "a"}}))
        with pytest.raises(ValueError, match="model_id"):
            load_parameter_grid(path)

    def test_check_agent_parameters(self):
        """Test that unknown parameter names are rejected."""
        check_agent_parameters(ParameterGrid(fixed={"temperature": "0"}))
        with pytest.raises(ValueError, match="style"):
            check_agent_parameters(ParameterGrid(permuted={"style": ("a", "b")}))

    def test_demo_params_apply(self):
        """Test that every demo permutation applies to the demo agent."""
        grid = load_parameter_grid(DEMO / "params.json")
        check_agent_parameters(grid)
        config = load_agent_file(DEMO / "agent.json").config
        for permutation in expand_grid(grid):
            assert isinstance(config.with_parameters(permutation.parameters), AgentConfig)


class TestRuleFiles:
    """Test assertion, monitor and badge rule files."""

    def test_assertion_rules(self, tmp_path):
        """Test parsing [[assertions]] tables."""
        path = tmp_path / "rules.toml"
        path.write_text("""
[[assertions]]
metric = "AgentInvokesCorrectTool"
threshold = 0.75

[[assertions]]
metric = "Hops"
scope = "per_permutation"
comparator = "<="
threshold = 4
""")
        rules = load_assertion_rules(path)
        assert [r.metric for r in rules] == ["AgentInvokesCorrectTool", "Hops"]
        assert rules[0].scope == Scope.OVERALL
        assert rules[1].comparator == Comparator.LE

    def test_assertion_rules_errors(self, tmp_path):
        """Test empty rule files and bad rules."""
        path = tmp_path / "rules.toml"
        path.write_text("")
        with pytest.raises(ValueError, match="no \\[\\[assertions\\]\\]"):
            load_assertion_rules(path)
        path.write_text('[[assertions]]\nmetric = "Hops"\nthreshold = 1\ncomparator = "=="')
        with pytest.raises(ValueError, match="assertions\\[0\\]"):
            load_assertion_rules(path)

    def test_monitor_rules(self):
        """Test the bundled monitor rules."""
        rules = load_monitor_rules(DEMO / "monitor.toml")
        assert "latency" in rules.metrics
        assert rules.alarms[0].aggregation == Aggregation.COUNT_NONZERO

    def test_monitor_rules_need_metrics(self, tmp_path):
        """Test that a monitor without metrics is rejected."""
        path = tmp_path / "monitor.toml"
        path.write_text("[monitor]\nmetrics = []")
        with pytest.raises(ValueError, match="no metrics"):
            load_monitor_rules(path)

    def test_badge_rules(self, tmp_path):
        """Test badge rules with and without explicit boolean metrics."""
        path = tmp_path / "badge.toml"
        path.write_text('[badge]\nignore_metrics = ["Cost"]')
        rules = load_badge_rules(path)
        assert rules.boolean_metrics is None
        assert rules.ignore_metrics == ("Cost",)

        path.write_text('[badge]\nboolean_metrics = "Hops"')
        with pytest.raises(ValueError, match="boolean_metrics"):
            load_badge_rules(path)
