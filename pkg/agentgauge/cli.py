"""CLI interface for agentgauge.

Exit codes: 0 success, 1 failed run or failed quality gate, 2 usage or
configuration error.
"""

import asyncio
import logging
from collections.abc import Sequence
from enum import Enum
from importlib.metadata import version as get_version
from pathlib import Path
from typing import Annotated

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape

from agentgauge.cases import (
    SUPPORTED_LOCALES,
    LlmCaseGenerator,
    TemplateCaseGenerator,
    cases_for_agent_tools,
    load_cases,
    save_cases,
)
from agentgauge.config import (
    AgentFile,
    Settings,
    build_provider,
    check_agent_parameters,
    create_default_settings,
    get_default_settings_path,
    load_agent_file,
    load_assertion_rules,
    load_badge_rules,
    load_monitor_rules,
    load_parameter_grid,
    parse_listen_address,
)
from agentgauge.evaluation import MeasurementSet, assert_thresholds, evaluate_traces
from agentgauge.metrics.registry import build_metrics
from agentgauge.models import Case, ParameterGrid, TraceSet
from agentgauge.monitor import AlarmNotifier, Monitor, MonitorServer
from agentgauge.orchestrator import BatchFailedError, generate_traces
from agentgauge.sinks import HttpSink, load_traces, save_traces
from agentgauge.ui.report import write_report
from agentgauge.ui.table import build_summary_table, build_verdict_table, render_text

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

app = typer.Typer(
    name="agentgauge",
    help="Evaluation, CI gating and monitoring harness for LLM agents",
    add_completion=False,
    no_args_is_help=True,
    rich_markup_mode=None,
    pretty_exceptions_enable=False,
)

console = Console()
err_console = Console(stderr=True)

# Errors caused by bad input files or flags
CONFIG_ERRORS = (FileNotFoundError, IsADirectoryError, PermissionError, ValueError)


class OutputFormat(str, Enum):
    TABLE = "table"
    CSV = "csv"
    JSON = "json"


def _fail(message: str, code: int = EXIT_USAGE) -> typer.Exit:
    err_console.print(f"Error: {message}", style="red", markup=False, highlight=False)
    return typer.Exit(code)


def _settings(ctx: typer.Context) -> Settings:
    return ctx.obj if isinstance(ctx.obj, Settings) else Settings()


@app.callback()
def main(
    ctx: typer.Context,
    settings: Annotated[
        Path | None,
        typer.Option(
            "--settings",
            "-s",
            help="Path to settings file (default: ~/.config/agentgauge/settings.toml)",
            dir_okay=False,
        ),
    ] = None,
    verbose: Annotated[
        bool,
        typer.Option("--verbose", "-v", help="Log debug details to standard error"),
    ] = False,
):
    """Evaluate LLM agents against cases, gate CI on metrics and monitor deployments."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )

    # init must work even when the settings file is broken
    if ctx.invoked_subcommand == "init":
        return

    try:
        ctx.obj = Settings.load(settings)
    except CONFIG_ERRORS as e:
        raise _fail(f"Cannot load settings: {e}") from None


@app.command()
def run(
    ctx: typer.Context,
    cases: Annotated[Path, typer.Option("--cases", help="Cases JSON file", dir_okay=False)],
    agent_config: Annotated[
        Path, typer.Option("--agent-config", help="Agent configuration JSON file", dir_okay=False)
    ],
    out: Annotated[Path, typer.Option("--out", help="Output traces JSONL file", dir_okay=False)],
    params: Annotated[
        Path | None,
        typer.Option("--params", help="Parameter grid JSON file", dir_okay=False),
    ] = None,
    runs: Annotated[
        int | None, typer.Option("--runs", help="Runs per case and permutation", min=1)
    ] = None,
    max_parallel: Annotated[
        int | None, typer.Option("--max-parallel", help="Conversations in flight", min=1)
    ] = None,
    forward_url: Annotated[
        str | None,
        typer.Option("--forward-url", help="Also POST every trace to this collector URL"),
    ] = None,
):
    """Run every case against every parameter permutation and write the traces."""
    settings = _settings(ctx)
    try:
        case_list = load_cases(cases)
        agent_file = load_agent_file(agent_config)
        grid = load_parameter_grid(params) if params else ParameterGrid()
        check_agent_parameters(grid)
    except CONFIG_ERRORS as e:
        raise _fail(str(e)) from None

    try:
        trace_set = asyncio.run(
            _run_batch(
                settings,
                agent_file,
                case_list,
                grid,
                runs or settings.run.runs_per_case,
                max_parallel or settings.run.max_parallel,
                forward_url,
            )
        )
        exit_code = EXIT_OK
    except BatchFailedError as e:
        trace_set = e.trace_set
        exit_code = EXIT_FAILED
        err_console.print(str(e), style="red", markup=False, highlight=False)
    except ValueError as e:
        raise _fail(str(e)) from None

    try:
        save_traces(trace_set, out)
    except OSError as e:
        raise _fail(f"Cannot write traces: {e}") from None

    failed = sum(1 for conversation in trace_set if conversation.failed)
    console.print(
        f"Wrote {len(trace_set)} conversations ({failed} failed) to {out}",
        markup=False,
        highlight=False,
    )
    raise typer.Exit(exit_code)


async def _run_batch(
    settings: Settings,
    agent_file: AgentFile,
    case_list: Sequence[Case],
    grid: ParameterGrid,
    runs: int,
    max_parallel: int,
    forward_url: str | None,
) -> TraceSet:
    provider = build_provider(agent_file.provider, settings)
    sink = None
    if forward_url:
        sink = HttpSink(
            forward_url,
            timeout=settings.http.timeout_seconds,
            retries=settings.http.retries,
            backoff_base_seconds=settings.http.backoff_base_seconds,
        )
    try:
        return await generate_traces(
            case_list,
            agent_file.agent_factory(provider),
            agent_file.config,
            nr_runs_per_case=runs,
            agent_parameters=grid,
            max_parallel=max_parallel,
            sink=sink,
        )
    finally:
        await provider.close()
        if sink is not None:
            await sink.close()


@app.command("eval")
def eval_cmd(
    ctx: typer.Context,
    traces: Annotated[Path, typer.Option("--traces", help="Traces JSONL file", dir_okay=False)],
    metrics: Annotated[
        str,
        typer.Option(
            "--metrics",
            help="Comma-separated metrics, each 'name' or 'name:config.json' "
            "(e.g. latency,hops,cost:pricing.json)",
        ),
    ],
    out: Annotated[
        Path, typer.Option("--out", help="Output measurements JSONL file", dir_okay=False)
    ],
    cases: Annotated[
        Path | None,
        typer.Option("--cases", help="Cases JSON file for case-aware metrics", dir_okay=False),
    ] = None,
):
    """Apply metrics to every conversation of a trace file."""
    settings = _settings(ctx)
    try:
        metric_list = build_metrics(metrics, settings)
        case_map = {case.key: case for case in load_cases(cases)} if cases else None
        if not traces.exists():
            raise FileNotFoundError(f"Traces file not found: {traces}")
        trace_set = load_traces(traces, case_map)
    except CONFIG_ERRORS as e:
        raise _fail(str(e)) from None

    measurements = asyncio.run(evaluate_traces(trace_set, metric_list))
    try:
        measurements.save(out)
    except OSError as e:
        raise _fail(f"Cannot write measurements: {e}") from None

    errors = sum(1 for m in measurements if m.is_error)
    console.print(
        f"Wrote {len(measurements)} measurements ({errors} errors) "
        f"for {len(trace_set)} conversations to {out}",
        highlight=False,
        markup=False,
    )


def _load_measurements(path: Path) -> MeasurementSet:
    if not path.exists():
        raise FileNotFoundError(f"Measurements file not found: {path}")
    return MeasurementSet.load(path)


@app.command()
def summary(
    measurements: Annotated[
        Path, typer.Option("--measurements", help="Measurements JSONL file", dir_okay=False)
    ],
    output_format: Annotated[
        OutputFormat, typer.Option("--format", help="Output format")
    ] = OutputFormat.TABLE,
):
    """Print per-permutation metric averages."""
    try:
        table = _load_measurements(measurements).summary()
    except CONFIG_ERRORS as e:
        raise _fail(str(e)) from None

    if output_format == OutputFormat.CSV:
        typer.echo(table.to_csv(), nl=False)
    elif output_format == OutputFormat.JSON:
        typer.echo(table.to_json())
    else:
        typer.echo(render_text(build_summary_table(table)), nl=False)


@app.command("assert")
def assert_cmd(
    measurements: Annotated[
        Path, typer.Option("--measurements", help="Measurements JSONL file", dir_okay=False)
    ],
    rules: Annotated[Path, typer.Option("--rules", help="Assertion rules TOML", dir_okay=False)],
):
    """Check metric averages against thresholds; exit 1 when a rule fails."""
    try:
        table = _load_measurements(measurements).summary()
        rule_list = load_assertion_rules(rules)
    except CONFIG_ERRORS as e:
        raise _fail(str(e)) from None

    verdict = assert_thresholds(table, rule_list)
    typer.echo(render_text(build_verdict_table(verdict)), nl=False)

    if not verdict.passed:
        for failure in verdict.failures:
            for permutation, mean in failure.offending:
                typer.echo(
                    f"FAIL {failure.rule.describe()}: permutation "
                    f"{permutation or '(none)'} has mean {mean:.4f}"
                )
        typer.echo(f"{len(verdict.failures)} of {len(verdict.results)} rules failed")
        raise typer.Exit(EXIT_FAILED)
    typer.echo(f"All {len(verdict.results)} rules passed")


@app.command()
def report(
    traces: Annotated[Path, typer.Option("--traces", help="Traces JSONL file", dir_okay=False)],
    measurements: Annotated[
        Path, typer.Option("--measurements", help="Measurements JSONL file", dir_okay=False)
    ],
    out: Annotated[Path, typer.Option("--out", help="Output HTML file", dir_okay=False)],
    badge_rules: Annotated[
        Path | None,
        typer.Option("--badge-rules", help="Badge rules TOML", dir_okay=False),
    ] = None,
):
    """Write a self-contained HTML report of traces and measurements."""
    try:
        if not traces.exists():
            raise FileNotFoundError(f"Traces file not found: {traces}")
        trace_set = load_traces(traces)
        measurement_set = _load_measurements(measurements)
        rules = load_badge_rules(badge_rules) if badge_rules else None
    except CONFIG_ERRORS as e:
        raise _fail(str(e)) from None

    try:
        write_report(out, trace_set, measurement_set, rules)
    except OSError as e:
        raise _fail(f"Cannot write report: {e}") from None
    console.print(
        f"Wrote report for {len(trace_set)} conversations to {out}", markup=False, highlight=False
    )


@app.command()
def monitor(
    ctx: typer.Context,
    rules: Annotated[Path, typer.Option("--rules", help="Monitor rules TOML", dir_okay=False)],
    listen: Annotated[
        str | None, typer.Option("--listen", help="Listen address host:port")
    ] = None,
    webhook: Annotated[
        str | None, typer.Option("--webhook", help="URL receiving alarm events")
    ] = None,
):
    """Collect traces over HTTP, evaluate completed conversations and raise alarms."""
    settings = _settings(ctx)
    try:
        host, port = parse_listen_address(listen or settings.monitor.listen)
        monitor_rules = load_monitor_rules(rules)
        metric_list = build_metrics(list(monitor_rules.metrics), settings, rules.parent)
    except CONFIG_ERRORS as e:
        raise _fail(str(e)) from None

    server = MonitorServer(
        Monitor(metric_list, monitor_rules.alarms),
        AlarmNotifier(webhook, timeout=settings.http.timeout_seconds),
        completion_timeout_seconds=settings.monitor.completion_timeout_seconds,
        sweep_interval_seconds=settings.monitor.sweep_interval_seconds,
    )
    console.print(
        f"Monitoring traces on http://{host}:{port}/traces", markup=False, highlight=False
    )
    try:
        asyncio.run(server.serve(host, port))
    except KeyboardInterrupt:
        console.print("\n[yellow]Stopped by user[/yellow]")
    except OSError as e:
        raise _fail(f"Cannot listen on {host}:{port}: {e}") from None


@app.command("generate-cases")
def generate_cases(
    ctx: typer.Context,
    agent_config: Annotated[
        Path, typer.Option("--agent-config", help="Agent configuration JSON file", dir_okay=False)
    ],
    out: Annotated[Path, typer.Option("--out", help="Output cases JSON file", dir_okay=False)],
    languages: Annotated[
        str,
        typer.Option(
            "--languages", help=f"Comma-separated locales ({', '.join(SUPPORTED_LOCALES)})"
        ),
    ] = "en_US",
    model_id: Annotated[
        str | None,
        typer.Option("--model-id", help="Phrase inputs with this model instead of templates"),
    ] = None,
):
    """Generate one tool-use case per agent tool and language."""
    settings = _settings(ctx)
    locales = [locale.strip() for locale in languages.split(",") if locale.strip()]
    try:
        agent_file = load_agent_file(agent_config)
        cases = asyncio.run(_generate_cases(settings, agent_file, locales, model_id))
        save_cases(cases, out)
    except CONFIG_ERRORS as e:
        raise _fail(str(e)) from None
    except OSError as e:
        raise _fail(f"Cannot write cases: {e}") from None
    console.print(f"Wrote {len(cases)} cases to {out}", markup=False, highlight=False)


async def _generate_cases(
    settings: Settings, agent_file: AgentFile, locales: list[str], model_id: str | None
):
    if model_id is None:
        return await cases_for_agent_tools(
            agent_file.config.tools, locales, TemplateCaseGenerator()
        )
    provider = build_provider(agent_file.provider, settings)
    try:
        generator = LlmCaseGenerator(provider, model_id)
        return await cases_for_agent_tools(agent_file.config.tools, locales, generator)
    finally:
        await provider.close()


@app.command()
def init(
    settings: Annotated[
        Path | None,
        typer.Option("--settings", "-s", help="Path for settings file", dir_okay=False),
    ] = None,
    force: Annotated[
        bool,
        typer.Option("--force", "-f", help="Overwrite existing settings file"),
    ] = False,
):
    """Create a default settings file."""
    if settings is None:
        settings = get_default_settings_path()

    if settings.exists() and not force:
        err_console.print(
            f"[yellow]Settings file already exists: {escape(str(settings))}[/yellow]\n"
            "Use --force to overwrite"
        )
        raise typer.Exit(EXIT_FAILED)

    try:
        created_path = create_default_settings(settings)
    except OSError as e:
        raise _fail(f"Cannot create settings: {e}") from None
    console.print(f"[green]✓[/green] Created settings file: {escape(str(created_path))}")


@app.command()
def version():
    """Show version information."""
    try:
        pkg_version = get_version("agentgauge")
    except Exception:
        pkg_version = "unknown"
    console.print(f"agentgauge version {pkg_version}")


if __name__ == "__main__":
    app()
