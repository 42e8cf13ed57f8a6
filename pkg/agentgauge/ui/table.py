"""Plain-text tables for the summary and assertion results."""

import io

from rich import box
from rich.console import Console
from rich.table import Table
from rich.text import Text

from agentgauge.evaluation import SummaryTable, Verdict
from agentgauge.ui.constants import (
    FAIL_LABEL,
    MEAN_DECIMALS,
    PASS_LABEL,
    format_value,
    get_status_style,
)

# Wide enough that rich never wraps or truncates a cell
_RENDER_WIDTH = 1000


def build_summary_table(summary: SummaryTable) -> Table:
    """Fixed-width summary: permutation | metric | mean | count | min | max | unit."""
    table = Table(box=box.ASCII, show_edge=True, padding=(0, 1))
    table.add_column("permutation", no_wrap=True)
    table.add_column("metric", no_wrap=True)
    table.add_column("mean", justify="right", no_wrap=True)
    table.add_column("count", justify="right", no_wrap=True)
    table.add_column("min", justify="right", no_wrap=True)
    table.add_column("max", justify="right", no_wrap=True)
    table.add_column("unit", no_wrap=True)

    for row in summary:
        table.add_row(
            Text(row.permutation_id or "(none)"),
            Text(row.metric),
            f"{row.mean:.{MEAN_DECIMALS}f}",
            str(row.count),
            format_value(row.min),
            format_value(row.max),
            row.unit.value,
        )
    return table


def build_verdict_table(verdict: Verdict) -> Table:
    """One line per assertion rule with its status and failure reason."""
    table = Table(box=box.ASCII, show_edge=True, padding=(0, 1))
    table.add_column("rule", no_wrap=True)
    table.add_column("status", no_wrap=True)
    table.add_column("detail", no_wrap=True)

    for result in verdict.results:
        label = PASS_LABEL if result.passed else FAIL_LABEL
        detail = result.reason
        if result.passed and result.value is not None:
            detail = f"overall mean {result.value:.{MEAN_DECIMALS}f}"
        table.add_row(
            Text(result.rule.describe()),
            Text(label, style=get_status_style(result.passed)),
            Text(detail),
        )
    return table


def render_text(table: Table) -> str:
    """Render a table to plain text, identical for identical input."""
    buffer = io.StringIO()
    console = Console(
        file=buffer,
        width=_RENDER_WIDTH,
        color_system=None,
        force_terminal=False,
        legacy_windows=False,
    )
    console.print(table)
    return "\n".join(line.rstrip() for line in buffer.getvalue().splitlines()) + "\n"
