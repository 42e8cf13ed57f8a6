"""Tests for the plain-text summary and verdict tables."""

import pytest

from agentgauge.evaluation import AssertionRule, Comparator, assert_thresholds, summarize
from agentgauge.models import Measurement, Unit
from agentgauge.ui.constants import format_value
from agentgauge.ui.table import build_summary_table, build_verdict_table, render_text


def measurements():
    return [
        Measurement("AgentInvokesCorrectTool", value, Unit.COUNT, permutation_id="model_id=a")
        for value in (1, 0, 1)
    ]


class TestSummaryTable:
    """Test the summary table text."""

    def test_mean_formatting(self):
        """Test four-decimal means and integral min/max."""
        text = render_text(build_summary_table(summarize(measurements())))
        line = next(line for line in text.splitlines() if "AgentInvokesCorrectTool" in line)
        assert "model_id=a" in line
        assert "0.6667" in line
        assert line.split("|")[4].strip() == "3"

    def test_stable(self):
        """Test that rendering twice gives identical text."""
        first = render_text(build_summary_table(summarize(measurements())))
        assert first == render_text(build_summary_table(summarize(measurements())))
        assert all(line == line.rstrip() for line in first.splitlines())

    def test_no_permutation(self):
        """Test the label for runs without permutations."""
        table = summarize([Measurement("Hops", 2, Unit.COUNT)])
        assert "(none)" in render_text(build_summary_table(table))


class TestVerdictTable:
    """Test the assertion results table."""

    def test_statuses(self):
        """Test that passing and failing rules are labelled."""
        summary = summarize(measurements())
        verdict = assert_thresholds(
            summary,
            [
                AssertionRule("AgentInvokesCorrectTool", threshold=0.5),
                AssertionRule("AgentInvokesCorrectTool", comparator=Comparator.LE, threshold=0.5),
            ],
        )
        text = render_text(build_verdict_table(verdict))
        assert "PASS" in text
        assert "FAIL" in text
        assert "overall mean 0.6667" in text


class TestFormatValue:
    """Test number formatting shared by the tables and the report."""

    @pytest.mark.parametrize(
        ("value", "expected"),
        [
            (0, "0"),
            (3.0, "3"),
            (1_234_567.0, "1234567"),
            (98_765_432_100, "98765432100"),
            (-2_000_000.0, "-2000000"),
            (0.25, "0.2500"),
            (1_234_567.5, "1234567.5000"),
        ],
    )
    def test_format(self, value, expected):
        """Test that whole numbers keep every digit and fractions get four places."""
        assert format_value(value) == expected

    def test_large_totals_in_summary(self):
        """Test that large min/max values are not printed in exponent form."""
        table = summarize(
            [
                Measurement("InputTokens", 1_234_567, Unit.TOKENS),
                Measurement("InputTokens", 2_000_000, Unit.TOKENS),
            ]
        )
        text = render_text(build_summary_table(table))
        assert "1234567" in text
        assert "2000000" in text
        assert "e+" not in text
