"""UI constants shared by the terminal tables and the HTML report."""

import math

# Decimal places of means in the summary table
MEAN_DECIMALS = 4

PASS_LABEL = "PASS"
FAIL_LABEL = "FAIL"

# Shown in the overview for a (case, permutation) cell without conversations
MISSING_CELL = "-"

# Step latency thresholds in milliseconds for color coding
LATENCY_FAST_MAX = 1000.0  # Below this: fast
LATENCY_MEDIUM_MAX = 5000.0  # Below this: medium
# Above LATENCY_MEDIUM_MAX: slow

if not (0 < LATENCY_FAST_MAX < LATENCY_MEDIUM_MAX):
    raise ValueError(
        "Latency thresholds must be strictly increasing: "
        f"0 < {LATENCY_FAST_MAX} < {LATENCY_MEDIUM_MAX}"
    )


def get_latency_class(latency_ms: float) -> str:
    """Get the report CSS class for a step latency.

    Args:
        latency_ms: Latency in milliseconds

    Returns:
        One of "fast", "medium", "slow"
    """
    if latency_ms < LATENCY_FAST_MAX:
        return "fast"
    elif latency_ms < LATENCY_MEDIUM_MAX:
        return "medium"
    else:
        return "slow"


def get_status_style(passed: bool) -> str:
    """Rich style for a pass/fail status."""
    return "green" if passed else "red"


def format_value(value: float) -> str:
    """Whole numbers print without decimals, others with MEAN_DECIMALS places."""
    value = float(value)
    if math.isfinite(value) and value.is_integer():
        return str(int(value))
    return f"{value:.{MEAN_DECIMALS}f}"
