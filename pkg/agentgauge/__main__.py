"""Entry point for running agentgauge as a module (python -m agentgauge)."""

from agentgauge.cli import app

if __name__ == "__main__":
    app()
