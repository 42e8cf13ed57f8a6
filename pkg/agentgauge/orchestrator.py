"""Concurrent execution of cases across parameter permutations."""

import asyncio
import logging
import uuid
from collections.abc import Sequence
from typing import NamedTuple

from agentgauge.agent import AgentConfig, AgentFactory, ConversationFailedError, run_conversation
from agentgauge.models import Case, ParameterGrid, Trace, TraceSet, expand_grid
from agentgauge.sinks import MemorySink, TraceSink

logger = logging.getLogger(__name__)

DEFAULT_MAX_PARALLEL = 4


class BatchFailedError(RuntimeError):
    """Raised when every conversation of a batch failed."""

    def __init__(self, trace_set: TraceSet):
        super().__init__(f"All {len(trace_set)} conversations failed")
        self.trace_set = trace_set


class ConversationJob(NamedTuple):
    """One (permutation, case, run) slot of a batch."""

    permutation_id: str
    config: AgentConfig
    case: Case
    run_index: int


def plan_jobs(
    cases: Sequence[Case],
    base_config: AgentConfig,
    agent_parameters: ParameterGrid | None = None,
    nr_runs_per_case: int = 1,
) -> list[ConversationJob]:
    """Enumerate the batch in (permutation, case, run) order.

    Raises:
        ValueError: On an empty case list, duplicate case keys or bad run count
        InvalidGridError: If the grid cannot be expanded
    """
    if not cases:
        raise ValueError("At least one case is required")
    if nr_runs_per_case < 1:
        raise ValueError(f"nr_runs_per_case must be at least 1, got {nr_runs_per_case}")
    keys = [case.key for case in cases]
    duplicates = sorted({key for key in keys if keys.count(key) > 1})
    if duplicates:
        raise ValueError(f"Duplicate case names: {', '.join(duplicates)}")

    jobs = []
    for permutation in expand_grid(agent_parameters or ParameterGrid()):
        config = base_config.with_parameters(permutation.parameters)
        for case in cases:
            for run_index in range(nr_runs_per_case):
                jobs.append(ConversationJob(permutation.permutation_id, config, case, run_index))
    return jobs


async def generate_traces(
    cases: Sequence[Case],
    agent_factory: AgentFactory,
    base_config: AgentConfig,
    *,
    nr_runs_per_case: int = 1,
    agent_parameters: ParameterGrid | None = None,
    max_parallel: int = DEFAULT_MAX_PARALLEL,
    sink: TraceSink | None = None,
) -> TraceSet:
    """Run every case against every permutation of the agent parameters.

    Conversations that fail are kept with extras["error"] on their last trace.
    The result is ordered by (permutation, case, run) no matter in which
    order conversations complete.

    Args:
        cases: Cases to run; keys must be unique
        agent_factory: Builds a fresh agent for each conversation
        base_config: Config the permuted parameters are applied to
        nr_runs_per_case: Repetitions of every case per permutation
        agent_parameters: Fixed and permuted agent parameters
        max_parallel: Upper bound of conversations in flight
        sink: Receives every trace as it is produced

    Returns:
        TraceSet of all conversations

    Raises:
        BatchFailedError: If every conversation failed
    """
    if max_parallel < 1:
        raise ValueError(f"max_parallel must be at least 1, got {max_parallel}")

    jobs = plan_jobs(cases, base_config, agent_parameters, nr_runs_per_case)
    sink = sink or MemorySink()
    semaphore = asyncio.Semaphore(max_parallel)
    logger.info("Running %d conversations, at most %d in parallel", len(jobs), max_parallel)

    async def run(job: ConversationJob) -> tuple[list[Trace], bool]:
        async with semaphore:
            try:
                traces = await run_conversation(
                    agent_factory,
                    job.config,
                    job.case,
                    conversation_id=uuid.uuid4().hex,
                    permutation_id=job.permutation_id,
                    run_index=job.run_index,
                    sink=sink,
                )
                return traces, True
            except ConversationFailedError as e:
                return e.traces, False

    try:
        results = await asyncio.gather(*(run(job) for job in jobs))
    finally:
        await sink.flush()

    # Conversations are ordered by job, not by the random conversation ids
    trace_sets = [TraceSet.from_traces(traces) for traces, _ in results]
    trace_set = TraceSet(
        conversations=tuple(c for ts in trace_sets for c in ts.conversations),
        cases={case.key: case for case in cases},
    )

    failed = sum(1 for _, ok in results if not ok)
    if failed:
        logger.warning("%d of %d conversations failed", failed, len(results))
    if failed == len(results):
        raise BatchFailedError(trace_set)
    return trace_set
