"""BLEU score against reference responses."""

import math
from collections import Counter
from collections.abc import Sequence

from agentgauge.metrics.base import BaseMetric
from agentgauge.models import Case, Conversation, Measurement, Unit


def _tokenize(text: str) -> list[str]:
    return text.lower().split()


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) + 1 - n))


def modified_precision(
    candidate: Sequence[str], references: Sequence[Sequence[str]], n: int
) -> float:
    """Clipped n-gram precision of the candidate tokens."""
    counts = _ngrams(candidate, n)
    if not counts:
        return 0.0

    max_counts: dict[tuple[str, ...], int] = {}
    for reference in references:
        reference_counts = _ngrams(reference, n)
        for ngram in counts:
            max_counts[ngram] = max(max_counts.get(ngram, 0), reference_counts[ngram])

    clipped = sum(min(count, max_counts[ngram]) for ngram, count in counts.items())
    return clipped / sum(counts.values())


def brevity_penalty(candidate_length: int, reference_lengths: Sequence[int]) -> float:
    """exp(1 - r/c) with r the closest reference length (ties pick the shorter)."""
    r = min(reference_lengths, key=lambda length: (abs(length - candidate_length), length))
    if candidate_length >= r:
        return 1.0
    return math.exp(1 - r / candidate_length)


def bleu(candidate: str, references: Sequence[str], max_n: int = 4) -> float:
    """Unsmoothed BLEU with uniform weights over 1..max_n grams.

    Texts are lowercased and split on whitespace. Returns 0 if any n-gram
    precision is 0 or the candidate or all references are empty.
    """
    candidate_tokens = _tokenize(candidate)
    reference_tokens = [tokens for tokens in map(_tokenize, references) if tokens]
    if not candidate_tokens or not reference_tokens:
        return 0.0

    precisions = [
        modified_precision(candidate_tokens, reference_tokens, n) for n in range(1, max_n + 1)
    ]
    if any(p == 0 for p in precisions):
        return 0.0

    log_mean = math.fsum(math.log(p) for p in precisions) / max_n
    penalty = brevity_penalty(len(candidate_tokens), [len(r) for r in reference_tokens])
    return penalty * math.exp(log_mean)


class BleuMetric(BaseMetric):
    """BLEU of each turn's reply against the turn's acceptable responses."""

    name = "BLEU"
    unit = Unit.SCORE

    def __init__(self, max_n: int = 4):
        if max_n < 1:
            raise ValueError(f"max_n must be at least 1, got {max_n}")
        self.max_n = max_n

    async def evaluate_conversation(
        self, conversation: Conversation, case: Case | None = None
    ) -> list[Measurement]:
        if case is None:
            return [self._error(conversation, "Case unknown, acceptable responses unavailable")]

        replies = conversation.assistant_replies_per_turn()
        measurements = []
        for turn_index, turn in enumerate(case.turns):
            if not turn.acceptable_responses:
                continue
            reply = replies[turn_index] if turn_index < len(replies) else None
            if not reply or not _tokenize(reply):
                measurements.append(
                    self._measurement(
                        conversation, 0, turn=turn_index, degenerate="empty candidate"
                    )
                )
                continue
            score = bleu(reply, turn.acceptable_responses, self.max_n)
            measurements.append(self._measurement(conversation, score, turn=turn_index))
        return measurements
