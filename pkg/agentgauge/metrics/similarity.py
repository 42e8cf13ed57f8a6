"""Embedding based response similarity."""

import re
from abc import ABC, abstractmethod
from collections.abc import Sequence

import aiohttp
import numpy as np

from agentgauge.metrics.base import BaseMetric
from agentgauge.models import Case, Conversation, Measurement, Unit

FNV_OFFSET_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_UINT64_MASK = 0xFFFFFFFFFFFFFFFF

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


class UndefinedSimilarityError(ValueError):
    """Raised when cosine similarity is undefined (zero vector)."""


def cosine_similarity(u: Sequence[float] | np.ndarray, v: Sequence[float] | np.ndarray) -> float:
    """Cosine of the angle between two vectors, within [-1, 1].

    Raises:
        ValueError: If the dimensions differ
        UndefinedSimilarityError: If either vector is all zeros
    """
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"Vector dimensions differ: {a.shape} vs {b.shape}")

    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0 or norm_b == 0:
        raise UndefinedSimilarityError("Cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))


class Embedder(ABC):
    """Maps text to a fixed-dimension vector."""

    dimension: int

    @abstractmethod
    async def embed(self, text: str) -> np.ndarray:
        """Embed one text into a vector of length `dimension`."""


def fnv1a_64(data: bytes) -> int:
    value = FNV_OFFSET_BASIS
    for byte in data:
        value ^= byte
        value = (value * FNV_PRIME) & _UINT64_MASK
    return value


class HashedBagOfWordsEmbedder(Embedder):
    """Deterministic bag-of-words embedder for tests and offline runs.

    Lowercases, splits on non-alphanumerics and adds 1 to the dimension
    `fnv1a_64(token) % dimension` for every token.
    """

    def __init__(self, dimension: int = 64):
        if dimension < 1:
            raise ValueError(f"dimension must be positive, got {dimension}")
        self.dimension = dimension

    def tokenize(self, text: str) -> list[str]:
        return [token for token in _TOKEN_SPLIT.split(text.lower()) if token]

    async def embed(self, text: str) -> np.ndarray:
        vector = np.zeros(self.dimension, dtype=np.float64)
        for token in self.tokenize(text):
            vector[fnv1a_64(token.encode("utf-8")) % self.dimension] += 1
        return vector


class HttpEmbedder(Embedder):
    """Embedder calling an embeddings endpoint.

    Request body: `{model, input}`; reply body: `{embedding: [float, ...]}`.
    """

    def __init__(self, endpoint: str, model: str, dimension: int, timeout: float = 30.0):
        self.endpoint = endpoint
        self.model = model
        self.dimension = dimension
        self.timeout = timeout

    async def embed(self, text: str) -> np.ndarray:
        try:
            timeout = aiohttp.ClientTimeout(total=self.timeout)
            async with aiohttp.ClientSession(timeout=timeout) as session:
                body = {"model": self.model, "input": text}
                async with session.post(self.endpoint, json=body) as response:
                    response.raise_for_status()
                    payload = await response.json(content_type=None)
        except aiohttp.ClientError as e:
            raise RuntimeError(f"Embedding request failed: {e}") from e
        except TimeoutError as e:
            raise RuntimeError(f"Embedding request timeout (>{self.timeout}s)") from e

        try:
            vector = np.asarray(payload["embedding"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as e:
            raise RuntimeError(f"Malformed embedding reply: {e}") from e
        if vector.shape != (self.dimension,):
            raise RuntimeError(
                f"Embedding has {vector.size} dimensions, expected {self.dimension}"
            )
        return vector


class ResponseSimilarityMetric(BaseMetric):
    """Similarity of each turn's reply to the closest acceptable response."""

    name = "AgentResponseSimilarity"
    unit = Unit.SCORE

    def __init__(self, embedder: Embedder | None = None):
        self.embedder = embedder or HashedBagOfWordsEmbedder()

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
            if not reply:
                measurements.append(
                    self._error(conversation, "No assistant reply for turn", turn=turn_index)
                )
                continue

            actual = await self.embedder.embed(reply)
            try:
                scores = [
                    cosine_similarity(actual, await self.embedder.embed(acceptable))
                    for acceptable in turn.acceptable_responses
                ]
            except UndefinedSimilarityError as e:
                measurements.append(self._error(conversation, str(e), turn=turn_index))
                continue

            best_index = int(np.argmax(scores))
            measurements.append(
                self._measurement(
                    conversation, scores[best_index], turn=turn_index, best_index=best_index
                )
            )
        return measurements
