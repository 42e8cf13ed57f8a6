"""HTTP chat-completion provider adapter."""

import asyncio
import json
import logging
from collections.abc import Sequence
from typing import Any

import aiohttp

from agentgauge.models import Message, ToolSpec
from agentgauge.providers.base import BaseProvider, ModelReply, ProviderError, ToolCall

logger = logging.getLogger(__name__)

RETRIABLE_STATUSES = frozenset({408, 429, 500, 502, 503, 504})


class HTTPProvider(BaseProvider):
    """Provider talking to a JSON chat-completion style endpoint.

    Request body: `{model, system, messages: [{role, text}], temperature, tools}`.
    Reply body: `{text?, tool_calls?: [{name, arguments}], usage: {input_tokens, output_tokens}}`.
    """

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        auth_header: tuple[str, str] | None = None,
        retries: int = 3,
        backoff_base_seconds: float = 0.2,
    ):
        """Initialize HTTP provider.

        Args:
            endpoint: URL receiving the POST requests
            timeout: Request timeout in seconds
            auth_header: Optional (header name, header value) sent with every request
            retries: How often retriable failures are repeated
            backoff_base_seconds: First retry delay, doubled on every further retry
        """
        self.endpoint = endpoint
        self.timeout = timeout
        self.auth_header = auth_header
        self.retries = retries
        self.backoff_base_seconds = backoff_base_seconds

    async def converse(
        self,
        system_prompt: str,
        messages: Sequence[Message],
        model_id: str,
        temperature: float,
        tools: Sequence[ToolSpec] = (),
    ) -> ModelReply:
        self._check_messages(messages)
        body = {
            "model": model_id,
            "system": system_prompt,
            "messages": [{"role": m.role.value, "text": m.text} for m in messages],
            "temperature": temperature,
            "tools": [
                {
                    "name": tool.name,
                    "description": tool.description,
                    "parameters": json.loads(tool.parameter_schema),
                }
                for tool in tools
            ],
        }

        attempt = 0
        while True:
            try:
                return await self._post(body)
            except ProviderError as e:
                if not e.retriable or attempt >= self.retries:
                    raise
                delay = self.backoff_base_seconds * (2**attempt)
                logger.debug("Retrying provider call in %.3fs after: %s", delay, e)
                await asyncio.sleep(delay)
                attempt += 1

    async def _post(self, body: dict[str, Any]) -> ModelReply:
        headers = {}
        if self.auth_header:
            headers[self.auth_header[0]] = self.auth_header[1]

        try:
            timeout = aiohttp.ClientTimeout(total=self.timeout)
            async with aiohttp.ClientSession(timeout=timeout) as session:
                async with session.post(self.endpoint, json=body, headers=headers) as response:
                    if response.status >= 400:
                        raise ProviderError(
                            f"HTTP {response.status} {response.reason}",
                            retriable=response.status in RETRIABLE_STATUSES,
                        )
                    try:
                        payload = await response.json(content_type=None)
                    except (json.JSONDecodeError, aiohttp.ContentTypeError) as e:
                        raise ProviderError(f"Malformed provider reply: {e}") from e
        except aiohttp.ClientError as e:
            raise ProviderError(f"Connection failed: {e}", retriable=True) from e
        except TimeoutError as e:
            raise ProviderError(f"Request timeout (>{self.timeout}s)", retriable=True) from e

        return parse_reply(payload)


def parse_reply(payload: Any) -> ModelReply:
    """Turn a decoded reply body into a ModelReply."""
    if not isinstance(payload, dict):
        raise ProviderError(
            f"Malformed provider reply: expected object, got {type(payload).__name__}"
        )

    try:
        tool_calls = tuple(
            ToolCall(
                tool_name=str(call["name"]),
                arguments={str(k): str(v) for k, v in (call.get("arguments") or {}).items()},
            )
            for call in payload.get("tool_calls") or []
        )
        usage = payload.get("usage") or {}
        return ModelReply(
            text=payload.get("text") or None,
            tool_calls=tool_calls,
            input_tokens=int(usage.get("input_tokens", 0)),
            output_tokens=int(usage.get("output_tokens", 0)),
        )
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise ProviderError(f"Malformed provider reply: {e}") from e
