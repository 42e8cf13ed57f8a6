"""LLM-as-a-judge metrics."""

import logging
import re

import jinja2

from agentgauge.metrics.base import BaseMetric
from agentgauge.models import Case, Conversation, Measurement, Message, Role, Unit
from agentgauge.providers.base import BaseProvider, ProviderError

logger = logging.getLogger(__name__)

MIN_SCORE = 1
MAX_SCORE = 10

# Templates are versioned; change the id whenever the wording changes
JUDGE_TEMPLATES = {
    "conciseness-v1": """\
You are grading the response of an AI assistant.

Rate how concise the following response is on a scale from {{ min_score }} to {{ max_score }},
where {{ min_score }} means rambling and full of unnecessary detail and {{ max_score }} means
it answers with exactly the information needed.

Response:
<response>
{{ response }}
</response>

Reply with the score only.""",
    "expectation-v1": """\
You are grading a conversation between a user and an AI assistant.

The user had these expectations for the conversation:
<expectations>
{{ expectations }}
</expectations>

Conversation:
<conversation>
{% for message in messages -%}
{{ message.role.value }}: {{ message.text }}
{% endfor -%}
</conversation>

Rate on a scale from {{ min_score }} to {{ max_score }} how well the conversation fulfills
the user's expectations, where {{ min_score }} means not at all and {{ max_score }} means
completely.

Reply with the score only.""",
}

_environment = jinja2.Environment(autoescape=False, undefined=jinja2.StrictUndefined)

_INTEGER = re.compile(r"\d+")


def render_judge_prompt(template_id: str, **context: object) -> str:
    """Render a judge template with the score bounds filled in."""
    template = _environment.from_string(JUDGE_TEMPLATES[template_id])
    return template.render(min_score=MIN_SCORE, max_score=MAX_SCORE, **context)


def parse_score(reply: str) -> int | None:
    """First integer token within the score range, or None."""
    for token in _INTEGER.findall(reply):
        value = int(token)
        if MIN_SCORE <= value <= MAX_SCORE:
            return value
    return None


class _JudgeMetric(BaseMetric):
    """Scores a rendered prompt with a judge model at temperature 0."""

    unit = Unit.SCORE
    template_id: str = ""

    def __init__(self, provider: BaseProvider, model_id: str):
        self.provider = provider
        self.model_id = model_id

    async def _judge(self, conversation: Conversation, prompt: str) -> list[Measurement]:
        try:
            reply = await self.provider.converse(
                "", [Message(Role.USER, prompt)], self.model_id, 0.0
            )
        except ProviderError as e:
            return [self._error(conversation, str(e), judge_template=self.template_id)]

        raw_reply = reply.text or ""
        score = parse_score(raw_reply)
        if score is None:
            logger.debug(
                "Unparseable judge reply for %s: %r", conversation.conversation_id, raw_reply
            )
            return [
                self._error(
                    conversation,
                    "No score in judge reply",
                    raw_reply=raw_reply,
                    judge_template=self.template_id,
                )
            ]
        return [self._measurement(conversation, score, judge_template=self.template_id)]


class ConcisenessJudgeMetric(_JudgeMetric):
    """Judge rating of how concise the final assistant response is."""

    name = "AgentResponseConciseness"
    template_id = "conciseness-v1"

    async def evaluate_conversation(
        self, conversation: Conversation, case: Case | None = None
    ) -> list[Measurement]:
        replies = [reply for reply in conversation.assistant_replies_per_turn() if reply]
        if not replies:
            return [self._error(conversation, "No assistant response to judge")]
        prompt = render_judge_prompt(self.template_id, response=replies[-1])
        return await self._judge(conversation, prompt)


class ExpectationJudgeMetric(_JudgeMetric):
    """Judge rating of how well the conversation meets the case's overall expectations."""

    name = "ConversationExpectation"
    template_id = "expectation-v1"

    async def evaluate_conversation(
        self, conversation: Conversation, case: Case | None = None
    ) -> list[Measurement]:
        if case is None or not case.overall_expectations:
            return []
        final = conversation.final_trace
        prompt = render_judge_prompt(
            self.template_id,
            expectations=case.overall_expectations,
            messages=list(final.user_conversation),
        )
        return await self._judge(conversation, prompt)
