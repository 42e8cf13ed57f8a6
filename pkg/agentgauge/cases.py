"""Evaluation case building, generation and case files."""

import json
import logging
from abc import ABC, abstractmethod
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import jinja2

from agentgauge.models import TOOL_USE_PREFIX, Case, Message, Role, ToolSpec, Turn
from agentgauge.providers.base import BaseProvider

logger = logging.getLogger(__name__)

ENGLISH_LOCALES = ("en_EN", "en_US", "en_GB")
GERMAN_LOCALES = ("de_DE", "de_AT", "de_CH")
SUPPORTED_LOCALES = ENGLISH_LOCALES + GERMAN_LOCALES

_LANGUAGE_NAMES = {"en": "English", "de": "German"}

_CASE_FIELDS = ("name", "turns", "overall_expectations", "expected_tool", "metadata")


class CaseBuildError(ValueError):
    """Raised when a case under construction is invalid."""


class CaseParseError(ValueError):
    """Raised when a case file does not match the case schema."""


class CaseBuilder:
    """Chainable construction of a Case.

    Example:
        case = (
            CaseBuilder("User wants to go to a museum")
            .add_turn("I want to see art", ["Which city are you in?"])
            .build()
        )
    """

    def __init__(self, name: str):
        if not name:
            raise CaseBuildError("Case name must not be empty")
        self.name = name
        self.turns: list[Turn] = []
        self.overall_expectations: str | None = None
        self.expected_tool: str | None = None
        self.metadata: dict[str, Any] = {}

    def add_turn(self, user_input: str, acceptable_responses: Sequence[str] = ()) -> "CaseBuilder":
        if not user_input:
            raise CaseBuildError(f"Case {self.name!r}: turn user_input must not be empty")
        self.turns.append(Turn(user_input, tuple(acceptable_responses)))
        return self

    def expect(self, overall_expectations: str) -> "CaseBuilder":
        self.overall_expectations = overall_expectations
        return self

    def expect_tool(self, tool_name: str) -> "CaseBuilder":
        self.expected_tool = tool_name
        return self

    def with_metadata(self, **metadata: Any) -> "CaseBuilder":
        self.metadata.update(metadata)
        return self

    def build(self) -> Case:
        if not self.turns:
            raise CaseBuildError(f"Case {self.name!r} needs at least one turn")
        return Case(
            name=self.name,
            turns=tuple(self.turns),
            overall_expectations=self.overall_expectations,
            expected_tool=self.expected_tool,
            metadata=dict(self.metadata),
        )


def _first_line(text: str) -> str:
    for line in text.splitlines():
        if line.strip():
            return line.strip()
    return ""


def _imperative(verb: str) -> str:
    """Turn a third-person verb ("Gets") into the imperative ("get")."""
    word = verb.lower()
    if len(word) > 3 and word.endswith("ies"):
        return word[:-3] + "y"
    if word.endswith(("oes", "ches", "shes", "sses", "xes", "zzes")):
        return word[:-2]
    if word.endswith("s") and not word.endswith("ss"):
        return word[:-1]
    return word


def _sentence(text: str) -> str:
    text = text.rstrip(". ")
    return f"{text}." if text else ""


class CaseGenerator(ABC):
    """Produces the user input of a generated tool-use case."""

    @abstractmethod
    async def user_input(self, tool: ToolSpec, locale: str) -> str:
        """User input that should make an agent call `tool`."""

    def check_locale(self, locale: str) -> None:
        """Raise ValueError if the locale cannot be generated."""


class TemplateCaseGenerator(CaseGenerator):
    """Deterministic inputs from fixed per-language templates."""

    def check_locale(self, locale: str) -> None:
        if locale not in SUPPORTED_LOCALES:
            raise ValueError(
                f"Unsupported locale {locale!r}. Supported: {', '.join(SUPPORTED_LOCALES)}"
            )

    async def user_input(self, tool: ToolSpec, locale: str) -> str:
        self.check_locale(locale)
        description = _first_line(tool.description)

        if locale in GERMAN_LOCALES:
            if not description:
                return f"Bitte verwende {tool.name}."
            return f"Bitte verwende {tool.name}: {_sentence(description)}"

        if not description:
            return f"Please use {tool.name}."
        verb, _, rest = description.partition(" ")
        instruction = " ".join(part for part in (_imperative(verb), rest) if part)
        return f"Please use {tool.name}: {_sentence(instruction)}"


CASE_GENERATION_PROMPT = """\
Write one request a user could send to an AI assistant that can only be
fulfilled by calling the tool below. Write it in {{ language }} ({{ locale }}),
as a single line, without quotes or explanations.

Tool name: {{ tool.name }}
Tool description: {{ tool.description }}
{% if tool.parameters -%}
Tool parameters:
{% for parameter in tool.parameters -%}
- {{ parameter.name }} ({{ parameter.type }}) {{ parameter.description }}
{% endfor -%}
{% endif %}"""

_environment = jinja2.Environment(autoescape=False, undefined=jinja2.StrictUndefined)


class LlmCaseGenerator(CaseGenerator):
    """Asks a model to phrase the user input."""

    def __init__(self, provider: BaseProvider, model_id: str, temperature: float = 0.0):
        self.provider = provider
        self.model_id = model_id
        self.temperature = temperature

    async def user_input(self, tool: ToolSpec, locale: str) -> str:
        language = _LANGUAGE_NAMES.get(locale.split("_", 1)[0].lower(), locale)
        prompt = _environment.from_string(CASE_GENERATION_PROMPT).render(
            tool=tool, locale=locale, language=language
        )
        reply = await self.provider.converse(
            "", [Message(Role.USER, prompt)], self.model_id, self.temperature
        )
        line = _first_line(reply.text or "")
        if not line:
            raise ValueError(f"Model returned no user input for tool {tool.name!r}")
        return line


async def cases_for_agent_tools(
    tools: Sequence[ToolSpec],
    languages: Sequence[str],
    generator: CaseGenerator | None = None,
) -> list[Case]:
    """One "Tool use: <tool>" case per tool and language.

    Raises:
        ValueError: If tools or languages are empty or a locale is unsupported
    """
    if not tools:
        raise ValueError("At least one tool is required")
    if not languages:
        raise ValueError("At least one language is required")
    generator = generator or TemplateCaseGenerator()
    for locale in languages:
        generator.check_locale(locale)

    cases = []
    for tool in tools:
        for locale in languages:
            user_input = await generator.user_input(tool, locale)
            cases.append(
                Case(
                    name=f"{TOOL_USE_PREFIX}{tool.name}",
                    turns=(Turn(user_input),),
                    metadata={"locale": locale},
                )
            )
    logger.debug("Generated %d cases for %d tools", len(cases), len(tools))
    return cases


def case_to_dict(case: Case) -> dict[str, Any]:
    data: dict[str, Any] = {
        "name": case.name,
        "turns": [
            {"user_input": turn.user_input, "acceptable_responses": list(turn.acceptable_responses)}
            for turn in case.turns
        ],
    }
    if case.overall_expectations is not None:
        data["overall_expectations"] = case.overall_expectations
    if case.expected_tool is not None:
        data["expected_tool"] = case.expected_tool
    if case.metadata:
        data["metadata"] = dict(case.metadata)
    return data


def _parse_turn(data: Any, where: str) -> Turn:
    if not isinstance(data, dict):
        raise CaseParseError(f"{where}: expected an object")
    user_input = data.get("user_input")
    if not isinstance(user_input, str) or not user_input:
        raise CaseParseError(f"{where}: field 'user_input' must be a non-empty string")
    acceptable = data.get("acceptable_responses") or []
    if not isinstance(acceptable, list) or not all(isinstance(r, str) for r in acceptable):
        raise CaseParseError(f"{where}: field 'acceptable_responses' must be a list of strings")
    return Turn(user_input, tuple(acceptable))


def case_from_dict(data: Any, where: str = "case") -> Case:
    """Decode one case object; unknown fields are kept in metadata.

    Raises:
        CaseParseError: Naming the offending field
    """
    if not isinstance(data, dict):
        raise CaseParseError(f"{where}: expected an object, got {type(data).__name__}")

    name = data.get("name")
    if not isinstance(name, str) or not name:
        raise CaseParseError(f"{where}: field 'name' must be a non-empty string")
    where = f"{where} ({name!r})"

    turns = data.get("turns")
    if not isinstance(turns, list) or not turns:
        raise CaseParseError(f"{where}: field 'turns' must be a non-empty list")

    for optional in ("overall_expectations", "expected_tool"):
        if data.get(optional) is not None and not isinstance(data[optional], str):
            raise CaseParseError(f"{where}: field {optional!r} must be a string")

    metadata = data.get("metadata") or {}
    if not isinstance(metadata, dict):
        raise CaseParseError(f"{where}: field 'metadata' must be an object")
    metadata = dict(metadata)
    for key, value in data.items():
        if key not in _CASE_FIELDS:
            metadata[key] = value

    return Case(
        name=name,
        turns=tuple(_parse_turn(turn, f"{where}: turns[{i}]") for i, turn in enumerate(turns)),
        overall_expectations=data.get("overall_expectations"),
        expected_tool=data.get("expected_tool"),
        metadata=metadata,
    )


def load_cases(path: Path) -> list[Case]:
    """Load a JSON case file.

    Raises:
        CaseParseError: On invalid JSON, schema violations or duplicate cases
    """
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CaseParseError(f"{path}: line {e.lineno}: invalid JSON: {e.msg}") from None
    if not isinstance(data, list):
        raise CaseParseError(f"{path}: expected a JSON array of cases")

    cases = []
    seen = set()
    for index, item in enumerate(data):
        case = case_from_dict(item, f"{path}: case {index}")
        if case.key in seen:
            raise CaseParseError(f"{path}: case {index}: duplicate case name {case.key!r}")
        seen.add(case.key)
        cases.append(case)
    return cases


def save_cases(cases: Sequence[Case], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps([case_to_dict(case) for case in cases], indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
