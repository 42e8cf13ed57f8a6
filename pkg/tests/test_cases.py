"""Tests for case building, generation and case files."""

import json

import pytest

from agentgauge.cases import (
    CaseBuilder,
    CaseBuildError,
    CaseParseError,
    LlmCaseGenerator,
    TemplateCaseGenerator,
    case_from_dict,
    case_to_dict,
    cases_for_agent_tools,
    load_cases,
    save_cases,
)
from agentgauge.models import ToolParameter, ToolSpec
from agentgauge.providers.scripted import MatchKind, ScriptedProvider, ScriptedRule

WEATHER = ToolSpec(
    "get_weather",
    "Gets the weather for a city.\nUses a public API.",
    (ToolParameter("city", description="City name", required=True),),
)
RESTAURANTS = ToolSpec("search_restaurants", "Searches restaurants nearby")


class TestCaseBuilder:
    """Test chained case construction."""

    def test_build(self):
        """Test all builder steps."""
        case = (
            CaseBuilder("Museum visit")
            .add_turn("I want to see art", ["Which city are you in?"])
            .add_turn("Berlin")
            .expect("The agent recommends a museum in Berlin")
            .expect_tool("search_museums")
            .with_metadata(owner="team-a")
            .build()
        )
        assert [t.user_input for t in case.turns] == ["I want to see art", "Berlin"]
        assert case.turns[0].acceptable_responses == ("Which city are you in?",)
        assert case.overall_expectations == "The agent recommends a museum in Berlin"
        assert case.expected_tool == "search_museums"
        assert case.metadata == {"owner": "team-a"}

    def test_invalid(self):
        """Test that names, inputs and turns are required."""
        with pytest.raises(CaseBuildError):
            CaseBuilder("")
        with pytest.raises(CaseBuildError):
            CaseBuilder("x").add_turn("")
        with pytest.raises(CaseBuildError, match="at least one turn"):
            CaseBuilder("x").build()


class TestTemplateCaseGenerator:
    """Test deterministic user inputs."""

    @pytest.mark.parametrize(
        "tool, locale, expected",
        [
            (WEATHER, "en_US", "Please use get_weather: get the weather for a city."),
            (RESTAURANTS, "en_GB", "Please use search_restaurants: search restaurants nearby."),
            (WEATHER, "de_DE", "Bitte verwende get_weather: Gets the weather for a city."),
            (ToolSpec("ping", ""), "en_US", "Please use ping."),
        ],
    )
    async def test_user_input(self, tool, locale, expected):
        """Test the phrasing per language."""
        assert await TemplateCaseGenerator().user_input(tool, locale) == expected

    async def test_unsupported_locale(self):
        """Test that unknown locales are rejected."""
        with pytest.raises(ValueError, match="Unsupported locale"):
            await TemplateCaseGenerator().user_input(WEATHER, "fr_FR")


class TestCasesForAgentTools:
    """Test generating one case per tool and language."""

    async def test_cases(self):
        """Test names, locales and expected tools."""
        cases = await cases_for_agent_tools([WEATHER, RESTAURANTS], ["en_US", "de_DE"])
        assert len(cases) == 4
        assert [c.key for c in cases] == [
            "Tool use: get_weather [en_US]",
            "Tool use: get_weather [de_DE]",
            "Tool use: search_restaurants [en_US]",
            "Tool use: search_restaurants [de_DE]",
        ]
        assert cases[0].expected_tool == "get_weather"
        assert cases[1].locale == "de_DE"

    async def test_deterministic(self):
        """Test that the template generator gives the same cases twice."""
        first = await cases_for_agent_tools([WEATHER], ["en_US"])
        assert first == await cases_for_agent_tools([WEATHER], ["en_US"])

    @pytest.mark.parametrize(
        "tools, languages", [([], ["en_US"]), ([WEATHER], []), ([WEATHER], ["xx_XX"])]
    )
    async def test_invalid(self, tools, languages):
        """Test empty tool or language lists and unsupported locales."""
        with pytest.raises(ValueError):
            await cases_for_agent_tools(tools, languages)

    async def test_llm_generator(self):
        """Test that a model phrases the input from the rendered prompt."""
        provider = ScriptedProvider(
            [
                ScriptedRule(
                    match=MatchKind.SUBSTRING,
                    pattern="- city (string) City name",
                    text="\nWhat's the weather in Rome?\nExtra line",
                )
            ]
        )
        generator = LlmCaseGenerator(provider, "writer-1")
        (case,) = await cases_for_agent_tools([WEATHER], ["fr_FR"], generator)
        assert case.turns[0].user_input == "What's the weather in Rome?"
        assert case.locale == "fr_FR"


class TestCaseFiles:
    """Test the JSON case format."""

    def test_save_and_load(self, tmp_path):
        """Test that saved cases load back equal."""
        cases = [
            CaseBuilder("Tool use: get_weather").add_turn("Weather?", ["Sunny"]).build(),
            CaseBuilder("Museum").add_turn("Art").expect("A museum").build(),
        ]
        path = tmp_path / "cases" / "cases.json"
        save_cases(cases, path)
        assert load_cases(path) == cases

    def test_unknown_fields_to_metadata(self):
        """Test that extra fields are kept in metadata."""
        case = case_from_dict({"name": "x", "turns": [{"user_input": "Hi"}], "owner": "team-a"})
        assert case.metadata == {"owner": "team-a"}
        assert case_to_dict(case)["metadata"] == {"owner": "team-a"}

    @pytest.mark.parametrize(
        "data, field",
        [
            ({"turns": [{"user_input": "Hi"}]}, "name"),
            ({"name": "x", "turns": []}, "turns"),
            ({"name": "x", "turns": [{"user_input": ""}]}, "user_input"),
            (
                {"name": "x", "turns": [{"user_input": "a", "acceptable_responses": "b"}]},
                "acceptable",
            ),
            ({"name": "x", "turns": [{"user_input": "a"}], "expected_tool": 3}, "expected_tool"),
        ],
    )
    def test_schema_errors(self, data, field):
        """Test that errors name the offending field."""
        with pytest.raises(CaseParseError, match=field):
            case_from_dict(data)

    def test_duplicates(self, tmp_path):
        """Test that duplicate case names are rejected."""
        path = tmp_path / "cases.json"
        case = {"name": "x", "turns": [{"user_input": "Hi"}]}
        path.write_text(json.dumps([case, case]))
        with pytest.raises(CaseParseError, match="duplicate"):
            load_cases(path)

    def test_same_name_other_locale(self, tmp_path):
        """Test that locales distinguish cases with the same name."""
        path = tmp_path / "cases.json"
        cases = [
            {"name": "x", "turns": [{"user_input": "Hi"}], "metadata": {"locale": locale}}
            for locale in ("en_US", "de_DE")
        ]
        path.write_text(json.dumps(cases))
        assert len(load_cases(path)) == 2

    def test_invalid_json(self, tmp_path):
        """Test that JSON errors carry the line."""
        path = tmp_path / "cases.json"
        path.write_text("[\n{")
        with pytest.raises(CaseParseError, match="line 2"):
            load_cases(path)
