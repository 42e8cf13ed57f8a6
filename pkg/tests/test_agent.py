"""Tests for the tool-calling agent loop and its traces."""

import pytest

from agentgauge.agent import (
    Agent,
    AgentConfig,
    ConversationFailedError,
    ConversationTracer,
    HopLimitError,
    StaticTool,
    ToolResolutionError,
    run_conversation,
)
from agentgauge.models import Case, Role, ToolParameter, ToolSpec, TraceTarget, Turn
from agentgauge.providers.base import ProviderError, ToolCall
from agentgauge.providers.scripted import MatchKind, ScriptedProvider, ScriptedRule
from agentgauge.sinks import MemorySink

WEATHER = ToolSpec(
    name="get_weather",
    description="Gets the weather",
    parameters=(ToolParameter("city", required=True),),
)
TIME = ToolSpec(name="get_time", description="Returns the time")


def weather_provider() -> ScriptedProvider:
    return ScriptedProvider(
        [
            ScriptedRule(
                match=MatchKind.SUBSTRING,
                pattern="weather",
                role=Role.USER,
                tool_calls=(ToolCall("get_weather", {"city": "Berlin"}),),
            ),
            ScriptedRule(role=Role.TOOL, text="It is sunny."),
            ScriptedRule(match=MatchKind.EXACT, pattern="Hi", text="Hello!"),
        ]
    )


def make_agent(provider=None, tools=None, sink=None, **config) -> tuple[Agent, MemorySink]:
    sink = sink or MemorySink()
    agent_config = AgentConfig(
        system_prompt="You help.",
        model_id="model-a",
        tools=config.pop("tool_specs", (WEATHER,)),
        **config,
    )
    tracer = ConversationTracer(sink, conversation_id="c1", case_name="case")
    agent = Agent(
        agent_config,
        provider or weather_provider(),
        tools if tools is not None else {"get_weather": StaticTool("Sunny in $city")},
        tracer,
    )
    return agent, sink


class TestAgentConfig:
    """Test agent configuration and permutation application."""

    @pytest.mark.parametrize("temperature", [-0.1, 1.5])
    def test_temperature_range(self, temperature):
        """Test that temperature must lie within [0, 1]."""
        with pytest.raises(ValueError, match="temperature"):
            AgentConfig("p", "m", temperature=temperature)

    def test_max_hops_positive(self):
        """Test that at least one hop is allowed."""
        with pytest.raises(ValueError):
            AgentConfig("p", "m", max_hops=0)

    def test_duplicate_tools(self):
        """Test that tool names are unique."""
        with pytest.raises(ValueError, match="Duplicate"):
            AgentConfig("p", "m", tools=(WEATHER, WEATHER))

    def test_with_parameters(self):
        """Test applying known and unknown parameters."""
        config = AgentConfig("p", "m", tools=(WEATHER, TIME)).with_parameters(
            {
                "model_id": "other",
                "temperature": "0.7",
                "max_hops": "3",
                "tools": "get_time",
                "style": "terse",
            }
        )
        assert config.model_id == "other"
        assert config.temperature == 0.7
        assert config.max_hops == 3
        assert [t.name for t in config.tools] == ["get_time"]
        assert config.parameters == {"style": "terse"}

    def test_with_parameters_bad_values(self):
        """Test that unparseable or unknown values are rejected."""
        config = AgentConfig("p", "m", tools=(WEATHER,))
        with pytest.raises(ValueError, match="temperature"):
            config.with_parameters({"temperature": "hot"})
        with pytest.raises(ValueError, match="Unknown tool"):
            config.with_parameters({"tools": "get_time"})

    def test_missing_tool_implementation(self):
        """Test that every configured tool needs an implementation."""
        with pytest.raises(ValueError, match="get_weather"):
            Agent(AgentConfig("p", "m", tools=(WEATHER,)), weather_provider(), {})


class TestStaticTool:
    """Test file-configured tools."""

    def test_template(self):
        """Test that $arguments are substituted."""
        assert StaticTool("Sunny in $city")({"city": "Oslo"}) == "Sunny in Oslo"

    def test_error(self):
        """Test that an error tool raises its text."""
        with pytest.raises(RuntimeError, match="offline"):
            StaticTool(error="offline")({})


class TestAgentLoop:
    """Test the agent loop and the traces it emits."""

    async def test_plain_reply(self):
        """Test a reply without tool calls produces one LLM trace."""
        agent, sink = make_agent()
        assert await agent.converse("Hi") == "Hello!"
        traces = await agent.tracer.finish()

        assert [t.to for t in traces] == [TraceTarget.LLM]
        assert traces[0].seq == 0
        assert traces[0].user_conversation[-1].text == "Hello!"
        assert traces[0].input_tokens > 0
        assert sink.traces == traces

    async def test_tool_call_trace_order(self):
        """Test LLM, Tool, LLM ordering with cumulative invocations on the final trace."""
        agent, _ = make_agent()
        reply = await agent.converse("What's the weather?")
        traces = await agent.tracer.finish()

        assert reply == "It is sunny."
        assert [t.to for t in traces] == [TraceTarget.LLM, TraceTarget.TOOL, TraceTarget.LLM]
        assert [t.seq for t in traces] == [0, 1, 2]
        assert traces[1].input_tokens == 0 and traces[1].output_tokens == 0
        assert traces[1].tool_invocations[0].result_text == "Sunny in Berlin"
        assert [i.tool_name for i in traces[2].tool_invocations] == ["get_weather"]
        assert traces[2].user_conversation[-2].role == Role.TOOL

    async def test_tool_only_step_adds_no_assistant_message(self):
        """Test that a step without text carries its output as tool invocations."""
        agent, _ = make_agent()
        await agent.converse("Hi")
        await agent.converse("What's the weather?")
        traces = await agent.tracer.finish()

        assert [t.to for t in traces] == [
            TraceTarget.LLM,
            TraceTarget.LLM,
            TraceTarget.TOOL,
            TraceTarget.LLM,
        ]
        tool_step = traces[1]
        assert tool_step.user_conversation[-1].role == Role.USER
        assert tool_step.user_conversation[-1].text == "What's the weather?"
        assert [i.tool_name for i in tool_step.tool_invocations] == ["get_weather"]
        assert traces[-1].user_conversation[-1].text == "It is sunny."

    async def test_tool_error_becomes_result(self):
        """Test that a failing tool reports an ERROR result instead of raising."""
        agent, _ = make_agent(tools={"get_weather": StaticTool(error="service down")})
        await agent.converse("weather please")
        traces = await agent.tracer.finish()

        invocation = traces[1].tool_invocations[0]
        assert not invocation.success
        assert invocation.result_text == "ERROR: service down"

    async def test_missing_required_argument(self):
        """Test that a call without required arguments is not executed."""
        calls = []

        def tool(arguments):
            calls.append(arguments)
            return "x"

        provider = ScriptedProvider(
            [
                ScriptedRule(role=Role.USER, tool_calls=(ToolCall("get_weather", {}),)),
                ScriptedRule(role=Role.TOOL, text="Sorry."),
            ]
        )
        agent, _ = make_agent(provider=provider, tools={"get_weather": tool})
        await agent.converse("weather")
        traces = await agent.tracer.finish()

        assert calls == []
        assert traces[1].tool_invocations[0].result_text.startswith("ERROR: missing required")

    async def test_async_tool(self):
        """Test that coroutine tools are awaited."""

        async def tool(arguments):
            return f"Rain in {arguments['city']}"

        agent, _ = make_agent(tools={"get_weather": tool})
        await agent.converse("weather")
        traces = await agent.tracer.finish()
        assert traces[1].tool_invocations[0].result_text == "Rain in Berlin"

    async def test_unknown_tool(self):
        """Test that requesting a missing tool raises after tracing the LLM step."""
        provider = ScriptedProvider([ScriptedRule(tool_calls=(ToolCall("launch", {}),))])
        agent, _ = make_agent(provider=provider)
        with pytest.raises(ToolResolutionError) as exc_info:
            await agent.converse("go")
        assert exc_info.value.tool_name == "launch"
        traces = await agent.tracer.finish(exc_info.value)
        assert traces[-1].to == TraceTarget.LLM
        assert traces[-1].extras["error_kind"] == "ToolResolutionError"

    async def test_hop_limit(self):
        """Test that endless tool calls stop at max_hops model calls."""
        provider = ScriptedProvider(
            [ScriptedRule(tool_calls=(ToolCall("get_weather", {"city": "X"}),))]
        )
        agent, _ = make_agent(provider=provider, max_hops=3)
        with pytest.raises(HopLimitError):
            await agent.converse("weather")
        traces = await agent.tracer.finish()
        assert sum(1 for t in traces if t.is_llm) == 3

    async def test_provider_error_traced(self):
        """Test that a failed model call leaves a zero-token LLM trace."""
        agent, _ = make_agent(provider=ScriptedProvider([]))
        with pytest.raises(ProviderError):
            await agent.converse("Hi")
        traces = await agent.tracer.finish()
        assert len(traces) == 1
        assert traces[0].input_tokens == 0 and traces[0].output_tokens == 0

    async def test_memory_across_turns(self):
        """Test that the second turn sees the first one."""
        agent, _ = make_agent()
        await agent.converse("Hi")
        await agent.converse("Hi")
        traces = await agent.tracer.finish()
        assert [m.role for m in traces[-1].user_conversation] == [
            Role.USER,
            Role.ASSISTANT,
            Role.USER,
            Role.ASSISTANT,
        ]


class TestRunConversation:
    """Test running a whole case."""

    def factory(self, provider):
        def build(config):
            return Agent(config, provider, {"get_weather": StaticTool("Sunny")})

        return build

    async def test_case_traces(self):
        """Test case name, expected tool and seq numbering."""
        sink = MemorySink()
        case = Case("Tool use: get_weather", (Turn("weather?"), Turn("Hi")))
        traces = await run_conversation(
            self.factory(weather_provider()),
            AgentConfig("p", "m", tools=(WEATHER,)),
            case,
            conversation_id="abc",
            permutation_id="model_id=m",
            run_index=2,
            sink=sink,
        )
        assert [t.seq for t in traces] == list(range(len(traces)))
        assert all(t.case_name == "Tool use: get_weather" for t in traces)
        assert all(t.extras["expected_tool"] == "get_weather" for t in traces)
        assert all(t.run_index == 2 and t.permutation_id == "model_id=m" for t in traces)
        assert sink.traces == traces

    async def test_failure_is_stamped(self):
        """Test that a failed conversation keeps its traces with the error."""
        sink = MemorySink()
        with pytest.raises(ConversationFailedError) as exc_info:
            await run_conversation(
                self.factory(ScriptedProvider([])),
                AgentConfig("p", "m", tools=(WEATHER,)),
                Case("Greeting", (Turn("Hi"),)),
                conversation_id="abc",
                sink=sink,
            )
        traces = exc_info.value.traces
        assert len(traces) == 1
        assert traces[-1].extras["error_kind"] == "ProviderError"
        assert "No scripted rule" in traces[-1].extras["error"]
        assert sink.traces[-1].extras["error_kind"] == "ProviderError"

    async def test_factory_failure_recorded(self):
        """Test that a failing agent factory still leaves one trace."""

        def broken(config):
            raise ValueError("bad agent")

        with pytest.raises(ConversationFailedError) as exc_info:
            await run_conversation(
                broken,
                AgentConfig("p", "m"),
                Case("Greeting", (Turn("Hi"),)),
                conversation_id="abc",
                sink=MemorySink(),
            )
        traces = exc_info.value.traces
        assert len(traces) == 1
        assert traces[0].extras["error"] == "bad agent"
