"""Slope-stability assistant: extraction, emission, solving, retrieval, chat."""

from .errors import SlopeAgentError
from .model import (
    AnalysisConfig,
    FieldProvenance,
    MaterialLayer,
    PartialProblem,
    SearchConfig,
    SlopeGeometry,
    SlopeProblem,
    build_problem,
    fill_defaults,
    validate,
)
from .canon import canonical_hash, dumps_problem, loads_problem
from .agent import AgentRuntime, ChatSession, Message, ToolCall, ToolRegistry, ToolResult, ToolSpec, TurnPlan, plan_turn
from .emitters import EmittedScript, TargetProfile, emit, get_profile, lint, parse_script
from .plot import render_result, render_svg, save_svg
from .solver import (
    SlipCircle,
    SolveResult,
    build_slices,
    fos_bishop,
    fos_fellenius,
    search_critical,
    solve_circle,
)

__version__ = "0.1.0"

__all__ = [
    "AgentRuntime",
    "AnalysisConfig",
    "ChatSession",
    "EmittedScript",
    "FieldProvenance",
    "MaterialLayer",
    "Message",
    "PartialProblem",
    "SearchConfig",
    "SlipCircle",
    "SlopeAgentError",
    "SlopeGeometry",
    "SlopeProblem",
    "SolveResult",
    "TargetProfile",
    "ToolCall",
    "ToolRegistry",
    "ToolResult",
    "ToolSpec",
    "TurnPlan",
    "build_problem",
    "build_slices",
    "canonical_hash",
    "dumps_problem",
    "emit",
    "fill_defaults",
    "fos_bishop",
    "fos_fellenius",
    "get_profile",
    "lint",
    "loads_problem",
    "parse_script",
    "plan_turn",
    "render_result",
    "render_svg",
    "save_svg",
    "search_critical",
    "solve_circle",
    "validate",
    "__version__",
]
