"""Native Harmony-format agent harness for gpt-oss style models."""

from .agent import Agent, AgentConfig, Task, handle_finish_reason, run
from .codec import (
    Channel,
    Conversation,
    Message,
    Role,
    TurnOutcome,
    parse_completion,
    render_conversation,
    render_message,
    validate_turn,
)
from .exceptions import ExceptionKind, Tier, classify
from .registry import ToolCall, ToolRegistry, ToolSpec, default_registry, render_tool_defs
from .sandbox import Sandbox, SandboxConfig
from .trajectory import Trajectory, TurnRecord

__version__ = "0.1.0"
