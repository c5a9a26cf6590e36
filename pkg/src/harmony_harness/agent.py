"""The agent loop: render -> query -> parse -> validate -> execute or stop.

NonTerminating exceptions discard the completion and re-sample the same
prompt, up to ``max_retries`` times per step. Terminating exceptions end
the run; with ``high_effort_overflow_retry`` a context-window overflow
restarts the whole run instead, up to ``max_restarts`` times.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Callable

from .client import Backend, CompletionRequest, ScriptExhausted
from .codec import (
    Conversation,
    Message,
    Role,
    developer_content,
    escape_special_tokens,
    parse_completion,
    render_conversation,
    system_content,
    validate_turn,
)
from .exceptions import (
    ExceptionKind,
    HarnessException,
    LimitsExceeded,
    LongGeneration,
    MaxContextWindowOverflow,
    MaxNewTokensExceeded,
    NonTerminatingException,
    RetrialsExceeded,
    Submitted,
    TerminatingException,
    UnexpectedFinishReason,
    classify,
)
from .registry import ToolRegistry, render_tool_defs
from .sandbox import Sandbox
from .tokenizer import DEFAULT_TOKENIZER, Tokenizer
from .trajectory import Trajectory, TurnRecord

log = logging.getLogger(__name__)

DEFAULT_IDENTITY = "You are ChatGPT, a large language model trained by OpenAI."
DEFAULT_INSTRUCTIONS = (
    "You are a software engineering agent working in a repository checkout. "
    "Use the tools to inspect and edit the code. When the task is complete, "
    "reply on the final channel with a short summary."
)

STOP_REASONS = frozenset({"stop", "eos", "stop_sequence", "end_turn"})
LENGTH_REASONS = frozenset({"length", "max_tokens"})

__all__ = [
    "AgentConfig",
    "Task",
    "LoopState",
    "Agent",
    "classify",
    "handle_finish_reason",
    "run",
]


@dataclass(frozen=True)
class AgentConfig:
    max_retries: int = 10
    step_limit: int = 250
    context_window: int = 131072
    max_new_tokens: int = 32768
    # Cumulative completion-token budget for the whole run; None = unbounded.
    max_total_new_tokens: int | None = None
    temperature: float = 1.0
    top_p: float = 1.0
    reasoning_effort: str = "medium"
    high_effort_overflow_retry: bool = False
    max_restarts: int = 5
    retry_feedback: bool = False
    tool_placement: str = "system"
    seed: int | None = None

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.step_limit < 0:
            raise ValueError("step_limit must be >= 0")
        if self.context_window <= 0:
            raise ValueError("context_window must be positive")
        if self.max_new_tokens <= 0:
            raise ValueError("max_new_tokens must be positive")
        if self.reasoning_effort not in ("low", "medium", "high"):
            raise ValueError(f"unknown reasoning effort {self.reasoning_effort!r}")
        if self.tool_placement not in ("system", "developer"):
            raise ValueError(f"unknown tool placement {self.tool_placement!r}")


@dataclass(frozen=True)
class Task:
    user: str
    instructions: str = DEFAULT_INSTRUCTIONS
    identity: str = DEFAULT_IDENTITY
    current_date: str | None = None


@dataclass
class LoopState:
    conversation: Conversation
    turns: list[TurnRecord]
    restart: int = 0
    steps: int = 0
    retries: int = 0
    completion_tokens: int = 0
    feedback: str | None = None


def handle_finish_reason(reason: str | None) -> ExceptionKind | None:
    """None for a normal stop, LongGeneration for a length cut, else UnexpectedFinishReason."""
    if reason in STOP_REASONS:
        return None
    if reason in LENGTH_REASONS:
        return ExceptionKind.LongGeneration
    return ExceptionKind.UnexpectedFinishReason


def _exc_record(exc: HarnessException) -> dict:
    return {"kind": exc.kind.value, "tier": exc.tier.value, "message": exc.message}


class Agent:
    def __init__(
        self,
        backend: Backend,
        registry: ToolRegistry,
        sandbox: Sandbox,
        cfg: AgentConfig = AgentConfig(),
        tokenizer: Tokenizer = DEFAULT_TOKENIZER,
        sink: Callable[[TurnRecord], None] | None = None,
    ):
        self.backend = backend
        self.registry = registry
        self.sandbox = sandbox
        self.cfg = cfg
        self.tokenizer = tokenizer
        self.sink = sink
        tools = registry.tools if registry is not None else ()
        self.tooldef_tokens = tokenizer.count(render_tool_defs(tools)) if tools else 0

    def bootstrap(self, task: Task) -> Conversation:
        namespaces = self.registry.namespaces if self.registry is not None else []
        system = system_content(
            task.identity,
            self.cfg.reasoning_effort,
            current_date=task.current_date,
            tool_namespaces=namespaces,
        )
        return Conversation(
            [
                Message(Role.SYSTEM, escape_special_tokens(system)),
                Message(Role.DEVELOPER, escape_special_tokens(developer_content(task.instructions))),
                Message(Role.USER, escape_special_tokens(task.user)),
            ]
        )

    def start(self, task: Task, turns: list[TurnRecord] | None = None, restart: int = 0) -> LoopState:
        return LoopState(self.bootstrap(task), turns if turns is not None else [], restart=restart)

    def render(self, state: LoopState) -> str:
        conv = state.conversation
        if state.feedback:
            conv = Conversation(conv.messages + [Message(Role.USER, state.feedback)])
        tools = self.registry.tools if self.registry is not None else ()
        return render_conversation(conv, tools, self.cfg.tool_placement)

    def step(self, state: LoopState) -> LoopState:
        """Run one attempt. Returns the state after a tool turn or a retry;
        raises a TerminatingException when the run ends."""
        cfg = self.cfg
        if state.steps >= cfg.step_limit:
            raise LimitsExceeded(f"step limit {cfg.step_limit} reached")

        prompt = self.render(state)
        record = TurnRecord(
            step=state.steps,
            attempt=state.retries + 1,
            restart=state.restart,
            prompt_tokens=self.tokenizer.count(prompt),
        )
        state.turns.append(record)
        try:
            self._attempt(state, record, prompt)
        except NonTerminatingException as exc:
            record.exception = _exc_record(exc)
            state.retries += 1
            log.info("step %d attempt %d: %s", state.steps, record.attempt, exc.kind.value)
            if state.retries > cfg.max_retries:
                raise RetrialsExceeded(
                    f"{state.retries} consecutive failures at step {state.steps}; last: {exc.kind.value}"
                ) from exc
            if cfg.retry_feedback:
                state.feedback = escape_special_tokens(f"Error ({exc.kind.value}): {exc.message}")
        except TerminatingException as exc:
            record.exception = _exc_record(exc)
            raise
        finally:
            if self.sink is not None:
                self.sink(record)
        return state

    def _attempt(self, state: LoopState, record: TurnRecord, prompt: str) -> None:
        cfg = self.cfg
        if record.prompt_tokens + cfg.max_new_tokens > cfg.context_window:
            raise MaxContextWindowOverflow(
                f"prompt {record.prompt_tokens} + max_new_tokens {cfg.max_new_tokens} "
                f"> context window {cfg.context_window}"
            )
        req = CompletionRequest(
            prompt=prompt,
            max_tokens=cfg.max_new_tokens,
            temperature=cfg.temperature,
            top_p=cfg.top_p,
            seed=cfg.seed,
        )
        try:
            resp = self.backend.complete(req)
        except (HarnessException, ScriptExhausted):
            raise
        except Exception as exc:
            raise UnexpectedFinishReason(f"backend failure: {type(exc).__name__}: {exc}") from exc

        record.completion = resp.text
        record.finish_reason = resp.finish_reason
        record.completion_tokens = resp.usage.completion_tokens
        record.usage_prompt_tokens = resp.usage.prompt_tokens
        record.usage_estimated = resp.usage.estimated
        state.completion_tokens += resp.usage.completion_tokens

        if cfg.max_total_new_tokens is not None and state.completion_tokens > cfg.max_total_new_tokens:
            raise MaxNewTokensExceeded(
                f"{state.completion_tokens} completion tokens > budget {cfg.max_total_new_tokens}"
            )
        kind = handle_finish_reason(resp.finish_reason)
        if kind is ExceptionKind.LongGeneration:
            raise LongGeneration(f"generation hit max_tokens={cfg.max_new_tokens}")
        if kind is not None:
            raise UnexpectedFinishReason(f"finish reason {resp.finish_reason!r}")

        msgs = parse_completion(resp.text)
        outcome = validate_turn(msgs)
        if outcome.is_final:
            record.outcome = "final"
            record.messages = [m.to_dict() for m in msgs]
            state.conversation.extend(msgs)
            raise Submitted("final message received", final=outcome.action.content)

        call_msg = outcome.action
        record.recipient = call_msg.recipient
        record.arguments = call_msg.content
        call = self.registry.parse_call(call_msg.recipient, call_msg.content)
        record.via_alias = call.via_alias
        result = escape_special_tokens(self.sandbox.execute(call))
        tool_msg = Message(
            Role.TOOL,
            result,
            channel=call_msg.channel,
            recipient="assistant",
            name=call_msg.recipient,
        )
        # the call goes last so its result directly follows it
        committed = [m for m in msgs if m is not call_msg] + [call_msg, tool_msg]
        state.conversation.extend(committed)
        record.outcome = "tool_call"
        record.tool_result = result
        record.messages = [m.to_dict() for m in committed]
        state.steps += 1
        state.retries = 0
        state.feedback = None

    def run(self, task: Task) -> Trajectory:
        cfg = self.cfg
        traj = Trajectory(
            task={"identity": task.identity, "instructions": task.instructions, "user": task.user},
            config=asdict(cfg),
            tooldef_tokens=self.tooldef_tokens,
        )
        restart = 0
        while True:
            state = self.start(task, traj.turns, restart)
            if restart == 0:
                traj.bootstrap = [m.to_dict() for m in state.conversation.messages]
            try:
                while True:
                    self.step(state)
            except MaxContextWindowOverflow as exc:
                if cfg.high_effort_overflow_retry and restart < cfg.max_restarts:
                    restart += 1
                    log.info("context overflow, restarting run (%d/%d)", restart, cfg.max_restarts)
                    continue
                term = exc
            except TerminatingException as exc:
                term = exc
            break
        traj.termination = _exc_record(term)
        traj.restarts = restart
        if isinstance(term, Submitted):
            traj.final_text = term.details.get("final", "")
        return traj


def run(
    task: Task,
    cfg: AgentConfig,
    backend: Backend,
    registry: ToolRegistry,
    sandbox: Sandbox,
    tokenizer: Tokenizer = DEFAULT_TOKENIZER,
) -> Trajectory:
    return Agent(backend, registry, sandbox, cfg, tokenizer).run(task)

