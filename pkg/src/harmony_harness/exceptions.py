"""Two-tier exception taxonomy for the agent loop.

NonTerminating exceptions are retried by re-sampling the same prompt;
Terminating exceptions end the run. Every failure the loop can observe is
one of the 19 concrete classes below.
"""

from __future__ import annotations

import enum


class Tier(str, enum.Enum):
    NON_TERMINATING = "NonTerminating"
    TERMINATING = "Terminating"


class HarnessException(Exception):
    """Base for every classified loop failure."""

    tier: Tier

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.__class__.__doc__ or self.__class__.__name__)
        self.message = message or (self.__class__.__doc__ or "").strip()
        self.details = details

    @property
    def kind(self) -> "ExceptionKind":
        return ExceptionKind(type(self).__name__)


class NonTerminatingException(HarnessException):
    tier = Tier.NON_TERMINATING


class TerminatingException(HarnessException):
    tier = Tier.TERMINATING


# -- NonTerminating ---------------------------------------------------------


class LongGeneration(NonTerminatingException):
    """Generation exceeded max_tokens."""


class HarmonyParsingError(NonTerminatingException):
    """Harmony error when parsing LLM completion."""


class HarmonyMessageMissingChannel(NonTerminatingException):
    """A non-system harmony message is missing a channel."""


class MultipleReasoningMessages(NonTerminatingException):
    """Multiple reasoning messages."""


class MultipleFinalMessages(NonTerminatingException):
    """Multiple final messages were found."""


class MultipleToolCalls(NonTerminatingException):
    """Multiple tool calls."""


class NoToolCallNoFinalMessage(NonTerminatingException):
    """No tool call and no final message were received."""


class ToolCallAndFinalMessage(NonTerminatingException):
    """Both a tool call and a final message were received."""


class ToolNameParsingError(NonTerminatingException):
    """Tool name failed to parse."""


class UnknownToolCalled(NonTerminatingException):
    """Unknown tool called."""


class UnknownToolCallArg(NonTerminatingException):
    """Tool call has unknown argument."""


class ToolCallArgParsingError(NonTerminatingException):
    """Failed to parse tool call arguments."""


class ExecutionTimeoutError(NonTerminatingException):
    """The action execution timed out."""


# -- Terminating ------------------------------------------------------------


class Submitted(TerminatingException):
    """The model declared that the agent has finished its task."""


class LimitsExceeded(TerminatingException):
    """The agent reached its step limit."""


class MaxContextWindowOverflow(TerminatingException):
    """The model's context window is full."""


class UnexpectedFinishReason(TerminatingException):
    """The completion finished with an unknown reason."""


class MaxNewTokensExceeded(TerminatingException):
    """The run's cumulative generation budget is spent."""


class RetrialsExceeded(TerminatingException):
    """Retries on NonTerminating exceptions are exhausted."""


NON_TERMINATING: tuple[type[NonTerminatingException], ...] = (
    LongGeneration,
    HarmonyParsingError,
    HarmonyMessageMissingChannel,
    MultipleReasoningMessages,
    MultipleFinalMessages,
    MultipleToolCalls,
    NoToolCallNoFinalMessage,
    ToolCallAndFinalMessage,
    ToolNameParsingError,
    UnknownToolCalled,
    UnknownToolCallArg,
    ToolCallArgParsingError,
    ExecutionTimeoutError,
)

TERMINATING: tuple[type[TerminatingException], ...] = (
    Submitted,
    LimitsExceeded,
    MaxContextWindowOverflow,
    UnexpectedFinishReason,
    MaxNewTokensExceeded,
    RetrialsExceeded,
)

ExceptionKind = enum.Enum(  # type: ignore[misc]
    "ExceptionKind",
    [(cls.__name__, cls.__name__) for cls in NON_TERMINATING + TERMINATING],
    type=str,
)
ExceptionKind.__doc__ = "Closed set of the 19 exception kinds, valued by class name."

_BY_NAME: dict[str, type[HarnessException]] = {
    cls.__name__: cls for cls in NON_TERMINATING + TERMINATING
}


def exception_class(kind: ExceptionKind | str) -> type[HarnessException]:
    return _BY_NAME[ExceptionKind(kind).value]


def classify(kind: ExceptionKind | str) -> Tier:
    return exception_class(kind).tier
