"""Harmony wire format: render messages to delimiter-marked text and parse
model completions back into messages.

A rendered message is::

    <|start|>{header}<|message|>{content}{terminal}

where the header is the author (role, or the tool's qualified name for tool
results), then ``<|channel|>channel``, `` to=recipient`` and
`` <|constrain|>content_type`` when present. Tool calls end with
``<|call|>``; everything else ends with ``<|end|>``. The parser also
accepts ``<|return|>``, any header field order, and a missing terminal on
the last message (servers strip stop strings).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

from .exceptions import (
    HarmonyMessageMissingChannel,
    HarmonyParsingError,
    MultipleFinalMessages,
    MultipleReasoningMessages,
    MultipleToolCalls,
    NoToolCallNoFinalMessage,
    ToolCallAndFinalMessage,
    ToolNameParsingError,
)

if TYPE_CHECKING:
    from .registry import ToolSpec

START = "<|start|>"
MESSAGE = "<|message|>"
END = "<|end|>"
CALL = "<|call|>"
RETURN = "<|return|>"
CHANNEL = "<|channel|>"
CONSTRAIN = "<|constrain|>"
RECIPIENT_PREFIX = "to="

TERMINALS = (END, CALL, RETURN)
SPECIAL_TOKENS = (START, MESSAGE, END, CALL, RETURN, CHANNEL, CONSTRAIN)
# Sampling stops here; <|end|> is not a stop because analysis precedes the action.
ASSISTANT_STOP_TOKENS = (CALL, RETURN)
ASSISTANT_OPENER = START + "assistant"

_SPECIAL_RE = re.compile("|".join(re.escape(t) for t in SPECIAL_TOKENS))
QUALIFIED_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*(?:\.[A-Za-z_][A-Za-z0-9_\-]*)*")
_FIELD_RE = re.compile(r"[^\s<>|]+")


class CodecError(ValueError):
    """Structurally invalid message or conversation handed to the renderer."""


class Role(str, enum.Enum):
    SYSTEM = "system"
    DEVELOPER = "developer"
    USER = "user"
    ASSISTANT = "assistant"
    TOOL = "tool"


class Channel(str, enum.Enum):
    ANALYSIS = "analysis"
    COMMENTARY = "commentary"
    FINAL = "final"


_NAMED_ROLES = {r.value for r in Role if r is not Role.TOOL}


@dataclass(frozen=True)
class Message:
    role: Role
    content: str = ""
    channel: Channel | None = None
    recipient: str | None = None
    content_type: str | None = None
    # Author of a tool-role message: the qualified name of the tool that ran.
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        if self.channel is not None:
            object.__setattr__(self, "channel", Channel(self.channel))

    @property
    def is_tool_call(self) -> bool:
        return self.role is Role.ASSISTANT and self.recipient is not None

    def to_dict(self) -> dict:
        d = {"role": self.role.value, "content": self.content}
        if self.channel is not None:
            d["channel"] = self.channel.value
        for key in ("recipient", "content_type", "name"):
            value = getattr(self, key)
            if value is not None:
                d[key] = value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Message":
        return cls(
            role=Role(d["role"]),
            content=d.get("content", ""),
            channel=d.get("channel"),
            recipient=d.get("recipient"),
            content_type=d.get("content_type"),
            name=d.get("name"),
        )


@dataclass
class Conversation:
    messages: list[Message] = field(default_factory=list)

    def append(self, msg: Message) -> None:
        self.messages.append(msg)

    def extend(self, msgs: Iterable[Message]) -> None:
        self.messages.extend(msgs)

    def validate(self) -> None:
        msgs = self.messages
        bootstrap = [m.role for m in msgs[:3]]
        if bootstrap != [Role.SYSTEM, Role.DEVELOPER, Role.USER]:
            raise CodecError(
                "conversation must start with system, developer and user messages, "
                f"got {[r.value for r in bootstrap]}"
            )
        for i, m in enumerate(msgs[3:], start=3):
            if m.role in (Role.SYSTEM, Role.DEVELOPER):
                raise CodecError(f"message {i}: {m.role.value} message after bootstrap")
            prev = msgs[i - 1]
            if m.role is Role.TOOL:
                if not (prev.is_tool_call and prev.recipient == m.name):
                    raise CodecError(f"message {i}: tool result for {m.name!r} does not follow its call")
            elif prev.is_tool_call:
                raise CodecError(f"message {i - 1}: tool call {prev.recipient!r} has no result")

    def __len__(self) -> int:
        return len(self.messages)


@dataclass(frozen=True)
class TurnOutcome:
    """Validated content of one completion: optional reasoning plus one action."""

    reasoning: Message | None
    action: Message
    preambles: tuple[Message, ...] = ()

    @property
    def is_tool_call(self) -> bool:
        return self.action.is_tool_call

    @property
    def is_final(self) -> bool:
        return not self.action.is_tool_call


# -- rendering --------------------------------------------------------------


def _check_field(label: str, value: str) -> None:
    if not _FIELD_RE.fullmatch(value):
        raise CodecError(f"{label} {value!r} is not a valid header field")


def _check_message(msg: Message) -> None:
    if _SPECIAL_RE.search(msg.content):
        raise CodecError("message content contains a special token")
    if msg.role is Role.TOOL:
        if not msg.name or not QUALIFIED_NAME_RE.fullmatch(msg.name):
            raise CodecError("tool message needs the qualified name of the tool it answers")
    elif msg.name is not None:
        raise CodecError(f"{msg.role.value} message cannot carry a tool author name")
    if msg.role is Role.ASSISTANT and msg.channel is None:
        raise CodecError("assistant message needs a channel")
    if msg.recipient is not None:
        if not QUALIFIED_NAME_RE.fullmatch(msg.recipient):
            raise CodecError(f"recipient {msg.recipient!r} is not a qualified name")
        if msg.role is Role.ASSISTANT and msg.channel is Channel.FINAL:
            raise CodecError("a final-channel message cannot address a tool")
    if msg.content_type is not None:
        _check_field("content type", msg.content_type)


def escape_special_tokens(text: str) -> str:
    """Defuse special-token strings in untrusted text (tool output, task text)
    by inserting a zero-width space after the ``<``."""
    return _SPECIAL_RE.sub(lambda m: "<\u200b" + m.group()[1:], text)


def render_header(msg: Message) -> str:
    header = msg.name if msg.role is Role.TOOL else msg.role.value
    if msg.channel is not None:
        header += CHANNEL + msg.channel.value
    if msg.recipient is not None:
        header += f" {RECIPIENT_PREFIX}{msg.recipient}"
    if msg.content_type is not None:
        header += f" {CONSTRAIN}{msg.content_type}"
    return header


def render_message(msg: Message) -> str:
    _check_message(msg)
    terminal = CALL if msg.is_tool_call else END
    return f"{START}{render_header(msg)}{MESSAGE}{msg.content}{terminal}"


def system_content(
    identity: str,
    reasoning_effort: str = "medium",
    *,
    knowledge_cutoff: str | None = "2024-06",
    current_date: str | None = None,
    tool_namespaces: Sequence[str] = (),
) -> str:
    """Body of the bootstrap system message (tool definitions are added at render time)."""
    lines = [identity]
    if knowledge_cutoff:
        lines.append(f"Knowledge cutoff: {knowledge_cutoff}")
    if current_date:
        lines.append(f"Current date: {current_date}")
    lines += ["", f"Reasoning: {reasoning_effort}", ""]
    lines.append("# Valid channels: analysis, commentary, final. Channel must be included for every message.")
    if tool_namespaces:
        names = ", ".join(f"'{ns}'" for ns in tool_namespaces)
        lines.append(f"Calls to these tools must go to the commentary channel: {names}.")
    return "\n".join(lines)


def developer_content(instructions: str) -> str:
    return f"# Instructions\n\n{instructions}"


def render_conversation(
    conv: Conversation,
    tools: "Sequence[ToolSpec]" = (),
    placement: str = "system",
) -> str:
    """Render the whole prompt, ending with the assistant-turn opener."""
    from .registry import render_tool_defs

    if placement not in ("system", "developer"):
        raise CodecError(f"unknown tool placement {placement!r}")
    conv.validate()
    target = Role.SYSTEM if placement == "system" else Role.DEVELOPER
    block = render_tool_defs(tools) if tools else None
    parts = []
    for i, msg in enumerate(conv.messages):
        if block is not None and i < 2 and msg.role is target:
            msg = Message(role=msg.role, content=f"{msg.content}\n\n{block}")
        parts.append(render_message(msg))
    parts.append(ASSISTANT_OPENER)
    return "".join(parts)


# -- parsing ----------------------------------------------------------------


def _parse_header(header: str) -> dict:
    fields: dict = {}
    parts = re.split(r"(<\|channel\|>|<\|constrain\|>|\s+)", header)
    pending = None
    author = None
    for part in parts:
        if not part or part.isspace():
            continue
        if part in (CHANNEL, CONSTRAIN):
            if pending is not None:
                raise HarmonyParsingError(f"dangling {pending} in header {header!r}")
            pending = part
            continue
        if pending == CHANNEL:
            key, value = "channel", part
        elif pending == CONSTRAIN:
            key, value = "content_type", part
        elif part.startswith(RECIPIENT_PREFIX):
            key, value = "recipient", part[len(RECIPIENT_PREFIX):]
            if not QUALIFIED_NAME_RE.fullmatch(value):
                raise ToolNameParsingError(f"cannot parse tool name {value!r}", recipient=value)
        elif author is None:
            author = part
            pending = None
            continue
        else:
            key, value = "content_type", part
        pending = None
        if key in fields:
            raise HarmonyParsingError(f"duplicate {key} in header {header!r}")
        fields[key] = value
    if pending is not None:
        raise HarmonyParsingError(f"dangling {pending} in header {header!r}")
    if author is None:
        raise HarmonyParsingError(f"header {header!r} has no author")

    if author in _NAMED_ROLES:
        fields["role"] = Role(author)
    elif QUALIFIED_NAME_RE.fullmatch(author):
        fields["role"] = Role.TOOL
        fields["name"] = author
    else:
        raise HarmonyParsingError(f"unknown author {author!r}")
    if "channel" in fields:
        try:
            fields["channel"] = Channel(fields["channel"])
        except ValueError:
            raise HarmonyParsingError(f"unknown channel {fields['channel']!r}") from None
    return fields


def parse_messages(text: str) -> list[Message]:
    """Split delimiter-marked text into messages without channel checks.

    Text that does not begin with ``<|start|>`` continues the assistant-turn
    opener the prompt ended with.
    """
    if not text:
        return []
    if not text.startswith(START):
        text = ASSISTANT_OPENER + text
    msgs = []
    pos = 0
    n = len(text)
    while pos < n:
        if not text.startswith(START, pos):
            raise HarmonyParsingError(f"expected {START} at offset {pos}")
        head_start = pos + len(START)
        mi = text.find(MESSAGE, head_start)
        if mi < 0:
            raise HarmonyParsingError(f"message at offset {pos} has no {MESSAGE}")
        header = text[head_start:mi]
        for tok in (START, END, CALL, RETURN):
            if tok in header:
                raise HarmonyParsingError(f"unexpected {tok} in header at offset {pos}")
        fields = _parse_header(header)
        body_start = mi + len(MESSAGE)
        m = _SPECIAL_RE.search(text, body_start)
        if m is None:
            body_end = next_pos = n
        elif m.group() in TERMINALS:
            body_end, next_pos = m.start(), m.end()
        else:
            raise HarmonyParsingError(f"unexpected {m.group()} inside message body at offset {m.start()}")
        msgs.append(Message(content=text[body_start:body_end], **fields))
        pos = next_pos
    return msgs


def parse_completion(text: str) -> list[Message]:
    msgs = parse_messages(text)
    for i, m in enumerate(msgs):
        if m.role is not Role.SYSTEM and m.channel is None:
            raise HarmonyMessageMissingChannel(f"message {i} ({m.role.value}) has no channel")
    return msgs


def validate_turn(msgs: Sequence[Message]) -> TurnOutcome:
    """Classify one completion's messages into (reasoning, action).

    Assistant messages with a recipient are tool calls, ``final`` messages
    are final answers, ``analysis`` messages are reasoning and recipient-less
    ``commentary`` messages are preambles. Checks apply in order: too many
    reasoning, too many finals, too many calls, both, neither.
    """
    reasoning, finals, calls, preambles = [], [], [], []
    for m in msgs:
        if m.role is not Role.ASSISTANT:
            raise HarmonyParsingError(f"completion contains a {m.role.value} message")
        if m.recipient is not None:
            calls.append(m)
        elif m.channel is Channel.FINAL:
            finals.append(m)
        elif m.channel is Channel.ANALYSIS:
            reasoning.append(m)
        else:
            preambles.append(m)
    if len(reasoning) > 1:
        raise MultipleReasoningMessages(f"{len(reasoning)} analysis messages")
    if len(finals) > 1:
        raise MultipleFinalMessages(f"{len(finals)} final messages")
    if len(calls) > 1:
        raise MultipleToolCalls(f"{len(calls)} tool calls")
    if calls and finals:
        raise ToolCallAndFinalMessage()
    if not calls and not finals:
        raise NoToolCallNoFinalMessage()
    return TurnOutcome(
        reasoning=reasoning[0] if reasoning else None,
        action=(calls or finals)[0],
        preambles=tuple(preambles),
    )
