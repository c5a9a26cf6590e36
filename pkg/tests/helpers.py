"""Builders for model completions and conversations used across tests."""

from __future__ import annotations

import json
import random
import string

from harmony_harness.codec import (
    CALL,
    END,
    RETURN,
    SPECIAL_TOKENS,
    Channel,
    Conversation,
    Message,
    Role,
)


def analysis(text: str = "thinking") -> str:
    return f"<|channel|>analysis<|message|>{text}{END}"


def call(recipient: str, args: dict | str, thought: str | None = "let me look") -> str:
    """Completion text as the model emits it after the ``<|start|>assistant`` opener."""
    body = args if isinstance(args, str) else json.dumps(args)
    head = ""
    if thought is not None:
        head = analysis(thought) + "<|start|>assistant"
    return f"{head}<|channel|>commentary to={recipient} <|constrain|>json<|message|>{body}{CALL}"


def final(text: str = "done", thought: str | None = "all good") -> str:
    head = analysis(thought) + "<|start|>assistant" if thought is not None else ""
    return f"{head}<|channel|>final<|message|>{text}{RETURN}"


ALPHABET = string.ascii_letters + string.digits + " \n\t.,;:{}[]\"'<>|=_-/\\é中😀\r"


def random_content(rng: random.Random, max_len: int = 40) -> str:
    while True:
        s = "".join(rng.choice(ALPHABET) for _ in range(rng.randint(0, max_len)))
        if not any(t in s for t in SPECIAL_TOKENS):
            return s


TOOL_NAMES = [
    "repo_browser.print_tree",
    "repo_browser.search",
    "repo_browser.open_file",
    "repo_browser.apply_patch",
    "container.exec",
    "repo_browser.list_files",
]


def random_conversation(rng: random.Random, max_turns: int = 6) -> Conversation:
    msgs = [
        Message(Role.SYSTEM, random_content(rng)),
        Message(Role.DEVELOPER, random_content(rng)),
        Message(Role.USER, random_content(rng)),
    ]
    turns = rng.randint(0, max_turns)
    for i in range(turns):
        if rng.random() < 0.7:
            msgs.append(Message(Role.ASSISTANT, random_content(rng), channel=Channel.ANALYSIS))
        if rng.random() < 0.1:
            msgs.append(Message(Role.ASSISTANT, random_content(rng), channel=Channel.COMMENTARY))
        last = i == turns - 1
        r = rng.random()
        if last and r < 0.3:
            msgs.append(Message(Role.ASSISTANT, random_content(rng), channel=Channel.FINAL))
        elif r < 0.9 or last:
            name = rng.choice(TOOL_NAMES)
            ctype = rng.choice(["json", None])
            msgs.append(
                Message(Role.ASSISTANT, random_content(rng), channel=Channel.COMMENTARY, recipient=name, content_type=ctype)
            )
            msgs.append(
                Message(Role.TOOL, random_content(rng), channel=Channel.COMMENTARY, recipient="assistant", name=name)
            )
        else:
            msgs.append(Message(Role.USER, random_content(rng)))
    return Conversation(msgs)


FIX_PATCH = (
    "*** Begin Patch\n"
    "*** Update File: src/pkg/core.py\n"
    "@@ def add(a, b):\n"
    "-    return a - b\n"
    "+    return a + b\n"
    "*** End Patch"
)


def six_turn_script() -> list[str]:
    """print_tree -> search -> open_file -> apply_patch -> exec -> final, against the
    ``workspace`` fixture layout."""
    return [
        call("repo_browser.print_tree", {"path": ".", "depth": 2}, "Look at the layout first."),
        call("repo_browser.search", {"path": "src", "query": "def add"}, "Find add."),
        call("repo_browser.open_file", {"path": "src/pkg/core.py", "line_start": 1, "line_end": 3}),
        call("repo_browser.apply_patch", {"patch": FIX_PATCH}, "Subtraction should be addition."),
        call("container.exec", {"cmd": ["python3", "-c", "import sys; sys.path.insert(0, 'src'); from pkg.core import add; print(add(2, 3))"]}),
        final("Fixed add() to return a + b; it now prints 5.", "The fix works."),
    ]
