"""Trajectory records and their line-delimited JSON form.

A file holds one ``header`` record, one ``turn`` record per model attempt
and a closing ``termination`` record. Field reference: docs/trajectory-format.md.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable

from .codec import Conversation, Message

FORMAT_VERSION = 1


class TrajectoryFormatError(ValueError):
    pass


class TrajectoryVersionError(TrajectoryFormatError):
    pass


@dataclass
class TurnRecord:
    step: int
    attempt: int
    restart: int = 0
    prompt_tokens: int = 0
    completion: str | None = None
    finish_reason: str | None = None
    completion_tokens: int = 0
    usage_prompt_tokens: int | None = None
    usage_estimated: bool = False
    outcome: str | None = None  # "tool_call" | "final" | None on failure
    recipient: str | None = None
    via_alias: bool = False
    arguments: str | None = None
    tool_result: str | None = None
    exception: dict | None = None  # {"kind", "tier", "message"}
    messages: list[dict] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.exception is not None and self.exception["tier"] == "NonTerminating"


@dataclass
class Trajectory:
    task: dict[str, str] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)
    tooldef_tokens: int = 0
    bootstrap: list[dict] = field(default_factory=list)
    turns: list[TurnRecord] = field(default_factory=list)
    termination: dict | None = None
    final_text: str | None = None
    restarts: int = 0
    version: int = FORMAT_VERSION

    @property
    def termination_kind(self) -> str | None:
        return self.termination["kind"] if self.termination else None

    def conversation(self, restart: int | None = None) -> Conversation:
        """Committed conversation of one run attempt (the last by default)."""
        restart = self.restarts if restart is None else restart
        msgs = [Message.from_dict(m) for m in self.bootstrap]
        for t in self.turns:
            if t.restart == restart:
                msgs += [Message.from_dict(m) for m in t.messages]
        return Conversation(msgs)

    # -- serialization -------------------------------------------------------

    def records(self) -> Iterable[dict]:
        yield {
            "record": "header",
            "version": self.version,
            "task": self.task,
            "config": self.config,
            "tooldef_tokens": self.tooldef_tokens,
            "bootstrap": self.bootstrap,
        }
        for t in self.turns:
            yield {"record": "turn", **asdict(t)}
        yield {
            "record": "termination",
            "termination": self.termination,
            "final_text": self.final_text,
            "restarts": self.restarts,
        }

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in self.records())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str, source: str = "<string>") -> "Trajectory":
        traj = None
        turn_keys = {f.name for f in fields(TurnRecord)}
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        for lineno, line in enumerate(lines, start=1):
            where = f"{source}:{lineno}"
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TrajectoryFormatError(f"{where}: invalid JSON ({exc.msg})") from None
            kind = rec.get("record") if isinstance(rec, dict) else None
            if traj is None:
                if kind != "header":
                    raise TrajectoryFormatError(f"{where}: expected a header record")
                if rec.get("version") != FORMAT_VERSION:
                    raise TrajectoryVersionError(
                        f"{where}: unsupported trajectory version {rec.get('version')!r} (expected {FORMAT_VERSION})"
                    )
                traj = cls(
                    task=rec.get("task", {}),
                    config=rec.get("config", {}),
                    tooldef_tokens=rec.get("tooldef_tokens", 0),
                    bootstrap=rec.get("bootstrap", []),
                )
            elif traj.termination is not None:
                raise TrajectoryFormatError(f"{where}: record after termination")
            elif kind == "turn":
                extra = set(rec) - turn_keys - {"record"}
                if extra:
                    raise TrajectoryFormatError(f"{where}: unknown turn fields {sorted(extra)}")
                try:
                    traj.turns.append(TurnRecord(**{k: v for k, v in rec.items() if k != "record"}))
                except TypeError as exc:
                    raise TrajectoryFormatError(f"{where}: {exc}") from None
            elif kind == "termination":
                if not rec.get("termination"):
                    raise TrajectoryFormatError(f"{where}: empty termination record")
                traj.termination = rec["termination"]
                traj.final_text = rec.get("final_text")
                traj.restarts = rec.get("restarts", 0)
            else:
                raise TrajectoryFormatError(f"{where}: unknown record type {kind!r}")
        if traj is None:
            raise TrajectoryFormatError(f"{source}: empty trajectory file")
        if traj.termination is None:
            raise TrajectoryFormatError(f"{source}:{len(lines)}: truncated, no termination record")
        return traj

    @classmethod
    def load(cls, path: str | Path) -> "Trajectory":
        return cls.from_jsonl(Path(path).read_text(), source=str(path))


def render_transcript(traj: Trajectory) -> str:
    """Human-readable transcript; retries and restarts are annotated."""
    out = [f"== trajectory v{traj.version} | tooldef tokens {traj.tooldef_tokens} =="]
    for m in traj.bootstrap:
        first = m["content"].splitlines()[0] if m["content"] else ""
        out.append(f"[{m['role']}] {first}")
    restart = 0
    for i, t in enumerate(traj.turns, start=1):
        if t.restart != restart:
            restart = t.restart
            out.append(f"== restart {restart} (context window overflow) ==")
        tag = f"turn {i} | step {t.step + 1}"
        if t.attempt > 1:
            tag += f" | RETRY {t.attempt - 1}"
        out.append(f"-- {tag} | prompt {t.prompt_tokens} tok --")
        for m in t.messages:
            if m["role"] == "tool":
                continue
            label = m.get("channel", m["role"])
            if m.get("recipient"):
                label += f" -> {m['recipient']}"
            out.append(f"  [{label}] {m['content']}")
        if t.tool_result is not None:
            out.append(f"  [tool result] {t.tool_result}")
        if t.exception:
            exc = t.exception
            out.append(f"  !! {exc['tier']} {exc['kind']}: {exc['message']}")
    if traj.termination:
        out.append(f"== terminated: {traj.termination['kind']} ==")
    if traj.final_text is not None:
        out.append(traj.final_text)
    return "\n".join(out)
