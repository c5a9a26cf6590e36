"""Workspace-confined tool execution.

``container.exec`` shells out; the repo_browser tools are implemented
natively so their output is deterministic. Tool failures the model can
recover from come back as stable ``Error: ...`` strings (see
docs/tool-errors.md); only timeouts raise into the agent loop.
"""

from __future__ import annotations

import os
import re
import shlex
import shutil
import signal
import subprocess
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

from .exceptions import ExecutionTimeoutError
from .patch import PatchError, apply_patch_text
from .registry import ToolCall
from .workspace import WorkspaceEscapeError, relpath, resolve_in_workspace

KILL_GRACE = 2.0

ERR_ESCAPE = "Error: path escapes workspace: {path}"
ERR_NOT_FOUND = "Error: path not found: {path}"
ERR_NOT_A_FILE = "Error: not a file: {path}"
ERR_NO_HANDLER = "Error: tool {name} is not implemented in this sandbox"
NO_MATCHES = "No matches found."


class ToolError(Exception):
    """Model-recoverable tool failure; ``str(err)`` is what the model sees."""


class SandboxEscapeError(ToolError, WorkspaceEscapeError):
    pass


@dataclass(frozen=True)
class SandboxConfig:
    workspace_root: Path
    timeout: float = 60.0
    output_cap: int = 1_000_000
    isolation: str = "subprocess-cwd"
    container: str | None = None
    container_workdir: str = "/workspace"
    search_regex: bool = False
    ignore: tuple[str, ...] = (".git",)

    def __post_init__(self):
        object.__setattr__(self, "workspace_root", Path(self.workspace_root))
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.output_cap <= 0:
            raise ValueError("output_cap must be positive")
        if self.isolation not in ("subprocess-cwd", "container"):
            raise ValueError(f"unknown isolation {self.isolation!r}")
        if self.isolation == "container" and not self.container:
            raise ValueError("container isolation needs a container name")


@dataclass
class ExecResult:
    exit_code: int
    output: str
    duration: float
    truncated: bool = False

    def for_model(self, cap: int) -> str:
        text = self.output
        if self.truncated:
            text += f"\n[output truncated to {cap} bytes]"
        if self.exit_code != 0:
            text += f"\n[exit code: {self.exit_code}]"
        return text


def _confine(cfg: SandboxConfig, path: str) -> Path:
    try:
        return resolve_in_workspace(cfg.workspace_root, path)
    except WorkspaceEscapeError:
        raise SandboxEscapeError(ERR_ESCAPE.format(path=path)) from None


def shell_argv(cmd: str | list[str], cfg: SandboxConfig) -> list[str]:
    if isinstance(cmd, list):
        # a single element is a whole shell line, e.g. ["ls -la | head"]
        cmd = cmd[0] if len(cmd) == 1 else shlex.join(cmd)
    if cfg.isolation == "container":
        return ["docker", "exec", "-w", cfg.container_workdir, cfg.container, "sh", "-c", cmd]
    shell = shutil.which("bash") or "/bin/sh"
    return [shell, "-c", cmd]


def exec_command(cmd: str | list[str], cfg: SandboxConfig, timeout: float | None = None) -> ExecResult:
    """Run ``cmd`` in a shell rooted at the workspace, stdout and stderr merged."""
    timeout = cfg.timeout if timeout is None else min(timeout, cfg.timeout)
    root = cfg.workspace_root
    if not root.is_dir():
        raise ToolError(ERR_NOT_FOUND.format(path=root))
    cap = cfg.output_cap
    buf = bytearray()
    truncated = False

    start = time.monotonic()
    proc = subprocess.Popen(
        shell_argv(cmd, cfg),
        cwd=root,
        stdin=subprocess.DEVNULL,
        stdout=subprocess.PIPE,
        stderr=subprocess.STDOUT,
        start_new_session=True,
    )

    def pump():
        nonlocal truncated
        fd = proc.stdout.fileno()
        while True:
            chunk = os.read(fd, 65536)
            if not chunk:
                break
            room = cap - len(buf)
            if len(chunk) > room:
                truncated = True
            if room > 0:
                buf.extend(chunk[:room])
            # keep draining past the cap so the child never blocks on a full pipe

    reader = threading.Thread(target=pump, daemon=True)
    reader.start()
    try:
        exit_code = proc.wait(timeout=timeout)
    except subprocess.TimeoutExpired:
        _kill_group(proc)
        proc.wait()
        reader.join(KILL_GRACE)
        proc.stdout.close()
        raise ExecutionTimeoutError(
            f"command timed out after {timeout:g}s", timeout=timeout, command=cmd
        ) from None
    # Reap anything the command left running in its session.
    _kill_group(proc)
    reader.join(KILL_GRACE)
    proc.stdout.close()
    output = bytes(buf).decode("utf-8", "replace")
    return ExecResult(exit_code, output, time.monotonic() - start, truncated)


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass


def _walk_entries(cfg: SandboxConfig, directory: Path):
    try:
        entries = sorted(os.scandir(directory), key=lambda e: e.name)
    except OSError:
        return []
    return [e for e in entries if e.name not in cfg.ignore]


def print_tree(path: str, depth: int | None = None, cfg: SandboxConfig = None) -> str:
    """Indented listing, children sorted by name, directories suffixed with ``/``.

    ``depth`` 0 lists only the root entry; ``None`` is unlimited. Symlinked
    directories are listed but not descended into.
    """
    target = _confine(cfg, path)
    if not target.exists():
        raise ToolError(ERR_NOT_FOUND.format(path=path))
    label = relpath(cfg.workspace_root, target)
    if not target.is_dir():
        return label
    lines = [label.rstrip("/") + "/"]

    def walk(directory: Path, level: int):
        if depth is not None and level > depth:
            return
        for entry in _walk_entries(cfg, directory):
            is_dir = entry.is_dir(follow_symlinks=False)
            lines.append("  " * level + entry.name + ("/" if is_dir else ""))
            if is_dir:
                walk(Path(entry.path), level + 1)

    walk(target, 1)
    return "\n".join(lines)


@dataclass(frozen=True)
class SearchHit:
    file: str
    line: int
    text: str

    def __str__(self) -> str:
        return f"{self.file}:{self.line}: {self.text}"


def _iter_files(cfg: SandboxConfig, target: Path) -> list[Path]:
    if target.is_file():
        return [target]
    files = []
    for dirpath, dirnames, filenames in os.walk(target):
        dirnames[:] = [d for d in dirnames if d not in cfg.ignore]
        for name in filenames:
            p = Path(dirpath, name)
            if name not in cfg.ignore and not p.is_symlink():
                files.append(p)
    root = cfg.workspace_root.resolve()
    return sorted(files, key=lambda p: p.relative_to(root).as_posix())


def search(path: str, query: str, max_results: int | None = None, cfg: SandboxConfig = None) -> list[SearchHit]:
    """Substring (or regex, if configured) matches, in lexicographic file order."""
    target = _confine(cfg, path)
    if not target.exists():
        raise ToolError(ERR_NOT_FOUND.format(path=path))
    if cfg.search_regex:
        try:
            pattern = re.compile(query)
        except re.error as exc:
            raise ToolError(f"Error: invalid regex: {exc}") from None
        matches = lambda line: pattern.search(line) is not None  # noqa: E731
    else:
        matches = lambda line: query in line  # noqa: E731
    hits: list[SearchHit] = []
    if max_results == 0:
        return hits
    for f in _iter_files(cfg, target):
        try:
            data = f.read_bytes()
        except OSError:
            continue
        if b"\x00" in data[:8192]:
            continue
        name = relpath(cfg.workspace_root, f)
        for n, line in enumerate(data.decode("utf-8", "replace").split("\n"), start=1):
            if matches(line):
                hits.append(SearchHit(name, n, line))
                if max_results is not None and len(hits) >= max_results:
                    return hits
    return hits


def format_hits(hits: list[SearchHit]) -> str:
    return "\n".join(map(str, hits)) if hits else NO_MATCHES


def open_file(path: str, line_start: int | None = None, line_end: int | None = None, cfg: SandboxConfig = None) -> str:
    target = _confine(cfg, path)
    if not target.exists():
        raise ToolError(ERR_NOT_FOUND.format(path=path))
    if not target.is_file():
        raise ToolError(ERR_NOT_A_FILE.format(path=path))
    text = target.read_bytes().decode("utf-8", "replace")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    lo = max(1, line_start or 1)
    hi = min(len(lines), len(lines) if line_end is None else line_end)
    return "\n".join(f"L{i}: {lines[i - 1]}" for i in range(lo, hi + 1))


class Sandbox:
    """Dispatch validated ToolCalls to implementations; one call at a time."""

    def __init__(self, cfg: SandboxConfig, handlers: Mapping[str, Callable[[ToolCall], str]] | None = None):
        self.cfg = cfg
        self._lock = threading.Lock()
        self.handlers: dict[str, Callable[[ToolCall], str]] = {
            "repo_browser.print_tree": lambda c: print_tree(c.args["path"], c.args.get("depth"), self.cfg),
            "repo_browser.search": lambda c: format_hits(
                search(c.args["path"], c.args["query"], c.args.get("max_results"), self.cfg)
            ),
            "repo_browser.open_file": lambda c: open_file(
                c.args["path"], c.args.get("line_start"), c.args.get("line_end"), self.cfg
            ),
            "repo_browser.apply_patch": lambda c: apply_patch_text(c.args["patch"], self.cfg.workspace_root).summary(),
            "container.exec": self._exec,
        }
        self.handlers.update(handlers or {})

    def _exec(self, call: ToolCall) -> str:
        result = exec_command(call.args["cmd"], self.cfg, call.args.get("timeout"))
        return result.for_model(self.cfg.output_cap)

    def execute(self, call: ToolCall) -> str:
        name = call.spec.qualified_name
        handler = self.handlers.get(name)
        if handler is None:
            return ERR_NO_HANDLER.format(name=name)
        with self._lock:
            try:
                return handler(call)
            except ToolError as exc:
                return str(exc)
            except PatchError as exc:
                return f"Error: {exc}"
            except OSError as exc:
                return f"Error: {exc.strerror or exc}"
