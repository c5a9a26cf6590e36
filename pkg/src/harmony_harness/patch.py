"""Parser and atomic applier for the ``*** Begin Patch`` envelope format.

Grammar (one item per line; see docs/patch-format.md)::

    *** Begin Patch
    *** Add File: <path>        followed by "+"-prefixed content lines
    *** Delete File: <path>
    *** Update File: <path>
    *** Move to: <path>         optional, directly after Update File
    @@ [anchor]                 starts a hunk; optional before the first hunk
     context / -deleted / +inserted
    *** End of File             pins the current hunk to the end of the file
    *** End Patch

Hunks are located by exact match of their context and deleted lines, then
with trailing whitespace ignored. A match must be unique at or after the
previous hunk; there is no offset search.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from .workspace import WorkspaceEscapeError, relpath, resolve_in_workspace

BEGIN = "*** Begin Patch"
END = "*** End Patch"
ADD = "*** Add File: "
DELETE = "*** Delete File: "
UPDATE = "*** Update File: "
MOVE = "*** Move to: "
EOF_MARKER = "*** End of File"
HUNK = "@@"


class PatchError(ValueError):
    pass


class PatchSyntaxError(PatchError):
    pass


class PatchApplyError(PatchError):
    pass


@dataclass(frozen=True)
class AddFile:
    path: str
    lines: tuple[str, ...] = ()


@dataclass(frozen=True)
class DeleteFile:
    path: str


@dataclass(frozen=True)
class Hunk:
    lines: tuple[tuple[str, str], ...]
    anchor: str | None = None
    end_of_file: bool = False

    @property
    def old(self) -> list[str]:
        return [t for op, t in self.lines if op != "+"]

    @property
    def new(self) -> list[str]:
        return [t for op, t in self.lines if op != "-"]


@dataclass(frozen=True)
class UpdateFile:
    path: str
    hunks: tuple[Hunk, ...] = ()
    move_to: str | None = None


FileOp = Union[AddFile, DeleteFile, UpdateFile]


@dataclass(frozen=True)
class Patch:
    operations: tuple[FileOp, ...]


@dataclass
class ApplyReport:
    added: int = 0
    modified: int = 0
    deleted: int = 0
    files: dict[str, str] = field(default_factory=dict)

    def summary(self) -> str:
        code = {"added": "A", "modified": "M", "deleted": "D", "moved": "M"}
        lines = ["Success. Updated the following files:"]
        lines += [f"{code[status]} {path}" for path, status in self.files.items()]
        return "\n".join(lines)


# -- parsing ----------------------------------------------------------------


def _header_path(line: str, prefix: str, lineno: int) -> str:
    path = line[len(prefix):].strip()
    if not path:
        raise PatchSyntaxError(f"line {lineno}: empty path in {prefix.strip()!r}")
    return path


def parse_patch(text: str) -> Patch:
    lines = text.split("\n")
    lo, hi = 0, len(lines)
    while lo < hi and not lines[lo].strip():
        lo += 1
    while hi > lo and not lines[hi - 1].strip():
        hi -= 1
    if lo == hi or lines[lo].rstrip() != BEGIN:
        raise PatchSyntaxError(f"patch must start with {BEGIN!r}")
    if hi - lo < 2 or lines[hi - 1].rstrip() != END:
        raise PatchSyntaxError(f"patch must end with {END!r}")

    ops: list[FileOp] = []
    i = lo + 1
    end = hi - 1

    def is_header(s: str) -> bool:
        return s.startswith("*** ") and not s.startswith(EOF_MARKER)

    while i < end:
        line = lines[i]
        lineno = i + 1
        if line.startswith(ADD):
            path = _header_path(line, ADD, lineno)
            i += 1
            body = []
            while i < end and not is_header(lines[i]):
                if not lines[i].startswith("+"):
                    raise PatchSyntaxError(f"line {i + 1}: add-file lines must start with '+'")
                body.append(lines[i][1:])
                i += 1
            ops.append(AddFile(path, tuple(body)))
        elif line.startswith(DELETE):
            ops.append(DeleteFile(_header_path(line, DELETE, lineno)))
            i += 1
        elif line.startswith(UPDATE):
            path = _header_path(line, UPDATE, lineno)
            i += 1
            move_to = None
            if i < end and lines[i].startswith(MOVE):
                move_to = _header_path(lines[i], MOVE, i + 1)
                i += 1
            hunks, i = _parse_hunks(lines, i, end, is_header)
            if not hunks and move_to is None:
                raise PatchSyntaxError(f"line {lineno}: update of {path} has no hunks")
            ops.append(UpdateFile(path, tuple(hunks), move_to))
        elif not line.strip():
            i += 1
        else:
            raise PatchSyntaxError(f"line {lineno}: unknown operation header {line!r}")
    if not ops:
        raise PatchSyntaxError("patch contains no file operations")
    return Patch(tuple(ops))


def _parse_hunks(lines, i, end, is_header):
    hunks: list[Hunk] = []
    body: list[tuple[str, str]] = []
    anchor = None
    started = False
    eof = False

    def flush(at: int):
        if started and not body:
            raise PatchSyntaxError(f"line {at}: truncated hunk (no lines)")
        if body:
            hunks.append(Hunk(tuple(body), anchor, eof))

    while i < end and not is_header(lines[i]):
        line = lines[i]
        if line.startswith(HUNK):
            flush(i + 1)
            body, eof, started = [], False, True
            anchor = line[len(HUNK):]
            anchor = (anchor[1:] if anchor.startswith(" ") else anchor).rstrip() or None
        elif line.startswith(EOF_MARKER):
            if not body:
                raise PatchSyntaxError(f"line {i + 1}: {EOF_MARKER!r} outside a hunk")
            eof = True
        elif eof:
            raise PatchSyntaxError(f"line {i + 1}: hunk lines after {EOF_MARKER!r}")
        elif line[:1] in (" ", "-", "+"):
            body.append((line[0], line[1:]))
            started = True
        elif line == "":
            # Models often drop the leading space of blank context lines.
            body.append((" ", ""))
            started = True
        else:
            raise PatchSyntaxError(f"line {i + 1}: invalid hunk line {line!r}")
        i += 1
    flush(i + 1)
    return hunks, i


def format_patch(patch: Patch) -> str:
    """Serialize a Patch back to envelope text (inverse of parse_patch)."""
    out = [BEGIN]
    for op in patch.operations:
        if isinstance(op, AddFile):
            out.append(ADD + op.path)
            out += ["+" + line for line in op.lines]
        elif isinstance(op, DeleteFile):
            out.append(DELETE + op.path)
        else:
            out.append(UPDATE + op.path)
            if op.move_to:
                out.append(MOVE + op.move_to)
            for h in op.hunks:
                out.append(HUNK + (" " + h.anchor if h.anchor else ""))
                out += [o + t for o, t in h.lines]
                if h.end_of_file:
                    out.append(EOF_MARKER)
    out.append(END)
    return "\n".join(out) + "\n"


# -- applying ---------------------------------------------------------------


def _find_unique(haystack: list[str], needle: list[str], positions, path: str, n: int) -> int:
    for norm in (lambda s: s, lambda s: s.rstrip()):
        want = [norm(s) for s in needle]
        hits = [p for p in positions if [norm(s) for s in haystack[p:p + len(needle)]] == want]
        if len(hits) == 1:
            return hits[0]
        if len(hits) > 1:
            raise PatchApplyError(f"{path}: hunk {n} context is ambiguous ({len(hits)} matches)")
    raise PatchApplyError(f"{path}: hunk {n} context not found")


def apply_hunks(text: str, hunks: tuple[Hunk, ...], path: str = "<file>") -> str:
    lines = text.split("\n")
    trailing = text == "" or text.endswith("\n")
    if trailing:
        lines.pop()
    cursor = 0
    for n, hunk in enumerate(hunks, start=1):
        start = cursor
        if hunk.anchor is not None:
            hits = range(cursor, len(lines))
            start = _find_unique(lines, [hunk.anchor], hits, path, n) + 1
        old = hunk.old
        if not old:
            if hunk.end_of_file:
                at = len(lines)
            elif hunk.anchor is not None:
                at = start
            else:
                raise PatchApplyError(f"{path}: hunk {n} has no context lines to locate it")
        else:
            if hunk.end_of_file:
                positions = [len(lines) - len(old)] if len(lines) - len(old) >= start else []
            else:
                positions = range(start, len(lines) - len(old) + 1)
            at = _find_unique(lines, old, positions, path, n)
        replacement = []
        k = at
        for op, t in hunk.lines:
            if op == " ":
                replacement.append(lines[k])  # keep the file's own bytes for context
                k += 1
            elif op == "-":
                k += 1
            else:
                replacement.append(t)
        lines[at:k] = replacement
        cursor = at + len(replacement)
    if not lines:
        return ""
    return "\n".join(lines) + ("\n" if trailing else "")


def _encode(text: str) -> bytes:
    return text.encode("utf-8", "surrogateescape")


def _decode(data: bytes) -> str:
    return data.decode("utf-8", "surrogateescape")


def apply_patch(patch: Patch, workspace: str | os.PathLike) -> ApplyReport:
    """Apply every operation or none of them.

    New contents are computed in memory first; the write phase keeps the
    original bytes of each touched path and restores them on failure.
    """
    root = Path(workspace).resolve()
    if not root.is_dir():
        raise PatchApplyError(f"workspace {workspace} does not exist")
    overlay: dict[Path, bytes | None] = {}
    report = ApplyReport()

    def resolve(p: str) -> Path:
        try:
            return resolve_in_workspace(root, p)
        except WorkspaceEscapeError as exc:
            raise PatchApplyError(str(exc)) from None

    def current(p: Path) -> bytes | None:
        if p in overlay:
            return overlay[p]
        if p.is_dir():
            raise PatchApplyError(f"{relpath(root, p)}: is a directory")
        return p.read_bytes() if p.exists() else None

    for op in patch.operations:
        target = resolve(op.path)
        name = relpath(root, target)
        if isinstance(op, AddFile):
            if current(target) is not None:
                raise PatchApplyError(f"{name}: file already exists")
            overlay[target] = _encode("".join(line + "\n" for line in op.lines))
            report.added += 1
            report.files[name] = "added"
        elif isinstance(op, DeleteFile):
            if current(target) is None:
                raise PatchApplyError(f"{name}: file not found")
            overlay[target] = None
            report.deleted += 1
            report.files[name] = "deleted"
        else:
            data = current(target)
            if data is None:
                raise PatchApplyError(f"{name}: file not found")
            new = _encode(apply_hunks(_decode(data), op.hunks, name))
            if op.move_to:
                dest = resolve(op.move_to)
                if dest != target:
                    if current(dest) is not None:
                        raise PatchApplyError(f"{relpath(root, dest)}: move target already exists")
                    overlay[target] = None
                    report.files[name] = "moved"
                    name = relpath(root, dest)
                target = dest
            overlay[target] = new
            report.modified += 1
            report.files[name] = "modified"

    _commit(root, overlay)
    return report


def _commit(root: Path, overlay: dict[Path, bytes | None]) -> None:
    originals: list[tuple[Path, bytes | None]] = []
    created_dirs: list[Path] = []
    try:
        for path, data in overlay.items():
            originals.append((path, path.read_bytes() if path.exists() else None))
            if data is None:
                if path.exists():
                    os.remove(path)
                continue
            missing = []
            parent = path.parent
            while not parent.exists():
                missing.append(parent)
                parent = parent.parent
            for d in reversed(missing):
                d.mkdir()
                created_dirs.append(d)
            _atomic_write(path, data)
    except Exception as exc:
        for path, data in reversed(originals):
            if data is None:
                if path.exists():
                    path.unlink()
            else:
                _atomic_write(path, data)
        for d in reversed(created_dirs):
            try:
                d.rmdir()
            except OSError:
                pass
        raise PatchApplyError(f"write failed, workspace restored: {exc}") from exc


def _atomic_write(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".patch-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        if path.exists():
            os.chmod(tmp, path.stat().st_mode & 0o7777)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def apply_patch_text(text: str, workspace: str | os.PathLike) -> ApplyReport:
    return apply_patch(parse_patch(text), workspace)
