from __future__ import annotations

import os
from pathlib import Path


class WorkspaceEscapeError(ValueError):
    """A path resolves outside the workspace root."""


def resolve_in_workspace(root: str | os.PathLike, path: str | os.PathLike) -> Path:
    """Resolve ``path`` against ``root`` and refuse anything outside it.

    Absolute paths are allowed only if they land inside the root. Symlinks
    are resolved before the check, so a link pointing out is rejected too.
    """
    root = Path(root).resolve()
    p = Path(path)
    if "\x00" in str(path):
        raise WorkspaceEscapeError(f"path escapes workspace: {path}")
    candidate = (p if p.is_absolute() else root / p).resolve()
    if candidate != root and not candidate.is_relative_to(root):
        raise WorkspaceEscapeError(f"path escapes workspace: {path}")
    return candidate


def relpath(root: str | os.PathLike, path: Path) -> str:
    rel = path.relative_to(Path(root).resolve()).as_posix()
    return rel or "."
