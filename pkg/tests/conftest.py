from __future__ import annotations

from pathlib import Path

import pytest

from harmony_harness.registry import default_registry
from harmony_harness.sandbox import Sandbox, SandboxConfig

_acceptance: list[tuple[str, str]] = []


@pytest.fixture
def registry():
    return default_registry()


@pytest.fixture
def workspace(tmp_path: Path) -> Path:
    ws = tmp_path / "ws"
    (ws / "src" / "pkg").mkdir(parents=True)
    (ws / "docs").mkdir()
    (ws / "README.md").write_text("# demo\nhello world\n")
    (ws / "src" / "pkg" / "__init__.py").write_text("")
    (ws / "src" / "pkg" / "core.py").write_text(
        "def add(a, b):\n    return a - b\n\n\ndef mul(a, b):\n    return a * b\n"
    )
    (ws / "docs" / "guide.md").write_text("add numbers\nmultiply numbers\n")
    return ws


@pytest.fixture
def sandbox_cfg(workspace: Path) -> SandboxConfig:
    return SandboxConfig(workspace, timeout=10.0, output_cap=1_000_000)


@pytest.fixture
def sandbox(sandbox_cfg: SandboxConfig) -> Sandbox:
    return Sandbox(sandbox_cfg)


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))
    elif report.when == "setup" and report.skipped and "test_acceptance.py" in report.nodeid:
        _acceptance.append((report.nodeid.split("::")[-1], "skipped"))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{outcome.upper():8s} {name}")
