import json
import subprocess
import sys

import pytest

from harmony_harness.cli import EXIT_BAD_INPUT, EXIT_CODES, EXIT_USAGE, main
from harmony_harness.trajectory import Trajectory

from helpers import call, final, six_turn_script


@pytest.fixture
def script_file(tmp_path):
    path = tmp_path / "script.jsonl"
    path.write_text("".join(json.dumps({"text": t}) + "\n" for t in six_turn_script()))
    return path


def run_args(workspace, out, script, *extra):
    return ["run", "--task", "fix add", "--workspace", str(workspace), "--out", str(out), "--script", str(script), *extra]


def test_scripted_run(workspace, script_file, tmp_path):
    out = tmp_path / "traj.jsonl"
    assert main(run_args(workspace, out, script_file), environ={}) == 0
    traj = Trajectory.load(out)
    assert traj.termination_kind == "Submitted" and len(traj.turns) == 6
    assert "return a + b" in (workspace / "src/pkg/core.py").read_text()


def test_exit_code_table():
    assert EXIT_CODES == {
        "Submitted": 0, "LimitsExceeded": 10, "MaxContextWindowOverflow": 11,
        "UnexpectedFinishReason": 12, "MaxNewTokensExceeded": 13, "RetrialsExceeded": 14,
    }


def test_step_limit_exit_code(workspace, script_file, tmp_path):
    code = main(run_args(workspace, tmp_path / "t.jsonl", script_file, "--step-limit", "0"), environ={})
    assert code == EXIT_CODES["LimitsExceeded"]


def test_retrials_exit_code(workspace, tmp_path):
    script = tmp_path / "bad.json"
    script.write_text(json.dumps(["junk"] * 11))
    assert main(run_args(workspace, tmp_path / "t.jsonl", script), environ={}) == 14


@pytest.mark.parametrize(
    "args",
    [
        ["run", "--task", "x", "--workspace", "/definitely/missing", "--out", "o.jsonl", "--script", "s.json"],
        ["run", "--task", "  ", "--workspace", ".", "--out", "o.jsonl", "--script", "s.json"],
        ["run", "--task", "x", "--workspace", "."],
        ["run", "--task", "x", "--workspace", ".", "--out", "o.jsonl"],
    ],
)
def test_usage_errors(args, capsys):
    assert main(args, environ={}) == EXIT_USAGE
    assert "usage error" in capsys.readouterr().err


def test_both_backends_rejected(workspace, script_file, tmp_path):
    args = run_args(workspace, tmp_path / "t.jsonl", script_file, "--endpoint", "http://x")
    assert main(args, environ={}) == EXIT_USAGE


def test_env_and_flag_precedence(workspace, script_file, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(f"workspace: {workspace}\nstep_limit: 0\nscript: {script_file}\n")
    out = tmp_path / "t.jsonl"
    base = ["run", "--config", str(cfg), "--task", "fix", "--out", str(out)]
    assert main(base, environ={}) == 10  # config file applies
    assert main(base, environ={"HARMONY_STEP_LIMIT": "50"}) == 0  # env beats config
    (workspace / "src/pkg/core.py").write_text("def add(a, b):\n    return a - b\n")
    assert main(base + ["--step-limit", "0"], environ={"HARMONY_STEP_LIMIT": "50"}) == 10  # flag beats env


def test_replay(workspace, script_file, tmp_path, capsys):
    out = tmp_path / "t.jsonl"
    main(run_args(workspace, out, script_file), environ={})
    capsys.readouterr()
    assert main(["replay", str(out)]) == 0
    text = capsys.readouterr().out
    assert "== terminated: Submitted ==" in text
    bad = tmp_path / "bad.jsonl"
    bad.write_text(out.read_text().splitlines()[0] + "\n")
    assert main(["replay", str(bad)]) == EXIT_BAD_INPUT


def test_stats_tokens(workspace, script_file, tmp_path):
    out = tmp_path / "t.jsonl"
    main(run_args(workspace, out, script_file), environ={})
    rep = tmp_path / "rep"
    assert main(["stats", "tokens", str(out), "--out", str(rep)]) == 0
    summary = json.loads((rep / "tokens.json").read_text())
    assert summary["chat_total"] - summary["harmony_total"] == summary["turns"] * summary["tooldef_tokens"]
    assert (rep / "tokens_hist.csv").read_text().startswith("bin_lo,")
    assert main(["stats", "tokens", "--out", str(rep)]) == EXIT_USAGE


def test_stats_crossref(tmp_path):
    samples = tmp_path / "samples.jsonl"
    samples.write_text(
        json.dumps({"text": "I can call repo_browser.print_tree and repo_browser.delete_file"}) + "\n"
        + json.dumps({"text": "repo_browser.read_file reads"}) + "\n"
    )
    calls = tmp_path / "calls.json"
    calls.write_text(json.dumps({"print_tree": 3, "read_file": 1}))
    rep = tmp_path / "rep"
    assert main(["stats", "crossref", "--samples", str(samples), "--calls", str(calls), "--out", str(rep)]) == 0
    rows = {r["name"]: r["verdict"] for r in json.loads((rep / "crossref.json").read_text())}
    assert rows == {"print_tree": "confirmed", "read_file": "likely alias", "delete_file": "confabulated"}
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["stats", "crossref", "--samples", str(empty), "--calls", str(calls), "--out", str(rep)]) == EXIT_USAGE


def test_apply_patch_stdin(tmp_path):
    (tmp_path / "a.txt").write_text("old\n")
    patch = "*** Begin Patch\n*** Update File: a.txt\n@@\n-old\n+new\n*** End Patch\n"
    proc = subprocess.run(
        [sys.executable, "-m", "harmony_harness.cli", "apply-patch", "--workspace", str(tmp_path)],
        input=patch, capture_output=True, text=True,
    )
    assert proc.returncode == 0 and proc.stdout.strip().endswith("M a.txt")
    assert (tmp_path / "a.txt").read_text() == "new\n"
    proc = subprocess.run(
        [sys.executable, "-m", "harmony_harness.cli", "apply-patch", "--workspace", str(tmp_path)],
        input=patch, capture_output=True, text=True,
    )
    assert proc.returncode == 1 and "not found" in proc.stderr


def test_manifest_parallel(tmp_path):
    runs = []
    for i in range(2):
        ws = tmp_path / f"ws{i}"
        ws.mkdir()
        (ws / "x.txt").write_text("x\n")
        runs.append({"workspace": str(ws), "out": str(tmp_path / f"t{i}.jsonl")})
    script = tmp_path / "s.json"
    script.write_text(json.dumps([call("repo_browser.print_tree", {"path": ".", "depth": 1}), final()]))
    manifest = tmp_path / "m.yaml"
    manifest.write_text(json.dumps(runs))
    args = ["run", "--task", "look", "--script", str(script), "--manifest", str(manifest), "--parallel", "2"]
    assert main(args, environ={}) == 0
    assert all(Trajectory.load(tmp_path / f"t{i}.jsonl").termination_kind == "Submitted" for i in range(2))
    manifest.write_text(json.dumps([runs[0], runs[0]]))
    assert main(args, environ={}) == EXIT_USAGE
