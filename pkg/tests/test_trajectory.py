import json

import pytest

from harmony_harness.agent import AgentConfig, Task, run
from harmony_harness.client import ScriptedBackend
from harmony_harness.trajectory import (
    Trajectory,
    TrajectoryFormatError,
    TrajectoryVersionError,
    render_transcript,
)

from helpers import six_turn_script


@pytest.fixture
def traj(registry, sandbox):
    script = ["garbage"] + six_turn_script()
    return run(Task("fix add"), AgentConfig(), ScriptedBackend(script), registry, sandbox)


def test_lossless_round_trip(traj, tmp_path):
    path = tmp_path / "t.jsonl"
    traj.save(path)
    back = Trajectory.load(path)
    assert back == traj
    assert back.to_jsonl() == traj.to_jsonl()
    assert back.conversation() == traj.conversation()


def test_record_layout(traj):
    lines = [json.loads(l) for l in traj.to_jsonl().splitlines()]
    assert [l["record"] for l in lines] == ["header"] + ["turn"] * 7 + ["termination"]
    assert lines[0]["version"] == 1 and lines[-1]["termination"]["kind"] == "Submitted"


def test_transcript_annotations(traj):
    text = render_transcript(traj)
    assert "RETRY 1" in text
    assert "!! NonTerminating HarmonyParsingError" in text
    assert "[commentary -> repo_browser.print_tree]" in text
    assert text.endswith("5.")


def test_version_mismatch(traj):
    lines = traj.to_jsonl().splitlines()
    head = json.loads(lines[0])
    head["version"] = 99
    with pytest.raises(TrajectoryVersionError, match="t.jsonl:1"):
        Trajectory.from_jsonl("\n".join([json.dumps(head)] + lines[1:]), "t.jsonl")


def test_truncated_file(traj):
    lines = traj.to_jsonl().splitlines()
    with pytest.raises(TrajectoryFormatError, match="truncated"):
        Trajectory.from_jsonl("\n".join(lines[:-1]))
    with pytest.raises(TrajectoryFormatError, match=":3: invalid JSON"):
        Trajectory.from_jsonl("\n".join(lines[:2] + [lines[2][:40]] + lines[3:]))


@pytest.mark.parametrize(
    "mutate,match",
    [
        (lambda ls: ls[1:], "expected a header"),
        (lambda ls: ls + [ls[1]], "after termination"),
        (lambda ls: [ls[0], '{"record": "bogus"}'] + ls[1:], "unknown record"),
        (lambda ls: [ls[0], '{"record": "turn", "step": 0, "attempt": 1, "extra": 1}'] + ls[1:], "unknown turn fields"),
        (lambda ls: [], "empty"),
    ],
)
def test_format_errors(traj, mutate, match):
    lines = traj.to_jsonl().splitlines()
    with pytest.raises(TrajectoryFormatError, match=match):
        Trajectory.from_jsonl("\n".join(mutate(lines)))
