"""Smoke test against a live OpenAI-compatible completions server.

    python scripts/live_smoke.py --endpoint http://localhost:8000/v1 --model gpt-oss-20b

Asks the model to create hello.txt with apply_patch in a fresh temp
workspace. Results depend on the server and model, so this is not part of
the test suite.
"""

import argparse
import sys
import tempfile
from pathlib import Path

from harmony_harness.agent import AgentConfig, Task, run
from harmony_harness.client import OpenAICompletionsClient
from harmony_harness.registry import default_registry
from harmony_harness.sandbox import Sandbox, SandboxConfig
from harmony_harness.trajectory import render_transcript


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--endpoint", required=True)
    ap.add_argument("--model", default="gpt-oss-20b")
    ap.add_argument("--api-key")
    ap.add_argument("--reasoning", default="low", choices=["low", "medium", "high"])
    ap.add_argument("--out", default="live_smoke.jsonl")
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        ws = Path(tmp)
        client = OpenAICompletionsClient(args.endpoint, args.model, args.api_key)
        cfg = AgentConfig(step_limit=20, reasoning_effort=args.reasoning, max_new_tokens=4096, context_window=32768)
        task = Task("Create a file hello.txt containing the line 'hello world' using apply_patch, then finish.")
        traj = run(task, cfg, client, default_registry(), Sandbox(SandboxConfig(ws)))
        traj.save(args.out)
        print(render_transcript(traj))
        ok = traj.termination_kind == "Submitted" and (ws / "hello.txt").exists()
    print("OK" if ok else f"FAILED: {traj.termination}")
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
