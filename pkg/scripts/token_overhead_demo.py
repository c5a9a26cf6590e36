"""Per-turn prompt tokens: tools defined once vs. re-sent every turn.

Runs scripted trajectories of varying length against a throwaway workspace
and writes tokens.json / tokens_hist.csv for plotting.
"""

import argparse
import json
import random
import tempfile
from pathlib import Path

from harmony_harness.agent import AgentConfig, Task, run
from harmony_harness.analytics import token_overhead
from harmony_harness.client import ScriptedBackend
from harmony_harness.registry import default_registry
from harmony_harness.sandbox import Sandbox, SandboxConfig


def completion(recipient, args):
    return (
        "<|channel|>analysis<|message|>Next step.<|end|><|start|>assistant"
        f"<|channel|>commentary to={recipient} <|constrain|>json<|message|>{json.dumps(args)}<|call|>"
    )


def script(rng, turns):
    moves = [
        ("repo_browser.print_tree", {"path": ".", "depth": 2}),
        ("repo_browser.search", {"path": ".", "query": "def"}),
        ("repo_browser.open_file", {"path": "mod.py"}),
        ("container.exec", {"cmd": ["ls", "-la"]}),
    ]
    out = [completion(*rng.choice(moves)) for _ in range(turns)]
    return out + ["<|channel|>final<|message|>Done.<|return|>"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--max-turns", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="token_report")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    reg = default_registry()
    trajs = []
    with tempfile.TemporaryDirectory() as tmp:
        ws = Path(tmp)
        (ws / "mod.py").write_text("".join(f"def f{i}(x):\n    return x * {i}\n" for i in range(40)))
        sandbox = Sandbox(SandboxConfig(ws))
        for _ in range(args.runs):
            backend = ScriptedBackend(script(rng, rng.randint(1, args.max_turns)))
            trajs.append(run(Task("explore"), AgentConfig(), backend, reg, sandbox))

    rep = token_overhead(trajs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "tokens.json").write_text(json.dumps(rep.summary(), indent=2) + "\n")
    (out / "tokens_hist.csv").write_text(rep.histogram_csv())
    for k, v in rep.summary().items():
        print(f"{k:16s} {v}")
    print(f"overhead share   {rep.overhead / rep.chat_total:.1%}")


if __name__ == "__main__":
    main()
