"""Command line entry point: ``harmony-harness {run,replay,stats,apply-patch}``.

Settings resolve as flags > environment (``HARMONY_*``) > ``--config`` file
> defaults. Exit codes are listed in EXIT_CODES and the README.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

import yaml

from . import analytics
from .agent import DEFAULT_IDENTITY, DEFAULT_INSTRUCTIONS, Agent, AgentConfig, Task
from .client import OpenAICompletionsClient, RecordingBackend, ScriptedBackend
from .exceptions import TERMINATING
from .patch import PatchError, apply_patch_text
from .registry import ToolRegistry, default_registry
from .sandbox import Sandbox, SandboxConfig
from .trajectory import Trajectory, TrajectoryFormatError, render_transcript

EXIT_USAGE = 2
EXIT_BAD_INPUT = 3
EXIT_CODES = {
    "Submitted": 0,
    "LimitsExceeded": 10,
    "MaxContextWindowOverflow": 11,
    "UnexpectedFinishReason": 12,
    "MaxNewTokensExceeded": 13,
    "RetrialsExceeded": 14,
}
assert set(EXIT_CODES) == {cls.__name__ for cls in TERMINATING}

ENV_PREFIX = "HARMONY_"
AGENT_KEYS = {f.name for f in fields(AgentConfig)}


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    task: str
    workspace: str
    out: str
    instructions: str = DEFAULT_INSTRUCTIONS
    identity: str = DEFAULT_IDENTITY
    endpoint: str | None = None
    model: str = "gpt-oss-20b"
    api_key: str | None = None
    script: str | None = None
    record: str | None = None
    inventory: str | None = None
    seed: int | None = None
    timeout: float = 60.0
    output_cap: int = 1_000_000
    agent: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if not self.task or not self.task.strip():
            raise UsageError("a task is required (--task or --task-file)")
        if bool(self.endpoint) == bool(self.script):
            raise UsageError("select exactly one backend: --endpoint or --script")
        if not Path(self.workspace).is_dir():
            raise UsageError(f"workspace {self.workspace} does not exist")
        if self.script and not Path(self.script).is_file():
            raise UsageError(f"script {self.script} does not exist")
        if self.inventory and not Path(self.inventory).is_file():
            raise UsageError(f"inventory {self.inventory} does not exist")
        out_dir = Path(self.out).resolve().parent
        if not out_dir.is_dir():
            raise UsageError(f"output directory {out_dir} does not exist")
        unknown = set(self.agent) - AGENT_KEYS
        if unknown:
            raise UsageError(f"unknown agent settings: {sorted(unknown)}")

    def agent_config(self) -> AgentConfig:
        overrides = dict(self.agent)
        if self.seed is not None:
            overrides.setdefault("seed", self.seed)
        try:
            return AgentConfig(**overrides)
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from None


def cmd_run(manifest: RunManifest) -> int:
    manifest.validate()
    cfg = manifest.agent_config()
    try:
        sandbox_cfg = SandboxConfig(Path(manifest.workspace), timeout=manifest.timeout, output_cap=manifest.output_cap)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    registry = ToolRegistry.from_file(manifest.inventory) if manifest.inventory else default_registry()
    if manifest.script:
        backend = ScriptedBackend.from_file(manifest.script)
    else:
        backend = OpenAICompletionsClient(manifest.endpoint, manifest.model, manifest.api_key)
    if manifest.record:
        backend = RecordingBackend(backend, manifest.record)
    agent = Agent(backend, registry, Sandbox(sandbox_cfg), cfg)
    traj = agent.run(Task(manifest.task, manifest.instructions, manifest.identity))
    traj.save(manifest.out)
    kind = traj.termination_kind
    logging.getLogger(__name__).info("run finished: %s -> %s", kind, manifest.out)
    return EXIT_CODES[kind]


def cmd_replay(path: str) -> str:
    return render_transcript(Trajectory.load(path))


def _load_samples(path: str) -> list[str]:
    text = Path(path).read_text()
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            out.append(line)
            continue
        out.append(obj["text"] if isinstance(obj, dict) else str(obj))
    return out


def cmd_stats(
    kind: str,
    paths: Sequence[str],
    out_dir: str,
    *,
    samples: str | None = None,
    calls: str | None = None,
    tooldef_tokens: int | None = None,
    seed: int = 0,
    bins: int = 20,
) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if kind == "tokens":
        if not paths:
            raise UsageError("token report needs at least one trajectory")
        trajs = [Trajectory.load(p) for p in paths]
        report = analytics.token_overhead(trajs, tooldef_tokens, bins=bins)
        summary = report.summary()
        summary["per_turn"] = [
            {"turn": r.turn, "harmony": r.harmony_tokens, "chat_completions": r.chat_estimate}
            for r in report.records
        ]
        files = [out / "tokens.txt", out / "tokens.json", out / "tokens_hist.csv"]
        text = "\n".join(f"{k:16s} {v}" for k, v in report.summary().items())
        files[0].write_text(text + "\n")
        files[1].write_text(json.dumps(summary, indent=2) + "\n")
        files[2].write_text(report.histogram_csv())
        return files
    if kind == "crossref":
        if not samples:
            raise UsageError("crossref report needs --samples")
        if not paths and not calls:
            raise UsageError("crossref report needs trajectories or --calls")
        texts = _load_samples(samples)
        if not texts:
            raise UsageError(f"{samples} holds no text samples")
        if calls:
            call_counts = json.loads(Path(calls).read_text())
        else:
            call_counts = analytics.count_calls(Trajectory.load(p) for p in paths)
        evidence = analytics.prober_crossref(texts, call_counts, default_registry(), seed=seed)
        files = [out / "crossref.txt", out / "crossref.json"]
        files[0].write_text(analytics.crossref_table(evidence) + "\n")
        files[1].write_text(json.dumps([analytics.evidence_to_dict(e) for e in evidence], indent=2) + "\n")
        return files
    raise UsageError(f"unknown report kind {kind!r}")


# -- argument handling ------------------------------------------------------

# flag dest -> (manifest field or agent key, type)
RUN_SETTINGS = {
    "endpoint": str,
    "model": str,
    "api_key": str,
    "script": str,
    "workspace": str,
    "out": str,
    "seed": int,
    "timeout": float,
    "output_cap": int,
    "inventory": str,
    "record": str,
    "reasoning": str,
    "max_retries": int,
    "step_limit": int,
    "context_window": int,
    "max_new_tokens": int,
    "high_effort_overflow_retry": lambda v: str(v).lower() in ("1", "true", "yes", "on"),
}
_AGENT_FLAG = {"reasoning": "reasoning_effort"}


def _resolve_settings(args: argparse.Namespace, environ: dict[str, str]) -> dict[str, Any]:
    settings: dict[str, Any] = {}
    if args.config:
        try:
            loaded = yaml.safe_load(Path(args.config).read_text()) or {}
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        settings.update(loaded)
    for key, conv in RUN_SETTINGS.items():
        env = environ.get(ENV_PREFIX + key.upper())
        if env is not None:
            settings[key] = conv(env)
    for key in RUN_SETTINGS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _manifest_from(settings: dict[str, Any]) -> RunManifest:
    settings = dict(settings)
    agent = dict(settings.pop("agent", {}) or {})
    for key in list(settings):
        target = _AGENT_FLAG.get(key, key)
        if target in AGENT_KEYS and key not in ("seed",):
            agent[target] = settings.pop(key)
    task = settings.pop("task", None)
    task_file = settings.pop("task_file", None)
    if task_file:
        task = Path(task_file).read_text()
    instr_file = settings.pop("instructions_file", None)
    if instr_file:
        settings["instructions"] = Path(instr_file).read_text()
    known = {f.name for f in fields(RunManifest)}
    unknown = set(settings) - known
    if unknown:
        raise UsageError(f"unknown settings: {sorted(unknown)}")
    for required in ("workspace", "out"):
        if not settings.get(required):
            raise UsageError(f"--{required} is required")
    return RunManifest(task=task or "", agent=agent, **settings)


def _run_many(manifests: list[RunManifest], parallel: int) -> int:
    for m in manifests:
        m.validate()
    for attr in ("workspace", "out"):
        values = [str(Path(getattr(m, attr)).resolve()) for m in manifests]
        if len(set(values)) != len(values):
            raise UsageError(f"parallel runs need distinct --{attr} values")
    with ThreadPoolExecutor(max_workers=max(1, parallel)) as pool:
        codes = list(pool.map(cmd_run, manifests))
    return max(codes)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="harmony-harness", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an agent task")
    r.add_argument("--config", help="YAML/JSON settings file")
    r.add_argument("--task")
    r.add_argument("--task-file")
    r.add_argument("--instructions-file")
    r.add_argument("--endpoint", help="OpenAI-compatible base URL, e.g. http://localhost:8000/v1")
    r.add_argument("--model")
    r.add_argument("--api-key")
    r.add_argument("--script", help="JSON/JSONL scripted completions instead of a live endpoint")
    r.add_argument("--record", help="append request/response pairs to this JSONL file")
    r.add_argument("--workspace")
    r.add_argument("--out", help="trajectory output path (.jsonl)")
    r.add_argument("--inventory", help="tool inventory YAML/JSON (default: built-in)")
    r.add_argument("--reasoning", choices=["low", "medium", "high"])
    r.add_argument("--max-retries", type=int)
    r.add_argument("--step-limit", type=int)
    r.add_argument("--context-window", type=int)
    r.add_argument("--max-new-tokens", type=int)
    r.add_argument("--high-effort-overflow-retry", action="store_true", default=None)
    r.add_argument("--seed", type=int)
    r.add_argument("--timeout", type=float, help="per-command sandbox timeout (s)")
    r.add_argument("--output-cap", type=int, help="captured output cap (bytes)")
    r.add_argument("--manifest", help="YAML/JSON list of runs; each entry overrides the flags")
    r.add_argument("--parallel", type=int, default=1)

    rp = sub.add_parser("replay", help="print a trajectory as a transcript")
    rp.add_argument("trajectory")

    s = sub.add_parser("stats", help="analytics reports over trajectories")
    s.add_argument("kind", choices=["tokens", "crossref"])
    s.add_argument("trajectories", nargs="*")
    s.add_argument("--out", required=True, help="report directory")
    s.add_argument("--samples", help="text samples (JSONL with a 'text' field, or plain lines)")
    s.add_argument("--calls", help="JSON map of tool name -> call count")
    s.add_argument("--tooldef-tokens", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--bins", type=int, default=20)

    a = sub.add_parser("apply-patch", help="apply a patch read from stdin")
    a.add_argument("--workspace", default=".")
    return p


def main(argv: Sequence[str] | None = None, environ: dict[str, str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    environ = dict(os.environ if environ is None else environ)
    try:
        if args.command == "run":
            settings = _resolve_settings(args, environ)
            if args.task:
                settings["task"] = args.task
            if args.task_file:
                settings["task_file"] = args.task_file
            if args.instructions_file:
                settings["instructions_file"] = args.instructions_file
            if args.manifest:
                entries = yaml.safe_load(Path(args.manifest).read_text())
                if not isinstance(entries, list) or not entries:
                    raise UsageError("manifest must be a non-empty list of runs")
                return _run_many([_manifest_from({**settings, **e}) for e in entries], args.parallel)
            return cmd_run(_manifest_from(settings))
        if args.command == "replay":
            print(cmd_replay(args.trajectory))
            return 0
        if args.command == "stats":
            files = cmd_stats(
                args.kind,
                args.trajectories,
                args.out,
                samples=args.samples,
                calls=args.calls,
                tooldef_tokens=args.tooldef_tokens,
                seed=args.seed,
                bins=args.bins,
            )
            for f in files:
                print(f)
            return 0
        if args.command == "apply-patch":
            report = apply_patch_text(sys.stdin.read(), args.workspace)
            print(report.summary())
            return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrajectoryFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except PatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
