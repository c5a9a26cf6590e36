"""Offline statistics over probe samples and trajectories.

Percentile-bootstrap confidence intervals for proportions, mention/call
cross-referencing with verdicts, call-rate lift, and the per-turn token
overhead a chat-completions harness would pay for re-sending tool
definitions every turn.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import re
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .registry import ToolRegistry
from .trajectory import Trajectory

DEFAULT_RESAMPLES = 1000
DEFAULT_LEVEL = 0.95
MENTION_PATTERN = r"repo_browser\.([A-Za-z_][A-Za-z0-9_]*)"


@dataclass(frozen=True)
class BootstrapCI:
    point: float
    lo: float
    hi: float
    n: int
    resamples: int = DEFAULT_RESAMPLES
    level: float = DEFAULT_LEVEL
    seed: int | None = None

    def percent(self, digits: int = 1) -> str:
        return f"{100 * self.point:.{digits}f}% [{100 * self.lo:.{digits}f}, {100 * self.hi:.{digits}f}]"


def bootstrap_ci(
    samples: Sequence[int] | np.ndarray,
    resamples: int = DEFAULT_RESAMPLES,
    level: float = DEFAULT_LEVEL,
    seed: int | None = 0,
) -> BootstrapCI:
    """Percentile bootstrap CI for the mean of 0/1 outcomes.

    Draws ``resamples`` index vectors of length n with
    ``default_rng(seed).integers(0, n, size=(resamples, n))`` and takes the
    linear-interpolated ``(1-level)/2`` and ``(1+level)/2`` quantiles of the
    resampled means.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("bootstrap_ci needs a non-empty 1-d sample")
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    if resamples < 1:
        raise ValueError("resamples must be positive")
    n = x.size
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(resamples, n))
    means = x[idx].mean(axis=1)
    alpha = 1 - level
    lo, hi = np.quantile(means, [alpha / 2, 1 - alpha / 2])
    return BootstrapCI(float(x.mean()), float(lo), float(hi), n, resamples, level, seed)


def indicator_samples(successes: int, n: int) -> np.ndarray:
    if not 0 <= successes <= n:
        raise ValueError("need 0 <= successes <= n")
    return np.r_[np.ones(successes), np.zeros(n - successes)]


class Verdict(str, enum.Enum):
    CONFIRMED = "confirmed"
    LIKELY_ALIAS = "likely alias"
    CONFABULATED = "confabulated"


@dataclass(frozen=True)
class ToolEvidence:
    name: str
    text_mentions: int
    text_n: int
    actual_calls: int
    is_alias: bool = False
    ci: BootstrapCI | None = None

    def __post_init__(self):
        if not 0 <= self.text_mentions <= self.text_n:
            raise ValueError(f"{self.name}: mentions must be within [0, text_n]")
        if self.actual_calls < 0:
            raise ValueError(f"{self.name}: negative call count")

    @property
    def mention_rate(self) -> float:
        return self.text_mentions / self.text_n if self.text_n else 0.0

    @property
    def verdict(self) -> Verdict:
        return classify_verdict(self)


def classify_verdict(ev: ToolEvidence) -> Verdict:
    if ev.actual_calls == 0:
        return Verdict.CONFABULATED
    if ev.is_alias:
        return Verdict.LIKELY_ALIAS
    return Verdict.CONFIRMED


@dataclass(frozen=True)
class Lift:
    baseline: BootstrapCI
    with_tools: BootstrapCI
    ratio: float  # math.inf when the baseline rate is zero

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.ratio)


def call_rate_lift(
    baseline: Sequence[int], with_tools: Sequence[int], seed: int | None = 0, resamples: int = DEFAULT_RESAMPLES
) -> Lift:
    b = bootstrap_ci(baseline, resamples, seed=seed)
    w = bootstrap_ci(with_tools, resamples, seed=None if seed is None else seed + 1)
    ratio = math.inf if b.point == 0 else w.point / b.point
    return Lift(b, w, ratio)


# -- token accounting -------------------------------------------------------


@dataclass(frozen=True)
class TurnTokenRecord:
    turn: int
    harmony_tokens: int
    tooldef_tokens: int

    @property
    def chat_estimate(self) -> int:
        return self.harmony_tokens + self.tooldef_tokens


@dataclass
class TokenOverhead:
    records: list[TurnTokenRecord]
    tooldef_tokens: int
    harmony_total: int
    chat_total: int
    bin_edges: list[float] = field(default_factory=list)
    harmony_hist: list[int] = field(default_factory=list)
    chat_hist: list[int] = field(default_factory=list)

    @property
    def turns(self) -> int:
        return len(self.records)

    @property
    def overhead(self) -> int:
        return self.chat_total - self.harmony_total

    def summary(self) -> dict:
        return {
            "turns": self.turns,
            "tooldef_tokens": self.tooldef_tokens,
            "harmony_total": self.harmony_total,
            "chat_total": self.chat_total,
            "overhead": self.overhead,
        }

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "harmony", "chat_completions"])
        for i, (h, c) in enumerate(zip(self.harmony_hist, self.chat_hist)):
            w.writerow([self.bin_edges[i], self.bin_edges[i + 1], h, c])
        return buf.getvalue()


def token_overhead(
    trajs: Trajectory | Iterable[Trajectory], tooldef_tokens: int | None = None, bins: int = 20
) -> TokenOverhead:
    """Per-turn harmony prompt tokens vs. a chat-completions estimate that adds
    the tool-definition tokens to every turn. Each turn record with a prompt
    counts, including retried attempts."""
    if isinstance(trajs, Trajectory):
        trajs = [trajs]
    trajs = list(trajs)
    records = []
    for traj in trajs:
        k = traj.tooldef_tokens if tooldef_tokens is None else tooldef_tokens
        for t in traj.turns:
            records.append(TurnTokenRecord(len(records), t.prompt_tokens, k))
    harmony = [r.harmony_tokens for r in records]
    chat = [r.chat_estimate for r in records]
    result = TokenOverhead(
        records,
        tooldef_tokens if tooldef_tokens is not None else (trajs[0].tooldef_tokens if trajs else 0),
        sum(harmony),
        sum(chat),
    )
    if records:
        lo, hi = min(harmony), max(chat)
        edges = np.linspace(lo, hi if hi > lo else lo + 1, bins + 1)
        result.bin_edges = [float(e) for e in edges]
        result.harmony_hist = [int(c) for c in np.histogram(harmony, edges)[0]]
        result.chat_hist = [int(c) for c in np.histogram(chat, edges)[0]]
    return result


# -- prober cross-referencing -----------------------------------------------


def count_mentions(text_samples: Iterable[str], pattern: str = MENTION_PATTERN) -> tuple[Counter, int]:
    """Per-tool number of samples mentioning it (at most once per sample)."""
    rx = re.compile(pattern)
    counts: Counter = Counter()
    n = 0
    for text in text_samples:
        n += 1
        counts.update(set(rx.findall(text)))
    return counts, n


def count_calls(trajs: Iterable[Trajectory], namespace: str = "repo_browser") -> Counter:
    """Tool calls as the model addressed them (aliases not collapsed)."""
    prefix = namespace + "."
    counts: Counter = Counter()
    for traj in trajs:
        for t in traj.turns:
            if t.recipient and t.recipient.startswith(prefix):
                counts[t.recipient[len(prefix):]] += 1
    return counts


def crossref(
    mentions: Mapping[str, int],
    text_n: int,
    calls: Mapping[str, int],
    registry: ToolRegistry | None = None,
    namespace: str = "repo_browser",
    seed: int | None = 0,
    resamples: int = DEFAULT_RESAMPLES,
) -> list[ToolEvidence]:
    names = sorted(set(mentions) | {k for k, v in calls.items() if v})
    out = []
    for i, name in enumerate(names):
        m = mentions.get(name, 0)
        ci = bootstrap_ci(indicator_samples(m, text_n), resamples, seed=None if seed is None else seed + i) if text_n else None
        is_alias = registry.is_alias(name, namespace) if registry is not None else False
        out.append(ToolEvidence(name, m, text_n, calls.get(name, 0), is_alias, ci))
    out.sort(key=lambda e: (-e.text_mentions, e.name))
    return out


def prober_crossref(
    text_samples: Iterable[str],
    call_logs: Iterable[Trajectory] | Mapping[str, int],
    registry: ToolRegistry | None = None,
    pattern: str = MENTION_PATTERN,
    seed: int | None = 0,
    resamples: int = DEFAULT_RESAMPLES,
) -> list[ToolEvidence]:
    """Cross-reference text mentions of tools with actual calls.

    ``call_logs`` is either trajectories or a ready-made name -> count map.
    """
    mentions, n = count_mentions(text_samples, pattern)
    calls = call_logs if isinstance(call_logs, Mapping) else count_calls(call_logs)
    return crossref(mentions, n, calls, registry, seed=seed, resamples=resamples)


def crossref_table(evidence: Sequence[ToolEvidence]) -> str:
    rows = [("Tool", "Text mentions [95% CI]", "Actual calls", "Verdict")]
    for ev in evidence:
        mention = ev.ci.percent() if ev.ci else f"{100 * ev.mention_rate:.1f}%"
        rows.append((ev.name, mention, str(ev.actual_calls), ev.verdict.value))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)


def evidence_to_dict(ev: ToolEvidence) -> dict:
    d = asdict(ev)
    d["verdict"] = ev.verdict.value
    d["mention_rate"] = ev.mention_rate
    return d
