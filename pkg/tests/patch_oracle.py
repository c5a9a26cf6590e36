"""Random single-file edits with an independent splice oracle."""

from __future__ import annotations

import random

WORDS = ["alpha", "beta", "gamma", "δelta", "ε", "zeta", "  indented", "\ttab", "x = 1", "", "trailing  "]


def random_file(rng: random.Random) -> list[str]:
    # the numeric prefix keeps every line unique, so context never matches twice
    return [f"{i:03d} {rng.choice(WORDS)}" for i in range(rng.randint(0, 30))]


def random_edit(rng: random.Random, lines: list[str], tag: str):
    """Hunk replacing lines[a:b] with new lines, plus (a, b, new, trailing context)."""
    n = len(lines)
    if n == 0:
        return None
    while True:
        a = rng.randint(0, n)
        b = rng.randint(a, min(n, a + 5))
        ctx = rng.randint(0, 3)
        before, after = lines[max(0, a - ctx):a], lines[b:b + ctx]
        if before or after or a < b:
            break
    new = [f"{tag} {j} {rng.choice(WORDS)}" for j in range(rng.randint(0, 4))]
    hunk = (
        [(" ", t) for t in before]
        + [("-", t) for t in lines[a:b]]
        + [("+", t) for t in new]
        + [(" ", t) for t in after]
    )
    return hunk, a, b, new, len(after)


def random_edits(rng: random.Random, lines: list[str]):
    """One to three non-overlapping edits, top to bottom. Returns (hunks, expected lines)."""
    hunks, expected = [], list(lines)
    lo = shift = 0
    for k in range(rng.randint(1, 3)):
        edit = random_edit(rng, lines[lo:], f"new{k}")
        if edit is None:
            break
        hunk, a, b, new, trailing = edit
        hunks.append(hunk)
        expected[lo + a + shift:lo + b + shift] = new
        shift += len(new) - (b - a)
        lo += b + trailing
    return hunks, expected


def splice_text(lines: list[str], trailing_newline: bool) -> str:
    if not lines:
        return ""
    return "\n".join(lines) + ("\n" if trailing_newline else "")
