"""Pluggable token counting.

The harness only needs token *counts* (context-overflow checks, usage
fallback, overhead accounting), so a tokenizer is anything with
``count(text) -> int``. The default is a deterministic regex tokenizer that
counts each special token as one token; swap in a real BPE (e.g. the
model's own vocabulary) through the same interface.
"""

from __future__ import annotations

import re
from typing import Protocol

from .codec import SPECIAL_TOKENS


class Tokenizer(Protocol):
    def count(self, text: str) -> int: ...


class RegexTokenizer:
    """Special tokens count 1; otherwise words, single punctuation, whitespace runs."""

    def __init__(self) -> None:
        specials = "|".join(re.escape(t) for t in sorted(SPECIAL_TOKENS, key=len, reverse=True))
        self._pattern = re.compile(rf"{specials}|\w+|[^\w\s]|\s+")

    def count(self, text: str) -> int:
        return sum(1 for _ in self._pattern.finditer(text))

    def tokenize(self, text: str) -> list[str]:
        return self._pattern.findall(text)


class CallableTokenizer:
    """Adapt any ``encode(text) -> sequence`` function (tiktoken, HF tokenizers)."""

    def __init__(self, encode):
        self._encode = encode

    def count(self, text: str) -> int:
        return len(self._encode(text))


DEFAULT_TOKENIZER = RegexTokenizer()
