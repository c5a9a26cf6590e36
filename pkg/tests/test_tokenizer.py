from hypothesis import given
from hypothesis import strategies as st

from harmony_harness.codec import SPECIAL_TOKENS
from harmony_harness.tokenizer import CallableTokenizer, RegexTokenizer


def test_special_tokens_count_once():
    tok = RegexTokenizer()
    for t in SPECIAL_TOKENS:
        assert tok.count(t) == 1
    assert tok.tokenize("<|start|>user<|message|>hi there!<|end|>") == [
        "<|start|>", "user", "<|message|>", "hi", " ", "there", "!", "<|end|>",
    ]


@given(st.text(max_size=50), st.text(max_size=50))
def test_tokens_cover_text(a, b):
    tok = RegexTokenizer()
    assert "".join(tok.tokenize(a)) == a
    assert tok.count(a + b) <= tok.count(a) + tok.count(b)


def test_callable_adapter():
    assert CallableTokenizer(str.split).count("a b c") == 3
