import json

import httpx
import pytest

from harmony_harness.client import (
    CompletionRequest,
    ConfigurationError,
    OpenAICompletionsClient,
    RecordingBackend,
    ReplayBackend,
    ScriptedBackend,
    ScriptExhausted,
    ScriptItem,
    Usage,
)
from harmony_harness.exceptions import UnexpectedFinishReason

REQ = CompletionRequest(prompt="<|start|>user<|message|>hi<|end|><|start|>assistant", max_tokens=64, seed=7)


def make_client(handler, **kw):
    sleeps = []
    client = OpenAICompletionsClient(
        "http://llm.test/v1/", "gpt-oss-20b", "sk-test",
        transport=httpx.MockTransport(handler), sleep=sleeps.append, **kw,
    )
    return client, sleeps


def ok(text="<|channel|>final<|message|>hi<|return|>", usage=True, finish="stop"):
    body = {"choices": [{"text": text, "finish_reason": finish}]}
    if usage:
        body["usage"] = {"prompt_tokens": 11, "completion_tokens": 5}
    return httpx.Response(200, json=body)


def test_wire_format():
    seen = []

    def handler(request: httpx.Request):
        seen.append(request)
        return ok()

    client, _ = make_client(handler)
    resp = client.complete(REQ)
    (r,) = seen
    assert r.method == "POST" and str(r.url) == "http://llm.test/v1/completions"
    assert r.headers["authorization"] == "Bearer sk-test"
    body = json.loads(r.content)
    assert body == {
        "model": "gpt-oss-20b",
        "prompt": REQ.prompt,
        "max_tokens": 64,
        "temperature": 1.0,
        "top_p": 1.0,
        "stop": ["<|call|>", "<|return|>"],
        "skip_special_tokens": False,
        "seed": 7,
    }
    assert resp.text.endswith("<|return|>") and resp.finish_reason == "stop"
    assert resp.usage == Usage(11, 5)


def test_client_error_fails_fast():
    calls = []

    def handler(request):
        calls.append(1)
        return httpx.Response(400, text="bad model")

    client, sleeps = make_client(handler)
    with pytest.raises(ConfigurationError, match="400"):
        client.complete(REQ)
    assert len(calls) == 1 and sleeps == []


def test_server_errors_retry_then_give_up():
    def handler(request):
        return httpx.Response(503)

    client, sleeps = make_client(handler, max_attempts=4, backoff=0.5)
    with pytest.raises(UnexpectedFinishReason, match="4 attempts"):
        client.complete(REQ)
    assert sleeps == [0.5, 1.0, 2.0]


def test_transient_failure_recovers():
    script = [httpx.ConnectError("refused"), httpx.Response(429), ok()]

    def handler(request):
        item = script.pop(0)
        if isinstance(item, Exception):
            raise item
        return item

    client, sleeps = make_client(handler)
    assert client.complete(REQ).usage.prompt_tokens == 11
    assert len(sleeps) == 2


def test_usage_fallback_is_flagged():
    client, _ = make_client(lambda r: ok(usage=False, finish=None))
    resp = client.complete(REQ)
    assert resp.usage.estimated and resp.usage.prompt_tokens > 0
    assert resp.finish_reason == "unknown"


def test_malformed_body():
    client, _ = make_client(lambda r: httpx.Response(200, json={"choices": []}))
    with pytest.raises(UnexpectedFinishReason):
        client.complete(REQ)


def test_request_validation():
    with pytest.raises(ValueError):
        CompletionRequest("p", 10, stop=("<|end|>",))
    with pytest.raises(ValueError):
        CompletionRequest("p", 0)
    with pytest.raises(ValueError):
        CompletionRequest("p", 10, temperature=3)


def test_scripted_backend():
    b = ScriptedBackend(["one", ScriptItem("two", "length", Usage(1, 2)), {"text": "three"}])
    assert [b.complete(REQ).text for _ in range(3)] == ["one", "two", "three"]
    assert b.remaining == 0 and len(b.requests) == 3
    with pytest.raises(ScriptExhausted):
        b.complete(REQ)
    with pytest.raises(ValueError):
        ScriptedBackend([])


def test_scripted_from_files(tmp_path):
    (tmp_path / "s.json").write_text(json.dumps([{"text": "a"}, {"text": "b", "finish_reason": "length"}]))
    (tmp_path / "s.jsonl").write_text('{"text": "a"}\n\n{"text": "b", "finish_reason": "length"}\n')
    for name in ("s.json", "s.jsonl"):
        b = ScriptedBackend.from_file(tmp_path / name)
        assert [i.finish_reason for i in b.items] == ["stop", "length"]


def test_record_then_replay(tmp_path):
    log = tmp_path / "rec.jsonl"
    rec = RecordingBackend(ScriptedBackend(["a", "b"]), log)
    first = [rec.complete(REQ), rec.complete(REQ)]
    replay = ReplayBackend.from_file(log)
    assert [replay.complete(REQ), replay.complete(REQ)] == first
    with pytest.raises(ScriptExhausted):
        replay.complete(REQ)
    other = CompletionRequest("different", 64)
    with pytest.raises(AssertionError):
        ReplayBackend.from_file(log).complete(other)
    assert ReplayBackend.from_file(log, strict=False).complete(other).text == "a"
