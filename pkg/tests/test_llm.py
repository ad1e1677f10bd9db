"""Tests for the HTTP and mock language-model clients."""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from evobo.llm import (
    EmptyBatch,
    GenerationFailure,
    HTTPClient,
    LLMParams,
    LLMUnavailable,
    MockClient,
    TranscriptWriter,
    _extract_text,
)


class ScriptedHandler(BaseHTTPRequestHandler):
    """Serves a per-server script of (status, body) responses in order."""

    script = []
    seen = []
    lock = threading.Lock()

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length)) if length else {}
        with self.lock:
            type(self).seen.append({"body": body, "auth": self.headers.get("Authorization")})
            if type(self).script:
                status, payload = type(self).script.pop(0)
            else:
                status, payload = 200, {"choices": [{"message": {"content": "fallback"}}]}
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    class Handler(ScriptedHandler):
        script = []
        seen = []
        lock = threading.Lock()

    httpd = HTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{httpd.server_address[1]}/v1/chat"
    yield Handler, url
    httpd.shutdown()
    httpd.server_close()


def ok(text):
    return (200, {"choices": [{"message": {"content": text}}]})


class TestLLMParams:
    def test_defaults(self):
        p = LLMParams()
        assert p.temperature == 0.5
        assert p.top_k == 60

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"temperature": -0.1},
            {"top_k": 0},
            {"top_p": 0.0},
            {"top_p": 1.5},
            {"timeout": 0},
            {"max_retries": -1},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            LLMParams(**kwargs)


class TestExtractText:
    @pytest.mark.parametrize(
        "data",
        [
            {"choices": [{"message": {"content": "hi"}}]},
            {"choices": [{"text": "hi"}]},
            {"content": [{"type": "text", "text": "hi"}]},
            {"text": "hi"},
        ],
    )
    def test_known_shapes(self, data):
        assert _extract_text(data) == "hi"

    @pytest.mark.parametrize("data", [{}, {"choices": []}, {"choices": [{}]}, [], "hi", {"content": "hi"}])
    def test_unknown_shapes(self, data):
        with pytest.raises(ValueError):
            _extract_text(data)


class TestHTTPClient:
    def test_success_and_payload_shape(self, server, monkeypatch):
        handler, url = server
        handler.script.append(ok("the reply"))
        monkeypatch.setenv("EVOBO_API_KEY", "sekrit")
        client = HTTPClient(url, LLMParams(temperature=0.5, top_k=60, model="m1"))
        assert client.generate("design something") == "the reply"
        sent = handler.seen[0]
        assert sent["auth"] == "Bearer sekrit"
        assert sent["body"]["model"] == "m1"
        assert sent["body"]["temperature"] == 0.5
        assert sent["body"]["top_k"] == 60
        assert sent["body"]["messages"] == [{"role": "user", "content": "design something"}]

    def test_no_key_no_auth_header(self, server, monkeypatch):
        handler, url = server
        handler.script.append(ok("x"))
        monkeypatch.delenv("EVOBO_API_KEY", raising=False)
        HTTPClient(url).generate("p")
        assert handler.seen[0]["auth"] is None

    def test_retries_on_429_then_succeeds(self, server):
        handler, url = server
        handler.script.extend([(429, {"error": "slow down"}), ok("finally")])
        client = HTTPClient(url, backoff_base=0.01)
        assert client.generate("p") == "finally"
        assert len(handler.seen) == 2

    def test_persistent_500_exhausts_retries(self, server):
        handler, url = server
        handler.script.extend([(500, {})] * 10)
        client = HTTPClient(url, LLMParams(max_retries=2), backoff_base=0.01)
        with pytest.raises(LLMUnavailable, match="HTTP 500"):
            client.generate("p")
        assert len(handler.seen) == 3  # initial try plus two retries

    def test_client_error_is_not_retried(self, server):
        handler, url = server
        handler.script.append((400, {"error": "bad request"}))
        client = HTTPClient(url, backoff_base=0.01)
        with pytest.raises(LLMUnavailable, match="HTTP 400"):
            client.generate("p")
        assert len(handler.seen) == 1

    def test_unparseable_body_raises(self, server):
        handler, url = server
        handler.script.append((200, {"surprise": True}))
        with pytest.raises(LLMUnavailable, match="unrecognized"):
            HTTPClient(url).generate("p")

    def test_connection_refused_counts_as_transient(self):
        client = HTTPClient(
            "http://127.0.0.1:9", LLMParams(max_retries=1, timeout=2), backoff_base=0.01
        )
        with pytest.raises(LLMUnavailable, match="gave up after 2 attempts"):
            client.generate("p")

    def test_empty_endpoint_rejected(self):
        with pytest.raises(ValueError):
            HTTPClient("")


class TestTranscript:
    def test_records_success_and_failure(self, server, tmp_path):
        handler, url = server
        handler.script.extend([ok("good"), (400, {})])
        path = tmp_path / "log" / "transcript.jsonl"
        client = HTTPClient(url, transcript=TranscriptWriter(path), backoff_base=0.01)
        client.generate("first prompt")
        with pytest.raises(LLMUnavailable):
            client.generate("second prompt")
        lines = [json.loads(l) for l in path.read_text().splitlines()]
        assert len(lines) == 2
        assert lines[0]["response"] == "good"
        assert lines[0]["error"] is None
        assert len(lines[0]["prompt_hash"]) == 64
        assert lines[0]["params"]["temperature"] == 0.5
        assert lines[0]["latency"] >= 0
        assert lines[1]["response"] is None
        assert "HTTP 400" in lines[1]["error"]
        assert lines[0]["prompt_hash"] != lines[1]["prompt_hash"]

    def test_mock_writes_transcript_too(self, tmp_path):
        path = tmp_path / "t.jsonl"
        client = MockClient(["a"], transcript=TranscriptWriter(path))
        client.generate("p")
        record = json.loads(path.read_text().splitlines()[0])
        assert record["response"] == "a"


class TestMockClient:
    def test_replays_in_order(self):
        client = MockClient(["one", "two"])
        assert client.generate("x") == "one"
        assert client.generate("y") == "two"
        assert client.calls == 2

    def test_exhaustion(self):
        client = MockClient([])
        with pytest.raises(LLMUnavailable, match="exhausted"):
            client.generate("x")

    def test_scripted_exception(self):
        client = MockClient([RuntimeError("model melted"), "fine"])
        with pytest.raises(LLMUnavailable, match="model melted"):
            client.generate("x")
        assert client.generate("x") == "fine"

    def test_seek_restores_position(self):
        client = MockClient(["a", "b", "c"])
        client.generate("x")
        client.generate("x")
        client.seek(1)
        assert client.generate("x") == "b"
        with pytest.raises(ValueError):
            client.seek(7)


class TestGenerateBatch:
    def test_order_preserved(self):
        client = MockClient([f"reply-{i}" for i in range(5)])
        out = client.generate_batch([f"p{i}" for i in range(5)])
        assert out == [f"reply-{i}" for i in range(5)]

    def test_failed_slot_becomes_placeholder(self):
        client = MockClient(["good", RuntimeError("bad"), "also good"])
        out = client.generate_batch(["a", "b", "c"])
        assert out[0] == "good"
        assert isinstance(out[1], GenerationFailure)
        assert "bad" in out[1].reason
        assert out[2] == "also good"

    def test_empty_batch_rejected(self):
        with pytest.raises(EmptyBatch):
            MockClient(["x"]).generate_batch([])

    def test_parallel_batch_same_multiset(self, server):
        handler, url = server
        handler.script.extend([ok(f"r{i}") for i in range(6)])
        client = HTTPClient(url, parallelism=3)
        out = client.generate_batch([f"p{i}" for i in range(6)])
        assert sorted(out) == [f"r{i}" for i in range(6)]
        assert len(out) == 6

    def test_min_interval_paces_calls(self):
        import time

        client = MockClient(["a", "b", "c"], min_interval=0.05)
        start = time.monotonic()
        client.generate_batch(["1", "2", "3"])
        assert time.monotonic() - start >= 0.1

    def test_parallelism_validation(self):
        with pytest.raises(ValueError):
            MockClient([], parallelism=0)
