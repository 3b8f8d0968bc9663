import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from spkfix.backends import TOKEN_ENV_VAR, EchoBackend, HttpBackend, OracleBackend, RandomBackend, detect_kind
from spkfix.decoder import DecoderConfig, build_prompt, constrained_decode
from spkfix.errors import BackendError, DecodeError, ProtocolError
from spkfix.formats import FormatKind, FormattedTranscript

FIXTURE = json.loads((Path(__file__).parent / "fixtures" / "score_responses.json").read_text())


class FakeServer:
    """Threaded local server; ``behaviour`` decides each response."""

    def __init__(self, behaviour):
        self.behaviour = behaviour
        self.requests = []
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                outer.requests.append((self.path, body, dict(self.headers)))
                status, payload = outer.behaviour(self.path, body, len(outer.requests))
                data = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}"
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()


def replay_fixture(path, body, n):
    for entry in FIXTURE:
        if entry["request"] == body:
            return 200, entry["response"]
    # default: prefer the first candidate
    return 200, {"scores": [0.0] + [-1.0] * (len(body["candidates"]) - 1)}


def test_score_contract_shape():
    with FakeServer(replay_fixture) as srv:
        lm = HttpBackend(srv.url, backoff=0)
        scores = lm.score_candidates("p", ["<spk:1>", "<spk:2>"])
    assert len(scores) == 2 and all(isinstance(s, float) for s in scores)


def test_recorded_fixture_is_reproducible():
    req = FIXTURE[0]["request"]
    with FakeServer(replay_fixture) as srv:
        lm = HttpBackend(srv.url, backoff=0)
        first = lm.score_candidates(req["prefix"], req["candidates"])
        second = lm.score_candidates(req["prefix"], req["candidates"])
    assert first == second == FIXTURE[0]["response"]["scores"]


def test_decode_over_http_uses_fixture():
    inp = FormattedTranscript(FormatKind.SPK_TURN, tuple("<spk:1> how are you i am good".split()), 6)
    with FakeServer(replay_fixture) as srv:
        out = constrained_decode(inp, HttpBackend(srv.url, backoff=0), DecoderConfig(k=2))
        paths = {p for p, _, _ in srv.requests}
    assert out.text == "<spk:1> how are you <spk:2> i am good"
    assert paths == {"/v1/score"}


def test_server_error_thrice_gives_decode_error():
    with FakeServer(lambda p, b, n: (500, {"error": "down"})) as srv:
        lm = HttpBackend(srv.url, retries=3, backoff=0)
        inp = FormattedTranscript(FormatKind.SPK_WORD, ("a", "<spk:1>"), 1)
        with pytest.raises(DecodeError, match="3 attempts"):
            constrained_decode(inp, lm, DecoderConfig(k=2))
        assert len(srv.requests) == 3


def test_transient_error_is_retried():
    behaviour = lambda p, b, n: (503, {}) if n < 3 else (200, {"scores": [0.0] * len(b["candidates"])})
    with FakeServer(behaviour) as srv:
        assert HttpBackend(srv.url, backoff=0).score_candidates("p", ["a", "b"]) == [0.0, 0.0]
        assert len(srv.requests) == 3


@pytest.mark.parametrize(
    "payload",
    [{"scores": [1.0]}, {"nope": 1}, {"scores": ["x", 1]}, b"not json", {"scores": [None, 0.0]}],
)
def test_malformed_response_is_protocol_error(payload):
    with FakeServer(lambda p, b, n: (200, payload)) as srv:
        with pytest.raises(ProtocolError):
            HttpBackend(srv.url, backoff=0).score_candidates("p", ["a", "b"])
        assert len(srv.requests) == 1


def test_unreachable_endpoint():
    lm = HttpBackend("http://127.0.0.1:9", retries=2, timeout=0.5, backoff=0)
    with pytest.raises(BackendError):
        lm.score_candidates("p", ["a", "b"])


def test_auth_token_from_env(monkeypatch):
    monkeypatch.setenv(TOKEN_ENV_VAR, "sekret")
    with FakeServer(replay_fixture) as srv:
        HttpBackend(srv.url, backoff=0).score_candidates("p", ["a", "b"])
        headers = srv.requests[0][2]
    assert headers["Authorization"] == "Bearer sekret"


def test_generate_endpoint():
    with FakeServer(lambda p, b, n: (200, {"text": "<spk:1> hi"})) as srv:
        assert HttpBackend(srv.url, backoff=0).generate("prompt") == "<spk:1> hi"
        assert srv.requests[0][0] == "/v1/generate"
    with FakeServer(lambda p, b, n: (200, {"txt": 1})) as srv:
        with pytest.raises(ProtocolError):
            HttpBackend(srv.url, backoff=0).generate("prompt")


def test_max_in_flight_is_respected():
    active, peak = [0], [0]
    lock = threading.Lock()
    gate = threading.Event()

    def behaviour(p, b, n):
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        gate.wait(0.05)
        with lock:
            active[0] -= 1
        return 200, {"scores": [0.0] * len(b["candidates"])}

    with FakeServer(behaviour) as srv:
        lm = HttpBackend(srv.url, max_in_flight=2, backoff=0)
        threads = [threading.Thread(target=lm.score_candidates, args=("p", ["a", "b"])) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    assert peak[0] <= 2


def test_mock_generate_variants():
    prompt = build_prompt("", "<spk:1> how are you i am good")
    assert EchoBackend().generate(prompt) == "<spk:1> how are you i am good"
    oracle = OracleBackend({("how", "are", "you", "i", "am", "good"): (1, 1, 1, 2, 2, 2)})
    assert oracle.generate(prompt) == "<spk:1> how are you <spk:2> i am good"
    noisy = RandomBackend(seed=1, hallucination_rate=0.5)
    assert noisy.generate(prompt) == noisy.generate(prompt)


def test_detect_kind():
    assert detect_kind("<spk:1> a") is FormatKind.SPK_TURN
    assert detect_kind("a <spk:1>") is FormatKind.SPK_WORD
