"""Language-model backends: deterministic mocks and an HTTP client.

Every backend implements ``score_candidates(prefix, candidates)`` for
constrained decoding and ``generate(prompt)`` for the free-form path
used by the transfer baseline.  Prompts follow
:func:`spkfix.decoder.build_prompt`, which lets the mocks recover the
input transcript and what has been generated so far.

Wire protocol of :class:`HttpBackend`::

    POST {endpoint}/v1/score     {"prefix": str, "candidates": [str]} -> {"scores": [float]}
    POST {endpoint}/v1/generate  {"prompt": str}                      -> {"text": str}
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import threading
import time
from typing import Mapping, Optional, Sequence

import numpy as np
import requests

from .decoder import split_prompt
from .errors import BackendError, ProtocolError
from .formats import FormatKind, is_marker, parse, render

logger = logging.getLogger(__name__)

TOKEN_ENV_VAR = "SPKFIX_LM_TOKEN"

_MATCH, _MISS = 0.0, -1.0
_ANY_K = 10**6


def detect_kind(text: str) -> FormatKind:
    first = text.split(" ", 1)[0]
    return FormatKind.SPK_TURN if (not text or is_marker(first)) else FormatKind.SPK_WORD


def _decompose(input_text):
    kind = detect_kind(input_text)
    parsed = parse(input_text, kind, _ANY_K)
    return kind, parsed


def _follow(target: Sequence[str], generated: Sequence[str], candidates: Sequence[str]) -> list[float]:
    """Score 0 for the candidate that continues ``target``, -1 for the rest."""
    n = len(generated)
    if list(generated) != list(target[:n]) or n >= len(target):
        return [_MATCH] * len(candidates)
    return [_MATCH if c == target[n] else _MISS for c in candidates]


class MockBackend:
    """Base for offline backends that steer decoding toward a target rendering."""

    max_in_flight: Optional[int] = None

    def target_speakers(self, words, speakers) -> Sequence[int]:
        return speakers

    def _target(self, input_text):
        kind, parsed = _decompose(input_text)
        speakers = list(self.target_speakers(parsed.words, parsed.speakers))
        return render(kind, parsed.words, speakers, parsed.labels)

    def score_candidates(self, prefix: str, candidates: Sequence[str]) -> list[float]:
        input_text, generated = split_prompt(prefix)
        return _follow(self._target(input_text).tokens, generated, candidates)

    def generate(self, prompt: str) -> str:
        input_text, _ = split_prompt(prompt)
        return self._target(input_text).text


class EchoBackend(MockBackend):
    """Reproduces the input transcript verbatim."""

    def score_candidates(self, prefix, candidates):
        input_text, generated = split_prompt(prefix)
        return _follow(input_text.split(" ") if input_text else [], generated, candidates)

    def generate(self, prompt):
        return split_prompt(prompt)[0]


class ScriptedBackend(MockBackend):
    """Prefers given speakers at given word indices, echoing elsewhere.

    ``script`` maps 0-based word positions within the decoded input to
    the desired speaker label.
    """

    def __init__(self, script: Mapping[int, int]):
        self.script = {int(i): int(s) for i, s in script.items()}

    def target_speakers(self, words, speakers):
        return [self.script.get(i, s) for i, s in enumerate(speakers)]


class OracleBackend(MockBackend):
    """Prefers a known target labelling for each input word sequence.

    ``targets`` maps a tuple of input words to the desired speakers;
    inputs not in the table are echoed.
    """

    def __init__(self, targets: Mapping[tuple, Sequence[int]]):
        self.targets = {tuple(k): tuple(v) for k, v in targets.items()}

    def target_speakers(self, words, speakers):
        return self.targets.get(tuple(words), speakers)


def _stable_seed(seed, *parts: str) -> list[int]:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return [int(seed), int.from_bytes(digest[:8], "little")]


class RandomBackend(MockBackend):
    """Adversarial backend: seeded uniform random scores and noisy generations.

    Output depends only on ``(seed, prompt, candidates)`` so repeated calls
    and repeated runs agree.
    """

    hallucination_vocab = ("uh", "um", "yeah", "so", "like", "okay")

    def __init__(self, seed: int = 0, hallucination_rate: float = 0.1):
        self.seed = seed
        self.hallucination_rate = hallucination_rate

    def score_candidates(self, prefix, candidates):
        rng = np.random.default_rng(_stable_seed(self.seed, prefix, *candidates))
        return rng.uniform(-10.0, 0.0, size=len(candidates)).tolist()

    def generate(self, prompt):
        input_text, _ = split_prompt(prompt)
        kind, parsed = _decompose(input_text)
        rng = np.random.default_rng(_stable_seed(self.seed, prompt))
        k = max(parsed.speakers, default=1)
        words, speakers, labels = [], [], []
        for i, word in enumerate(parsed.words):
            label = parsed.labels[i] if parsed.labels else None
            r = rng.random()
            if r < self.hallucination_rate / 3:
                continue
            if r < 2 * self.hallucination_rate / 3:
                word = str(rng.choice(self.hallucination_vocab))
            elif r < self.hallucination_rate:
                words.append(str(rng.choice(self.hallucination_vocab)))
                speakers.append(int(rng.integers(1, k + 1)))
                labels.append(label)
            words.append(word)
            speakers.append(int(rng.integers(1, k + 1)))
            labels.append(label)
        return render(kind, words, speakers, labels if parsed.labels else None).text


def mock_backend(kind: str = "echo", *, script=None, seed: int = 0, targets=None) -> MockBackend:
    """Build a mock backend by name: ``echo``, ``scripted``, ``oracle`` or ``random``."""
    if kind == "echo":
        return EchoBackend()
    if kind == "scripted":
        return ScriptedBackend(script or {})
    if kind == "oracle":
        return OracleBackend(targets or {})
    if kind == "random":
        return RandomBackend(seed)
    raise ValueError(f"unknown mock backend {kind!r}")


class HttpBackend:
    """Client for a remote scoring server.

    Transient failures (connection errors, timeouts, non-200 answers) are
    retried up to ``retries`` attempts in total, then surface as
    :class:`BackendError`.  Malformed bodies raise :class:`ProtocolError`
    immediately.  ``max_in_flight`` bounds concurrent requests from this
    client.
    """

    def __init__(
        self,
        endpoint: str,
        token: Optional[str] = None,
        timeout: float = 30.0,
        retries: int = 3,
        max_in_flight: int = 4,
        backoff: float = 0.5,
        session: Optional[requests.Session] = None,
    ):
        if retries < 1:
            raise ValueError("retries must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.token = token if token is not None else os.environ.get(TOKEN_ENV_VAR)
        self.timeout = timeout
        self.retries = retries
        self.max_in_flight = max_in_flight
        self.backoff = backoff
        self._session = session or requests.Session()
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def _post(self, route, payload):
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        url = f"{self.endpoint}{route}"
        last_error = None
        for attempt in range(1, self.retries + 1):
            try:
                with self._slots:
                    resp = self._session.post(url, json=payload, headers=headers, timeout=self.timeout)
            except requests.RequestException as e:
                last_error = f"{type(e).__name__}: {e}"
            else:
                if resp.status_code == 200:
                    try:
                        return resp.json()
                    except ValueError:
                        raise ProtocolError(f"{url}: response is not JSON") from None
                last_error = f"HTTP {resp.status_code}"
            logger.warning("backend request %s failed (attempt %d/%d): %s", url, attempt, self.retries, last_error)
            if attempt < self.retries and self.backoff:
                time.sleep(self.backoff * 2 ** (attempt - 1))
        raise BackendError(f"{url}: giving up after {self.retries} attempts ({last_error})")

    def score_candidates(self, prefix: str, candidates: Sequence[str]) -> list[float]:
        body = self._post("/v1/score", {"prefix": prefix, "candidates": list(candidates)})
        scores = body.get("scores") if isinstance(body, dict) else None
        if not isinstance(scores, list) or len(scores) != len(candidates):
            raise ProtocolError("response must carry one score per candidate")
        try:
            scores = [float(s) for s in scores]
        except (TypeError, ValueError):
            raise ProtocolError("scores must be numbers") from None
        if not all(math.isfinite(s) for s in scores):
            raise ProtocolError("scores must be finite")
        return scores

    def generate(self, prompt: str) -> str:
        body = self._post("/v1/generate", {"prompt": prompt})
        text = body.get("text") if isinstance(body, dict) else None
        if not isinstance(text, str):
            raise ProtocolError("response must carry a 'text' string")
        return text
