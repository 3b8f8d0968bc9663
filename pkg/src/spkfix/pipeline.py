"""End-to-end speaker correction: chunk, serialize, decode, parse, stitch."""

from __future__ import annotations

import re
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Callable, Optional, Sequence, Union

from .backends import EchoBackend, HttpBackend, OracleBackend, RandomBackend
from .decoder import DecoderConfig, build_prompt, constrained_decode
from .errors import BackendError, ConfigError, DecodeError
from .formats import FormatKind, normalize, parse, serialize
from .scores import DEFAULT_MEDIAN_WINDOW, MapperConfig
from .transcript import Session
from .transfer import edit_distance, make_oracle_target, transfer_speakers

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

BACKENDS = ("mock-echo", "mock-scripted", "mock-random", "http")


@dataclass(frozen=True)
class PipelineConfig:
    format: FormatKind = FormatKind.SPK_WORD
    mapper: MapperConfig = field(default_factory=MapperConfig)
    chunk_size: int = 64
    max_steps: Optional[int] = None
    median_window: int = DEFAULT_MEDIAN_WINDOW
    backend: str = "mock-echo"
    endpoint: Optional[str] = None
    timeout: float = 30.0
    retries: int = 3
    max_in_flight: int = 4
    workers: int = 1
    seed: int = 0
    instruction_prefix: str = ""
    best_effort: bool = False
    tpst_baseline: bool = False

    def __post_init__(self):
        try:
            object.__setattr__(self, "format", FormatKind(self.format))
        except ValueError:
            raise ConfigError(f"unknown format {self.format!r}", "format") from None
        for key in ("chunk_size", "workers", "retries", "max_in_flight"):
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError("must be a positive integer", key)
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}", "backend")
        if self.backend == "http" and not self.endpoint:
            raise ConfigError("required when backend = 'http'", "endpoint")

    def decoder_config(self, k: int) -> DecoderConfig:
        return DecoderConfig(k=k, max_steps=self.max_steps, instruction_prefix=self.instruction_prefix)

    @classmethod
    def from_mapping(cls, values: dict) -> "PipelineConfig":
        """Build from flat keys, as found in a config file or CLI overrides.

        Mapper keys are ``th_low``, ``th_med`` and ``conditioning_variant``.
        """
        values = dict(values)
        mapper_keys = {"th_low": "th_low", "th_med": "th_med", "conditioning_variant": "variant"}
        mapper_args = {dst: values.pop(src) for src, dst in mapper_keys.items() if src in values}
        known = {f.name for f in fields(cls)} - {"mapper"}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError("unknown configuration key", unknown[0])
        try:
            mapper = MapperConfig(**mapper_args)
        except TypeError as e:
            raise ConfigError(str(e), "mapper") from None
        return cls(mapper=mapper, **values)

    def to_mapping(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "mapper"}
        out["format"] = self.format.value
        out.update(th_low=self.mapper.th_low, th_med=self.mapper.th_med,
                   conditioning_variant=self.mapper.variant.value)
        return out


def load_config(path) -> dict:
    """Read a TOML config file into flat keys (unvalidated)."""
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}", "config") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML: {e}", "config") from None
    # A [pipeline] table is accepted as well as top-level keys.
    if isinstance(data.get("pipeline"), dict):
        data = {**{k: v for k, v in data.items() if k != "pipeline"}, **data["pipeline"]}
    return data


@dataclass(frozen=True)
class Chunk:
    session_id: str
    chunk_index: int
    words: tuple
    offset: int = 0


def chunk_session(session: Session, chunk_size: int = 64) -> list[Chunk]:
    if chunk_size < 1:
        raise ConfigError("must be >= 1", "chunk_size")
    return [
        Chunk(session.session_id, i, session.words[start : start + chunk_size], start)
        for i, start in enumerate(range(0, len(session.words), chunk_size))
    ]


def _chunk_session_view(session: Session, chunk: Chunk) -> Session:
    return Session(session.session_id, session.num_speakers, chunk.words)


@dataclass
class CorrectionStats:
    """Counters accumulated across a run; safe to update from worker threads."""

    sessions: int = 0
    chunks: int = 0
    lm_calls: int = 0
    failed_chunks: int = 0
    fallback_chunks: int = 0
    altered_words: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add(self, **counts):
        with self._lock:
            for key, value in counts.items():
                setattr(self, key, getattr(self, key) + value)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if not f.name.startswith("_")}


class _Metered:
    """Counts backend calls.

    Concurrency limits are the backend's own concern (see
    ``HttpBackend.max_in_flight``) so they hold across sessions.
    """

    def __init__(self, inner, stats: Optional[CorrectionStats]):
        self.inner = inner
        self.stats = stats

    def _count(self):
        if self.stats is not None:
            self.stats.add(lm_calls=1)

    def score_candidates(self, prefix, candidates):
        self._count()
        return self.inner.score_candidates(prefix, candidates)

    def generate(self, prompt):
        self._count()
        return self.inner.generate(prompt)


def correct_session(session: Session, lm, config: PipelineConfig, stats: Optional[CorrectionStats] = None) -> Session:
    """Constrained-decode every chunk and stitch the new speaker labels back.

    Words, timings and scores are never touched.  With
    ``config.best_effort`` a failing chunk keeps its first-pass labels;
    otherwise the failure is raised as :class:`DecodeError`.
    """
    lm = _Metered(lm, stats)
    dconf = config.decoder_config(session.num_speakers)
    speakers = []
    chunks = chunk_session(session, config.chunk_size)
    for chunk in chunks:
        view = _chunk_session_view(session, chunk)
        formatted = serialize(view, config.format, config.mapper)
        try:
            decoded = constrained_decode(formatted, lm, dconf)
        except DecodeError as e:
            if not config.best_effort:
                raise DecodeError(str(e), e.partial, session.session_id, chunk.chunk_index) from e
            if stats is not None:
                stats.add(failed_chunks=1)
            speakers.extend(view.speakers)
            continue
        parsed = parse(decoded.text, config.format, session.num_speakers, config.mapper.variant)
        assert list(parsed.words) == view.texts
        speakers.extend(parsed.speakers)
    if stats is not None:
        stats.add(sessions=1, chunks=len(chunks))
    return session.with_speakers(speakers)


_LENIENT_MARKER = re.compile(r"^<spk:(\d+)(?:\|[^>]*)?>$")


def lenient_parse(text: str, kind, k: int) -> tuple[list[str], list[int]]:
    """Extract words and speaker labels from free-form model output.

    Unknown tokens are normalized and kept as words; markers with an
    out-of-range speaker are dropped.  Returns empty lists when no usable
    speaker marker is present.
    """
    kind = FormatKind(kind)
    words: list[str] = []
    labels: list[Optional[int]] = []
    marker_seen = False
    current = None
    pending_from = 0  # spk_word: first word still waiting for its marker
    for tok in text.split():
        m = _LENIENT_MARKER.match(tok)
        if m:
            spk = int(m.group(1))
            if not 1 <= spk <= k:
                continue
            marker_seen = True
            if kind is FormatKind.SPK_TURN:
                current = spk
            else:
                for i in range(pending_from, len(words)):
                    labels[i] = spk
                pending_from = len(words)
            continue
        word = normalize(tok.split("|", 1)[0])
        for piece in word.split(" ") if word else ():
            words.append(piece)
            labels.append(current if kind is FormatKind.SPK_TURN else None)
    if not marker_seen or not words:
        return [], []
    assigned = [s for s in labels if s is not None]
    if not assigned:
        return [], []
    # Leading (turn) or trailing (word) gaps inherit the nearest label.
    last = assigned[0]
    filled = []
    for s in labels:
        last = s if s is not None else last
        filled.append(last)
    return words, filled


def correct_with_tpst(session: Session, lm, config: PipelineConfig, stats: Optional[CorrectionStats] = None) -> Session:
    """Baseline: free-form generation, then label transfer onto the input words.

    Chunks whose generation yields no usable labels keep their first-pass
    speakers and are counted in ``stats.fallback_chunks``.
    """
    lm = _Metered(lm, stats)
    speakers = []
    chunks = chunk_session(session, config.chunk_size)
    for chunk in chunks:
        view = _chunk_session_view(session, chunk)
        formatted = serialize(view, config.format, config.mapper)
        prompt = build_prompt(config.instruction_prefix, formatted.text)
        try:
            generated = lm.generate(prompt)
        except BackendError as e:
            if not config.best_effort:
                raise DecodeError(f"backend failure: {e}", (), session.session_id, chunk.chunk_index) from e
            if stats is not None:
                stats.add(failed_chunks=1)
            speakers.extend(view.speakers)
            continue
        gen_words, gen_speakers = lenient_parse(generated, config.format, session.num_speakers)
        if not gen_words:
            if stats is not None:
                stats.add(fallback_chunks=1)
            speakers.extend(view.speakers)
            continue
        if stats is not None:
            stats.add(altered_words=edit_distance(gen_words, view.texts))
        speakers.extend(transfer_speakers(gen_words, gen_speakers, view.texts))
    if stats is not None:
        stats.add(sessions=1, chunks=len(chunks))
    return session.with_speakers(speakers)


def oracle_backend(hyp: Session, ref: Session, chunk_size: int = 64) -> OracleBackend:
    """Mock backend that steers every chunk of ``hyp`` toward reference labels."""
    target = make_oracle_target(hyp, ref)
    table = {}
    for chunk in chunk_session(target, chunk_size):
        table[tuple(w.text for w in chunk.words)] = tuple(w.speaker for w in chunk.words)
    return OracleBackend(table)


BackendSource = Union[object, Callable[[Session], object]]


def build_backend(config: PipelineConfig, references: Optional[dict] = None) -> Callable[[Session], object]:
    """Backend factory for ``config.backend``; returns ``session -> backend``.

    ``mock-scripted`` needs ``references`` (session id -> reference
    session) and steers each session toward its reference labels.
    """
    if config.backend == "mock-echo":
        shared = EchoBackend()
        return lambda session: shared
    if config.backend == "mock-random":
        shared = RandomBackend(config.seed)
        return lambda session: shared
    if config.backend == "mock-scripted":
        if references is None:
            raise ConfigError("mock-scripted backend needs reference sessions", "script")

        def for_session(session):
            ref = references.get(session.session_id)
            if ref is None:
                return EchoBackend()
            return oracle_backend(session, ref, config.chunk_size)

        return for_session
    shared = HttpBackend(config.endpoint, timeout=config.timeout, retries=config.retries,
                         max_in_flight=config.max_in_flight)
    return lambda session: shared


def correct_sessions(
    sessions: Sequence[Session],
    backend: BackendSource,
    config: PipelineConfig,
    stats: Optional[CorrectionStats] = None,
) -> list[Session]:
    """Correct many sessions on a bounded worker pool; output keeps input order.

    ``backend`` is either a backend object shared by all sessions or a
    callable returning the backend for a given session.
    """
    if hasattr(backend, "score_candidates") or hasattr(backend, "generate"):
        shared = backend
        backend_for = lambda session: shared  # noqa: E731
    else:
        backend_for = backend
    correct = correct_with_tpst if config.tpst_baseline else correct_session

    def run(session):
        return correct(session, backend_for(session), config, stats)

    if config.workers == 1:
        return [run(s) for s in sessions]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(run, sessions))

