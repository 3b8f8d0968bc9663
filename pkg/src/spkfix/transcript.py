"""Diarized transcript data model and its JSONL representation.

A :class:`Session` is an ordered list of :class:`AttributedWord` objects,
each carrying the first-pass speaker label and a word-level acoustic score.
All types are immutable once constructed.

Session schema, one JSON object per line::

    {"session_id": str, "num_speakers": int,
     "words": [{"text": str, "start": float, "end": float,
                "speaker": int, "score": float}, ...],
     "ref_speakers": [int, ...]}            # optional

Frame posterior sidecar, one JSON object per line::

    {"session_id": str, "frame_rate": float, "posteriors": [[float] * k] * t}
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ParseError, ValidationError

SpeakerLabel = int

TIME_DECIMALS = 2

_WORD_RE = re.compile(r"^[a-z0-9']+$")


def speaker_name(label: SpeakerLabel) -> str:
    return f"spk{label}"


@dataclass(frozen=True)
class AttributedWord:
    """One ASR word with its first-pass speaker and aggregated posterior."""

    text: str
    start_time: float
    end_time: float
    speaker: SpeakerLabel
    score: float = 1.0

    def __post_init__(self):
        if not isinstance(self.text, str) or not _WORD_RE.match(self.text):
            raise ValidationError(
                f"text must be a non-empty normalized token, got {self.text!r}", "text"
            )
        start = _canonical_time(self.start_time, "start")
        end = _canonical_time(self.end_time, "end")
        if start < 0:
            raise ValidationError("start time must be >= 0", "start")
        if end < start:
            raise ValidationError("end time precedes start time", "end")
        object.__setattr__(self, "start_time", start)
        object.__setattr__(self, "end_time", end)
        if isinstance(self.speaker, bool) or not isinstance(self.speaker, (int, np.integer)):
            raise ValidationError("speaker must be an integer", "speaker")
        if self.speaker < 1:
            raise ValidationError("speaker index must be >= 1", "speaker")
        object.__setattr__(self, "speaker", int(self.speaker))
        score = float(self.score)
        if not (0.0 <= score <= 1.0):
            raise ValidationError("score out of range", "score")
        object.__setattr__(self, "score", score)


def _canonical_time(value, name):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValidationError("time must be a number", name) from None
    if not math.isfinite(value):
        raise ValidationError("time must be finite", name)
    return round(value, TIME_DECIMALS)


@dataclass(frozen=True)
class Session:
    """A diarized conversation: speaker-attributed words in time order.

    ``ref_speakers``, when present, is a reference speaker label for every
    word (same length as ``words``); it is only used by oracle and
    evaluation flows.
    """

    session_id: str
    num_speakers: int
    words: tuple = ()
    ref_speakers: Optional[tuple] = None

    def __post_init__(self):
        if not isinstance(self.session_id, str):
            raise ValidationError("session_id must be a string", "session_id")
        if isinstance(self.num_speakers, bool) or not isinstance(self.num_speakers, int):
            raise ValidationError("num_speakers must be an integer", "num_speakers")
        if self.num_speakers < 1:
            raise ValidationError("num_speakers must be >= 1", "num_speakers")
        words = tuple(self.words)
        object.__setattr__(self, "words", words)
        for i, w in enumerate(words):
            if not isinstance(w, AttributedWord):
                raise ValidationError(f"word {i} is not an AttributedWord", "words")
            if w.speaker > self.num_speakers:
                raise ValidationError(
                    f"word {i} speaker {w.speaker} exceeds num_speakers={self.num_speakers}",
                    "speaker",
                )
            if i and w.start_time < words[i - 1].start_time:
                raise ValidationError(f"word {i} starts before word {i - 1}", "start")
        if self.ref_speakers is not None:
            refs = tuple(int(s) for s in self.ref_speakers)
            if len(refs) != len(words):
                raise ValidationError(
                    f"expected {len(words)} reference labels, got {len(refs)}", "ref_speakers"
                )
            if any(s < 1 or s > self.num_speakers for s in refs):
                raise ValidationError("reference label outside 1..num_speakers", "ref_speakers")
            object.__setattr__(self, "ref_speakers", refs)

    def __len__(self):
        return len(self.words)

    @property
    def texts(self) -> list[str]:
        return [w.text for w in self.words]

    @property
    def speakers(self) -> list[int]:
        return [w.speaker for w in self.words]

    @property
    def scores(self) -> list[float]:
        return [w.score for w in self.words]

    def with_speakers(self, speakers: Sequence[int]) -> "Session":
        """Return a copy with every word's speaker replaced, in order."""
        if len(speakers) != len(self.words):
            raise ValidationError(
                f"expected {len(self.words)} speakers, got {len(speakers)}", "speaker"
            )
        words = tuple(replace(w, speaker=int(s)) for w, s in zip(self.words, speakers))
        return replace(self, words=words)

    def with_scores(self, scores: Sequence[float]) -> "Session":
        if len(scores) != len(self.words):
            raise ValidationError(f"expected {len(self.words)} scores, got {len(scores)}", "score")
        words = tuple(replace(w, score=float(s)) for w, s in zip(self.words, scores))
        return replace(self, words=words)


@dataclass(frozen=True)
class FramePosteriors:
    """Per-frame, per-speaker activity probabilities (t x k).

    Rows need not sum to one; overlapping speech can activate several
    speakers at once.
    """

    frame_rate: float
    values: np.ndarray = field(repr=False)
    session_id: str = ""

    def __post_init__(self):
        rate = float(self.frame_rate)
        if not math.isfinite(rate) or rate <= 0:
            raise ValidationError("frame_rate must be > 0", "frame_rate")
        object.__setattr__(self, "frame_rate", rate)
        try:
            values = np.array(self.values, dtype=float)
        except (TypeError, ValueError):
            raise ValidationError("posteriors must be a numeric matrix", "posteriors") from None
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValidationError("posteriors must be a non-empty t x k matrix", "posteriors")
        if not np.all(np.isfinite(values)) or values.min() < 0 or values.max() > 1:
            raise ValidationError("posterior entries must lie in [0, 1]", "posteriors")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def num_speakers(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other):
        if not isinstance(other, FramePosteriors):
            return NotImplemented
        return (
            self.session_id == other.session_id
            and self.frame_rate == other.frame_rate
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


# -- JSONL ------------------------------------------------------------------


def session_to_dict(session: Session) -> dict:
    record = {
        "session_id": session.session_id,
        "num_speakers": session.num_speakers,
        "words": [
            {
                "text": w.text,
                "start": w.start_time,
                "end": w.end_time,
                "speaker": w.speaker,
                "score": w.score,
            }
            for w in session.words
        ],
    }
    if session.ref_speakers is not None:
        record["ref_speakers"] = list(session.ref_speakers)
    return record


def session_from_dict(record) -> Session:
    if not isinstance(record, dict):
        raise ValidationError("session record must be a JSON object", "session")
    for key in ("session_id", "num_speakers", "words"):
        if key not in record:
            raise ValidationError("missing required field", key)
    if not isinstance(record["words"], list):
        raise ValidationError("must be a list", "words")
    words = []
    for i, w in enumerate(record["words"]):
        if not isinstance(w, dict):
            raise ValidationError(f"word {i} must be an object", "words")
        for key in ("text", "start", "end", "speaker", "score"):
            if key not in w:
                raise ValidationError(f"word {i} is missing a field", key)
        words.append(
            AttributedWord(
                text=w["text"],
                start_time=w["start"],
                end_time=w["end"],
                speaker=w["speaker"],
                score=w["score"],
            )
        )
    refs = record.get("ref_speakers")
    if refs is not None and not isinstance(refs, list):
        raise ValidationError("must be a list", "ref_speakers")
    return Session(
        session_id=record["session_id"],
        num_speakers=record["num_speakers"],
        words=tuple(words),
        ref_speakers=None if refs is None else tuple(refs),
    )


def _read_jsonl(path):
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"{path}: malformed JSON: {e.msg}", location=lineno) from None


def load_sessions(path) -> list[Session]:
    """Read and validate every session in a JSONL file.

    Raises :class:`ParseError` for malformed lines and
    :class:`ValidationError` (with the offending line number in the
    message) for invariant violations.  Nothing is returned on failure.
    """
    sessions = []
    for lineno, record in _read_jsonl(path):
        try:
            sessions.append(session_from_dict(record))
        except ValidationError as e:
            raise ValidationError(f"{path}:{lineno}: {e}") from None
    return sessions


def save_sessions(sessions: Iterable[Session], path) -> None:
    lines = [json.dumps(session_to_dict(s)) + "\n" for s in sessions]
    Path(path).write_text("".join(lines), encoding="utf-8")


def load_posteriors(path) -> dict[str, FramePosteriors]:
    """Read a posterior sidecar file, keyed by session id."""
    out = {}
    for lineno, record in _read_jsonl(path):
        try:
            post = FramePosteriors(
                frame_rate=record["frame_rate"],
                values=record["posteriors"],
                session_id=str(record["session_id"]),
            )
        except (KeyError, TypeError) as e:
            raise ValidationError(f"{path}:{lineno}: missing or malformed field {e}") from None
        except ValidationError as e:
            raise ValidationError(f"{path}:{lineno}: {e}") from None
        out[post.session_id] = post
    return out


def save_posteriors(posteriors: Iterable[FramePosteriors], path) -> None:
    lines = [
        json.dumps(
            {
                "session_id": p.session_id,
                "frame_rate": p.frame_rate,
                "posteriors": p.values.tolist(),
            }
        )
        + "\n"
        for p in posteriors
    ]
    Path(path).write_text("".join(lines), encoding="utf-8")
