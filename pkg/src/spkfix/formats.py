"""Transcript conditioning formats: normalization, serializer and parser.

Two layouts are supported.  In ``spk_turn`` a speaker marker opens every
turn and each word optionally carries its conditioning label as a suffix::

    <spk:1> hello|high there|high <spk:2> hi|low

In ``spk_word`` every word is followed by its attribution marker, which
holds the speaker and, optionally, the conditioning label::

    hello <spk:1|high> there <spk:1|high> hi <spk:2|low>

Tokens are separated by a single ASCII space.  Normalized words contain
only ``[a-z0-9']`` so markers can never collide with word text.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import ParseError
from .scores import MapperConfig, Variant, conditioning_label
from .transcript import Session

EOS = "<eos>"

_NON_TOKEN_CHARS = re.compile(r"[^a-z0-9' ]")
_WHITESPACE = re.compile(r"\s+")
_WORD = re.compile(r"^[a-z0-9']+$")
_MARKER = re.compile(r"^<spk:(\d+)(?:\|([^<>|\s]+))?>$")
_WORD_TOKEN = re.compile(r"^([a-z0-9']+)(?:\|([^<>|\s]+))?$")

_LABEL_PATTERNS = {
    Variant.LABEL: re.compile(r"^(low|med|high)$"),
    Variant.INT: re.compile(r"^[0-9]$"),
    Variant.PROB: re.compile(r"^(0\.\d\d|1\.00)$"),
}


class FormatKind(str, enum.Enum):
    SPK_TURN = "spk_turn"
    SPK_WORD = "spk_word"


def normalize(text: str) -> str:
    """Lowercase, drop everything except letters, digits, apostrophes and spaces.

    >>> normalize("Hello, World!")
    'hello world'
    """
    text = _WHITESPACE.sub(" ", text.lower())
    text = _NON_TOKEN_CHARS.sub("", text)
    return _WHITESPACE.sub(" ", text).strip()


def speaker_marker(speaker: int, label: Optional[str] = None) -> str:
    return f"<spk:{speaker}>" if label is None else f"<spk:{speaker}|{label}>"


def word_token(word: str, label: Optional[str] = None) -> str:
    return word if label is None else f"{word}|{label}"


def is_marker(token: str) -> bool:
    return token.startswith("<spk:")


@dataclass(frozen=True)
class FormattedTranscript:
    kind: FormatKind
    tokens: tuple
    source_word_count: int

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def word_tokens(self) -> list[str]:
        """Word-position tokens in order (including any conditioning suffix)."""
        return [t for t in self.tokens if not is_marker(t)]

    def words(self) -> list[str]:
        return [t.split("|", 1)[0] for t in self.word_tokens()]

    def __str__(self):
        return self.text


@dataclass(frozen=True)
class ParsedTranscript:
    words: tuple
    speakers: tuple
    labels: Optional[tuple]
    variant: Variant


def render(kind, words: Sequence[str], speakers: Sequence[int], labels=None) -> FormattedTranscript:
    """Lay out words, speakers and optional per-word labels as tokens."""
    kind = FormatKind(kind)
    if labels is None:
        labels = [None] * len(words)
    tokens = []
    current = None
    for word, speaker, label in zip(words, speakers, labels, strict=True):
        if kind is FormatKind.SPK_TURN:
            if speaker != current:
                tokens.append(speaker_marker(speaker))
                current = speaker
            tokens.append(word_token(word, label))
        else:
            tokens.append(word)
            tokens.append(speaker_marker(speaker, label))
    return FormattedTranscript(kind, tuple(tokens), len(words))


def serialize(session: Session, kind, config: MapperConfig = MapperConfig()) -> FormattedTranscript:
    labels = [conditioning_label(w.score, config) for w in session.words]
    return render(kind, session.texts, session.speakers, labels)


def _check_label(label, variant, offset):
    if variant is not None and variant is not Variant.NONE:
        if not _LABEL_PATTERNS[variant].match(label):
            raise ParseError(f"unknown confidence marker {label!r} for variant {variant.value}", offset)
        return variant
    for candidate, pattern in _LABEL_PATTERNS.items():
        if pattern.match(label):
            return candidate
    raise ParseError(f"unknown confidence marker {label!r}", offset)


def _parse_speaker(raw, k, offset):
    speaker = int(raw)
    if not 1 <= speaker <= k:
        raise ParseError(f"speaker index {speaker} outside 1..{k}", offset)
    return speaker


class _LabelTracker:
    """Enforces that labels are either on every word or on none, of one variant."""

    def __init__(self, variant):
        self.variant = None if variant is None else Variant(variant)
        self.labels = []
        self.seen_none = False

    def add(self, label, offset):
        if label is None:
            if self.labels or self.variant not in (None, Variant.NONE):
                raise ParseError("missing confidence marker", offset)
            self.seen_none = True
            return
        if self.seen_none or self.variant is Variant.NONE:
            raise ParseError("unexpected confidence marker", offset)
        self.variant = _check_label(label, self.variant, offset)
        self.labels.append(label)

    def result(self):
        if self.labels:
            return tuple(self.labels), self.variant
        return None, Variant.NONE


def parse(text: str, kind, k: int, variant=None) -> ParsedTranscript:
    """Inverse of :func:`serialize`.

    ``variant`` pins the expected label syntax; when omitted it is inferred
    from the first label seen.  Errors carry the 0-based token offset.
    """
    kind = FormatKind(kind)
    tokens = text.split(" ") if text else []
    words, speakers = [], []
    labels = _LabelTracker(variant)

    if kind is FormatKind.SPK_TURN:
        current = None
        prev_marker = False
        for i, tok in enumerate(tokens):
            m = _MARKER.match(tok)
            if m:
                if prev_marker:
                    raise ParseError("consecutive speaker markers", i)
                if m.group(2) is not None:
                    raise ParseError("speaker marker carries a label in spk_turn", i)
                current = _parse_speaker(m.group(1), k, i)
                prev_marker = True
                continue
            w = _WORD_TOKEN.match(tok)
            if not w:
                raise ParseError(f"malformed token {tok!r}", i)
            if current is None:
                raise ParseError("transcript must open with a speaker marker", i)
            words.append(w.group(1))
            speakers.append(current)
            labels.add(w.group(2), i)
            prev_marker = False
        if prev_marker:
            raise ParseError("empty speaker turn at end of transcript", len(tokens) - 1)
    else:
        for i, tok in enumerate(tokens):
            expect_word = i % 2 == 0
            m = _MARKER.match(tok)
            if expect_word:
                if m:
                    raise ParseError("attribution marker without a preceding word", i)
                if not _WORD.match(tok):
                    raise ParseError(f"malformed word {tok!r}", i)
                words.append(tok)
            else:
                if not m:
                    raise ParseError("missing attribution marker", i)
                speakers.append(_parse_speaker(m.group(1), k, i))
                labels.add(m.group(2), i)
        if len(tokens) % 2:
            raise ParseError("missing attribution marker", len(tokens))

    label_tuple, found_variant = labels.result()
    return ParsedTranscript(tuple(words), tuple(speakers), label_tuple, found_variant)
