"""Greedy constrained decoding that preserves the input word sequence.

At each step the decoder computes the set of tokens the grammar allows
(the next input word, a speaker marker, or end-of-sequence), asks the
language model to score only those candidates, and emits the argmax.
Scoring the allowed continuations directly selects the same token as
masking a full next-token distribution with ``-inf`` outside the allowed
set, and works with hosted models that only expose continuation scores.
Because input words are the only word tokens ever allowed, and each is
allowed only at its own position, the output words equal the input
words exactly, whatever the backend prefers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

from .errors import BackendError, ConfigError, DecodeError, ProtocolError
from .formats import EOS, FormatKind, FormattedTranscript, is_marker, speaker_marker

INPUT_HEADER = "\n### Input:\n"
OUTPUT_HEADER = "\n### Output:\n"


class LmBackend(Protocol):
    """Anything that can score candidate continuations of a prompt."""

    def score_candidates(self, prefix: str, candidates: Sequence[str]) -> list[float]: ...


def build_prompt(instruction: str, input_text: str, generated: Sequence[str] = ()) -> str:
    out = " ".join(generated)
    return f"{instruction}{INPUT_HEADER}{input_text}{OUTPUT_HEADER}{out}"


def split_prompt(prompt: str) -> tuple[str, list[str]]:
    """Recover (input text, generated tokens) from a :func:`build_prompt` string."""
    head, sep, out = prompt.rpartition(OUTPUT_HEADER)
    if not sep:
        raise ValueError("prompt has no output section")
    _, sep, input_text = head.rpartition(INPUT_HEADER)
    if not sep:
        raise ValueError("prompt has no input section")
    return input_text, out.split(" ") if out else []


class Emitted(str, enum.Enum):
    NONE = "none"
    WORD = "word"
    SPEAKER_MARKER = "speaker_marker"


@dataclass
class DecodeState:
    """Progress of one decode through its input; single-use, not shared.

    ``input_words`` are the word-position tokens of the input as they
    must be emitted (``word|label`` in spk_turn, bare words in spk_word);
    ``input_labels`` carries the per-word conditioning label, used to pin
    the label part of spk_word attribution markers.
    """

    kind: FormatKind
    input_words: tuple
    k: int
    input_labels: tuple = ()
    consumed: int = 0
    last_emitted_kind: Emitted = Emitted.NONE
    step: int = 0

    @classmethod
    def from_transcript(cls, transcript: FormattedTranscript, k: int) -> "DecodeState":
        kind = FormatKind(transcript.kind)
        if kind is FormatKind.SPK_TURN:
            return cls(kind, tuple(transcript.word_tokens()), k)
        words, labels = [], []
        for tok in transcript.tokens:
            if is_marker(tok):
                inner = tok[len("<spk:") : -1]
                labels.append(inner.split("|", 1)[1] if "|" in inner else None)
            else:
                words.append(tok)
        return cls(kind, tuple(words), k, tuple(labels))

    @property
    def num_words(self) -> int:
        return len(self.input_words)

    def advance(self, token: str) -> None:
        if is_marker(token):
            self.last_emitted_kind = Emitted.SPEAKER_MARKER
        else:
            self.consumed += 1
            self.last_emitted_kind = Emitted.WORD
        self.step += 1


def get_allowed_words(state: DecodeState) -> tuple:
    """Ordered allowed continuations: next word first, then markers by index."""
    markers_for = range(1, state.k + 1)
    if state.kind is FormatKind.SPK_TURN:
        if state.consumed >= state.num_words:
            return (EOS,)
        nxt = state.input_words[state.consumed]
        if state.last_emitted_kind is Emitted.SPEAKER_MARKER:
            return (nxt,)
        markers = tuple(speaker_marker(j) for j in markers_for)
        if state.last_emitted_kind is Emitted.NONE:
            # A turn transcript must open with a speaker marker.
            return markers
        return (nxt,) + markers
    if state.last_emitted_kind is Emitted.WORD:
        label = state.input_labels[state.consumed - 1] if state.input_labels else None
        return tuple(speaker_marker(j, label) for j in markers_for)
    if state.consumed >= state.num_words:
        return (EOS,)
    return (state.input_words[state.consumed],)


@dataclass(frozen=True)
class DecoderConfig:
    k: int
    max_steps: Optional[int] = None
    instruction_prefix: str = ""

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("speaker count must be >= 1", "k")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("max_steps must be positive", "max_steps")

    def steps_for(self, num_words: int) -> int:
        needed = 2 * num_words + 2
        if self.max_steps is None:
            return needed
        if self.max_steps < needed:
            raise ConfigError(f"max_steps={self.max_steps} < {needed} needed for {num_words} words", "max_steps")
        return self.max_steps


def _argmax(scores) -> int:
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return best


def _checked_scores(lm, prefix, candidates, emitted):
    try:
        scores = list(lm.score_candidates(prefix, list(candidates)))
    except BackendError as e:
        raise DecodeError(f"backend failure: {e}", partial=emitted) from e
    if len(scores) != len(candidates):
        err = ProtocolError(f"expected {len(candidates)} scores, got {len(scores)}")
        raise DecodeError(str(err), partial=emitted) from err
    try:
        scores = [float(s) for s in scores]
    except (TypeError, ValueError):
        err = ProtocolError("non-numeric score")
        raise DecodeError(str(err), partial=emitted) from err
    if not all(math.isfinite(s) for s in scores):
        err = ProtocolError("non-finite score")
        raise DecodeError(str(err), partial=emitted) from err
    return scores


def constrained_decode(transcript: FormattedTranscript, lm: LmBackend, config: DecoderConfig) -> FormattedTranscript:
    """Re-attribute speakers of ``transcript`` under the grammar constraint.

    Singleton allowed sets are emitted without calling the backend.
    """
    state = DecodeState.from_transcript(transcript, config.k)
    max_steps = config.steps_for(state.num_words)
    input_text = transcript.text
    emitted: list[str] = []
    for _ in range(max_steps):
        allowed = get_allowed_words(state)
        if len(allowed) == 1:
            token = allowed[0]
        else:
            prefix = build_prompt(config.instruction_prefix, input_text, emitted)
            token = allowed[_argmax(_checked_scores(lm, prefix, allowed, emitted))]
        if token == EOS:
            break
        emitted.append(token)
        state.advance(token)
    else:
        raise AssertionError(f"decoder exceeded {max_steps} steps without reaching EOS")
    out = FormattedTranscript(state.kind, tuple(emitted), state.num_words)
    assert out.word_tokens() == list(state.input_words)
    return out
