"""Synthetic two-party conversations with corrupted first-pass speaker labels.

Reference sessions alternate speakers in turns of random length.  The
hypothesis copy has a fraction of its speaker labels flipped, favouring
words near turn boundaries, and carries acoustic scores that are low on
flipped words, middling next to boundaries and high elsewhere.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

import numpy as np

from .transcript import AttributedWord, FramePosteriors, Session


@lru_cache(maxsize=1)
def word_list() -> tuple:
    text = resources.files("spkfix").joinpath("data/words.txt").read_text(encoding="utf-8")
    return tuple(w for w in text.split() if w)


def _boundary_distance(speakers: np.ndarray) -> np.ndarray:
    """Distance (in words) from each word to the nearest speaker change."""
    n = len(speakers)
    change = np.flatnonzero(speakers[1:] != speakers[:-1])
    if change.size == 0:
        return np.full(n, n, dtype=float)
    edges = np.concatenate([change, change + 1])
    idx = np.arange(n)
    return np.abs(idx[:, None] - edges[None, :]).min(axis=1).astype(float)


def synth_pair(
    rng: np.random.Generator,
    session_id: str,
    num_speakers: int = 2,
    min_words: int = 30,
    max_words: int = 150,
    corruption_rate: float = 0.1,
    turn_bias: float = 4.0,
    mean_turn: float = 6.0,
) -> tuple[Session, Session]:
    vocab = word_list()
    n = int(rng.integers(min_words, max_words + 1))
    ref = np.empty(n, dtype=int)
    i, speaker = 0, int(rng.integers(1, num_speakers + 1))
    while i < n:
        length = 1 + int(rng.geometric(1.0 / mean_turn))
        ref[i : i + length] = speaker
        i += length
        if num_speakers > 1:
            speaker = int(rng.choice([s for s in range(1, num_speakers + 1) if s != speaker]))

    dist = _boundary_distance(ref)
    hyp = ref.copy()
    n_flip = int(round(corruption_rate * n))
    flipped = np.zeros(n, dtype=bool)
    if n_flip and num_speakers > 1:
        weights = 1.0 + turn_bias * np.exp(-dist)
        chosen = rng.choice(n, size=n_flip, replace=False, p=weights / weights.sum())
        flipped[chosen] = True
        for c in chosen:
            others = [s for s in range(1, num_speakers + 1) if s != ref[c]]
            hyp[c] = int(rng.choice(others))

    scores = np.where(
        flipped,
        rng.uniform(0.05, 0.5, n),
        np.where(dist <= 1, rng.uniform(0.5, 0.8, n), rng.uniform(0.8, 1.0, n)),
    )

    texts = rng.choice(len(vocab), size=n)
    t = 0.0
    ref_words, hyp_words = [], []
    for j in range(n):
        t += float(rng.uniform(0.0, 0.15))
        start = round(t, 2)
        t = start + float(rng.uniform(0.15, 0.5))
        end = round(t, 2)
        text = vocab[texts[j]]
        ref_words.append(AttributedWord(text, start, end, int(ref[j]), 1.0))
        hyp_words.append(AttributedWord(text, start, end, int(hyp[j]), round(float(scores[j]), 4)))
    ref_session = Session(session_id, num_speakers, tuple(ref_words))
    hyp_session = Session(session_id, num_speakers, tuple(hyp_words), ref_speakers=tuple(int(s) for s in ref))
    return ref_session, hyp_session


def synth_sessions(
    num_sessions: int,
    seed: int = 0,
    corruption_rate: float = 0.1,
    turn_bias: float = 4.0,
    num_speakers: int = 2,
    min_words: int = 30,
    max_words: int = 150,
) -> tuple[list[Session], list[Session]]:
    """Return ``(references, hypotheses)``; deterministic for a given seed."""
    refs, hyps = [], []
    for i in range(num_sessions):
        rng = np.random.default_rng([seed, i])
        ref, hyp = synth_pair(
            rng, f"synth-{seed}-{i:05d}", num_speakers, min_words, max_words, corruption_rate, turn_bias
        )
        refs.append(ref)
        hyps.append(hyp)
    return refs, hyps


def synth_posteriors(session: Session, frame_rate: float = 100.0) -> FramePosteriors:
    """Frame posteriors consistent with a session's scores.

    Inside each word the assigned speaker's track equals the word score and
    every other track its complement; silence frames are zero.
    """
    end = max((w.end_time for w in session.words), default=0.0)
    t = max(int(np.ceil(end * frame_rate)) + 1, 1)
    values = np.zeros((t, session.num_speakers))
    for w in session.words:
        a = int(np.floor(w.start_time * frame_rate + 1e-6))
        b = max(int(np.ceil(w.end_time * frame_rate - 1e-6)), a + 1)
        values[a:b, :] = 1.0 - w.score
        values[a:b, w.speaker - 1] = w.score
    return FramePosteriors(frame_rate, values, session.session_id)
