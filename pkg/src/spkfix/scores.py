"""Word-level acoustic scores and the mapping into conditioning labels.

Frame-level diarization posteriors are median-filtered per speaker track,
then mean-pooled over each word's frames for the word's assigned speaker.
The resulting scalar per word is mapped to a confidence category
(low/med/high), a 10-way integer class, or rendered raw.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, ValidationError
from .transcript import FramePosteriors, Session

DEFAULT_TH_LOW = 0.5
DEFAULT_TH_MED = 0.8
DEFAULT_MEDIAN_WINDOW = 11

# Guards frame-index arithmetic against float noise such as 0.07 * 100.
_FRAME_EPS = 1e-6


class Variant(str, enum.Enum):
    """How the acoustic score is exposed to the language model."""

    NONE = "none"
    PROB = "prob"
    INT = "int"
    LABEL = "label"


class Confidence(enum.IntEnum):
    LOW = 0
    MED = 1
    HIGH = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "Confidence":
        return cls[label.upper()]


@dataclass(frozen=True)
class MapperConfig:
    th_low: float = DEFAULT_TH_LOW
    th_med: float = DEFAULT_TH_MED
    variant: Variant = Variant.LABEL

    def __post_init__(self):
        try:
            object.__setattr__(self, "variant", Variant(self.variant))
        except ValueError:
            raise ConfigError(f"unknown conditioning variant {self.variant!r}", "variant") from None
        for key in ("th_low", "th_med"):
            value = getattr(self, key)
            if not (0.0 < value < 1.0):
                raise ConfigError("threshold must lie in (0, 1)", key)
        if not self.th_low < self.th_med:
            raise ConfigError("th_low must be smaller than th_med", "th_low")


def median_filter(series, window: int = DEFAULT_MEDIAN_WINDOW) -> np.ndarray:
    """Running median with edge-replication padding.

    >>> median_filter([0.1, 0.9, 0.2], 3).tolist()
    [0.1, 0.2, 0.2]
    """
    if isinstance(window, bool) or not isinstance(window, (int, np.integer)):
        raise ConfigError("median window must be an integer", "median_window")
    if window < 1 or window % 2 == 0:
        raise ConfigError(f"median window must be odd and positive, got {window}", "median_window")
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValidationError("series must be a non-empty 1-D sequence", "series")
    if window == 1:
        return x.copy()
    half = window // 2
    padded = np.pad(x, half, mode="edge")
    return np.median(sliding_window_view(padded, window), axis=1)


def word_frame_range(start: float, end: float, frame_rate: float, num_frames: int) -> range:
    """Frames whose interval [i/fr, (i+1)/fr) overlaps the word [start, end).

    A word overlapping no frame (zero duration, or past the last frame)
    falls back to the single nearest frame.
    """
    first = math.floor(start * frame_rate + _FRAME_EPS)
    stop = math.ceil(end * frame_rate - _FRAME_EPS)
    first, stop = max(first, 0), min(stop, num_frames)
    if stop > first:
        return range(first, stop)
    center = (start + end) / 2 * frame_rate
    nearest = min(max(int(math.floor(center + _FRAME_EPS)), 0), num_frames - 1)
    return range(nearest, nearest + 1)


def filter_tracks(posteriors: FramePosteriors, window: int = DEFAULT_MEDIAN_WINDOW) -> np.ndarray:
    """Median-filter every speaker track independently; returns t x k."""
    values = posteriors.values
    return np.stack([median_filter(values[:, j], window) for j in range(values.shape[1])], axis=1)


def pool_word_scores(
    posteriors: FramePosteriors, session: Session, window: int = DEFAULT_MEDIAN_WINDOW
) -> Session:
    """Replace each word's score with its pooled, filtered posterior.

    The score of a word is the mean over its frames of the filtered track
    belonging to the word's assigned speaker.
    """
    if posteriors.num_speakers != session.num_speakers:
        raise ValidationError(
            f"posteriors have {posteriors.num_speakers} speakers, "
            f"session {session.session_id!r} declares {session.num_speakers}",
            "posteriors",
        )
    filtered = filter_tracks(posteriors, window)
    scores = []
    for w in session.words:
        frames = word_frame_range(w.start_time, w.end_time, posteriors.frame_rate, posteriors.num_frames)
        track = filtered[frames.start : frames.stop, w.speaker - 1]
        scores.append(float(np.clip(track.mean(), 0.0, 1.0)))
    return session.with_scores(scores)


def map_score(score: float, config: MapperConfig = MapperConfig()) -> Confidence:
    """Bucket a score into low (<= th_low), med (<= th_med) or high."""
    if score > config.th_med:
        return Confidence.HIGH
    if score > config.th_low:
        return Confidence.MED
    return Confidence.LOW


def map_score_int(score: float) -> int:
    return min(int(math.floor(score * 10)), 9)


def conditioning_label(score: float, config: MapperConfig = MapperConfig()):
    """Surface text of the conditioning marker for one word, or None."""
    variant = config.variant
    if variant is Variant.NONE:
        return None
    if variant is Variant.LABEL:
        return map_score(score, config).label
    if variant is Variant.INT:
        return str(map_score_int(score))
    return f"{score:.2f}"
