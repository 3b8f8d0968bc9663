"""scikit-learn compatible wrappers around the correction pipeline.

The estimators are stateless apart from validated configuration, so
``fit`` only checks parameters; they still follow the estimator
conventions (``get_params``/``set_params``, ``clone``, fitted attributes
ending in ``_``) so they compose with pipelines and parameter searches.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .backends import EchoBackend
from .metrics import aggregate, evaluate_session
from .pipeline import CorrectionStats, PipelineConfig, correct_sessions
from .scores import (
    DEFAULT_MEDIAN_WINDOW,
    DEFAULT_TH_LOW,
    DEFAULT_TH_MED,
    MapperConfig,
    conditioning_label,
    pool_word_scores,
)
from .transcript import Session


def _check_sessions(X):
    X = list(X)
    for i, s in enumerate(X):
        if not isinstance(s, Session):
            raise TypeError(f"X[{i}] is {type(s).__name__}, expected Session")
    return X


class ScoreMapper(TransformerMixin, BaseEstimator):
    """Map word scores in [0, 1] to conditioning labels.

    ``transform`` takes an array-like of scores (any shape that
    ``check_array`` accepts after reshaping to one column) and returns an
    object array of label strings, or ``None`` entries for ``variant='none'``.
    """

    def __init__(self, th_low=DEFAULT_TH_LOW, th_med=DEFAULT_TH_MED, variant="label"):
        self.th_low = th_low
        self.th_med = th_med
        self.variant = variant

    def fit(self, X=None, y=None):
        self.config_ = MapperConfig(self.th_low, self.th_med, self.variant)
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        arr = np.asarray(X, dtype=float)
        shape = arr.shape
        flat = check_array(arr.reshape(-1, 1), ensure_all_finite=True).ravel()
        if flat.size and (flat.min() < 0 or flat.max() > 1):
            raise ValueError("scores must lie in [0, 1]")
        out = np.array([conditioning_label(s, self.config_) for s in flat], dtype=object)
        return out.reshape(shape)


class WordScorePooler(TransformerMixin, BaseEstimator):
    """Fill word scores from frame posteriors.

    ``X`` is a sequence of ``(Session, FramePosteriors)`` pairs; the output
    is the list of rescored sessions.
    """

    def __init__(self, median_window=DEFAULT_MEDIAN_WINDOW):
        self.median_window = median_window

    def fit(self, X=None, y=None):
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ValueError(f"median_window must be odd and positive, got {self.median_window}")
        self.median_window_ = int(self.median_window)
        return self

    def transform(self, X):
        check_is_fitted(self, "median_window_")
        return [pool_word_scores(post, session, self.median_window_) for session, post in X]


class SpeakerErrorCorrector(TransformerMixin, BaseEstimator):
    """Second-pass speaker corrector over lists of :class:`Session`.

    ``backend`` is any object with ``score_candidates`` (and ``generate``
    for ``decoding='tpst'``), or a callable returning one per session.
    ``None`` uses an echo backend, which leaves labels unchanged.

    ``score(X, y)`` returns the negated aggregate cpWER - WER gap of the
    corrected ``X`` against reference sessions ``y``, so higher is better.
    """

    def __init__(
        self,
        backend=None,
        format="spk_word",
        variant="label",
        th_low=DEFAULT_TH_LOW,
        th_med=DEFAULT_TH_MED,
        chunk_size=64,
        decoding="constrained",
        instruction_prefix="",
        workers=1,
        best_effort=False,
    ):
        self.backend = backend
        self.format = format
        self.variant = variant
        self.th_low = th_low
        self.th_med = th_med
        self.chunk_size = chunk_size
        self.decoding = decoding
        self.instruction_prefix = instruction_prefix
        self.workers = workers
        self.best_effort = best_effort

    def fit(self, X=None, y=None):
        if self.decoding not in ("constrained", "tpst"):
            raise ValueError(f"decoding must be 'constrained' or 'tpst', got {self.decoding!r}")
        self.config_ = PipelineConfig(
            format=self.format,
            mapper=MapperConfig(self.th_low, self.th_med, self.variant),
            chunk_size=self.chunk_size,
            instruction_prefix=self.instruction_prefix,
            workers=self.workers,
            best_effort=self.best_effort,
            tpst_baseline=self.decoding == "tpst",
        )
        self.backend_ = self.backend if self.backend is not None else EchoBackend()
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        stats = CorrectionStats()
        out = correct_sessions(_check_sessions(X), self.backend_, self.config_, stats)
        self.stats_ = stats
        return out

    def score(self, X, y):
        refs = {s.session_id: s for s in _check_sessions(y)}
        corrected = self.transform(X)
        reports = [evaluate_session(refs[h.session_id], h) for h in corrected]
        return -aggregate(reports)["delta_cp"]
