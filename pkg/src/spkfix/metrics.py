"""WER, concatenated minimum-permutation WER (cpWER) and their gap.

cpWER concatenates every speaker's words (in session order), pairs
reference and hypothesis speakers by an optimal assignment over the
pairwise edit distances, and charges unmatched speakers their full word
count.  ``delta_cp = cpwer - wer`` isolates speaker-attribution error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ValidationError
from .transcript import Session
from .transfer import EditCounts, edit_counts


def wer(ref_words: Sequence[str], hyp_words: Sequence[str]) -> float:
    if not len(ref_words):
        raise ValidationError("undefined WER for an empty reference", "ref")
    return edit_counts(ref_words, hyp_words).errors / len(ref_words)


def delta_cp(cpwer: float, wer: float) -> float:
    return cpwer - wer


@dataclass(frozen=True)
class CpWerReport:
    wer: float
    cpwer: float
    delta_cp: float
    mapping: dict = field(default_factory=dict)
    per_speaker_errors: tuple = ()
    ref_words: int = 0
    wer_errors: int = 0
    cpwer_errors: int = 0

    def to_dict(self) -> dict:
        return {
            "wer": self.wer,
            "cpwer": self.cpwer,
            "delta_cp": self.delta_cp,
            "mapping": {str(h): r for h, r in sorted(self.mapping.items())},
            "per_speaker_errors": [list(e) for e in self.per_speaker_errors],
            "ref_words": self.ref_words,
            "wer_errors": self.wer_errors,
            "cpwer_errors": self.cpwer_errors,
        }


@dataclass(frozen=True)
class _CpResult:
    errors: int
    ref_words: int
    mapping: dict
    per_speaker: tuple


def _cp_assignment(ref: Mapping, hyp: Mapping) -> _CpResult:
    ref_ids = sorted(ref)
    hyp_ids = sorted(hyp)
    n_ref = sum(len(ref[r]) for r in ref_ids)
    if n_ref == 0:
        raise ValidationError("reference has no words", "ref")
    size = max(len(ref_ids), len(hyp_ids))
    # Padded square problem: a dummy partner costs the real speaker's word count.
    cost = np.zeros((size, size), dtype=np.int64)
    counts = {}
    for i in range(size):
        for j in range(size):
            if i < len(ref_ids) and j < len(hyp_ids):
                c = edit_counts(ref[ref_ids[i]], hyp[hyp_ids[j]])
                counts[i, j] = c
                cost[i, j] = c.errors
            elif i < len(ref_ids):
                cost[i, j] = len(ref[ref_ids[i]])
            elif j < len(hyp_ids):
                cost[i, j] = len(hyp[hyp_ids[j]])
    rows, cols = linear_sum_assignment(cost)
    mapping = {}
    per_speaker = []
    for i, j in zip(rows, cols):
        if i < len(ref_ids) and j < len(hyp_ids):
            mapping[hyp_ids[j]] = ref_ids[i]
            c = counts[i, j]
        elif i < len(ref_ids):
            c = EditCounts(deletions=len(ref[ref_ids[i]]))
        elif j < len(hyp_ids):
            c = EditCounts(insertions=len(hyp[hyp_ids[j]]))
        else:
            continue
        per_speaker.append((c.insertions, c.deletions, c.substitutions))
    return _CpResult(int(cost[rows, cols].sum()), n_ref, mapping, tuple(per_speaker))


def cpwer(ref: Mapping, hyp: Mapping) -> CpWerReport:
    """cpWER between per-speaker word lists ``{speaker: [words]}``.

    The returned report's ``wer`` is that of the speaker-agnostic
    concatenations in speaker order; use :func:`evaluate_session` for the
    session-order WER.
    """
    res = _cp_assignment(ref, hyp)
    ref_all = [w for r in sorted(ref) for w in ref[r]]
    hyp_all = [w for h in sorted(hyp) for w in hyp[h]]
    wer_errors = edit_counts(ref_all, hyp_all).errors
    w = wer_errors / res.ref_words
    cp = res.errors / res.ref_words
    return CpWerReport(w, cp, delta_cp(cp, w), res.mapping, res.per_speaker, res.ref_words, wer_errors, res.errors)


def group_by_speaker(session: Session) -> dict:
    groups: dict = {}
    for w in session.words:
        groups.setdefault(w.speaker, []).append(w.text)
    return groups


def evaluate_session(ref_session: Session, hyp_session: Session) -> CpWerReport:
    if not len(ref_session):
        raise ValidationError(f"session {ref_session.session_id!r} has an empty reference", "ref")
    res = _cp_assignment(group_by_speaker(ref_session), group_by_speaker(hyp_session))
    wer_errors = edit_counts(ref_session.texts, hyp_session.texts).errors
    n = res.ref_words
    w, cp = wer_errors / n, res.errors / n
    return CpWerReport(w, cp, delta_cp(cp, w), res.mapping, res.per_speaker, n, wer_errors, res.errors)


def aggregate(reports: Sequence[CpWerReport]) -> dict:
    """Micro-average over total reference words."""
    n = sum(r.ref_words for r in reports)
    if n == 0:
        return {"wer": 0.0, "cpwer": 0.0, "delta_cp": 0.0, "sessions": len(reports)}
    w = sum(r.wer_errors for r in reports) / n
    cp = sum(r.cpwer_errors for r in reports) / n
    return {"wer": w, "cpwer": cp, "delta_cp": delta_cp(cp, w), "sessions": len(reports)}
