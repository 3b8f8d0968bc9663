"""Levenshtein word alignment and transcript-preserving speaker transfer."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import ValidationError
from .transcript import Session


class OpKind(str, enum.Enum):
    MATCH = "match"
    SUBSTITUTE = "substitute"
    INSERT = "insert"
    DELETE = "delete"


@dataclass(frozen=True)
class AlignmentOp:
    kind: OpKind
    src_index: Optional[int] = None
    tgt_index: Optional[int] = None

    def __post_init__(self):
        has_src, has_tgt = self.src_index is not None, self.tgt_index is not None
        ok = {
            OpKind.MATCH: has_src and has_tgt,
            OpKind.SUBSTITUTE: has_src and has_tgt,
            OpKind.INSERT: has_tgt and not has_src,
            OpKind.DELETE: has_src and not has_tgt,
        }[self.kind]
        if not ok:
            raise ValidationError(f"{self.kind.value} op has wrong indices", "alignment")

    @property
    def cost(self) -> int:
        return 0 if self.kind is OpKind.MATCH else 1


def _distance_table(src, tgt):
    m = len(tgt)
    d = [list(range(m + 1))]
    for i, s in enumerate(src, start=1):
        prev = d[-1]
        row = [i] + [0] * m
        for j in range(1, m + 1):
            row[j] = min(prev[j - 1] + (s != tgt[j - 1]), prev[j] + 1, row[j - 1] + 1)
        d.append(row)
    return d


def align(src_words: Sequence[str], tgt_words: Sequence[str]) -> list[AlignmentOp]:
    """Minimum-edit-distance alignment of ``src_words`` onto ``tgt_words``.

    Among equal-cost paths the backtrace prefers match, then substitute,
    then delete, then insert.
    """
    src, tgt = list(src_words), list(tgt_words)
    d = _distance_table(src, tgt)
    ops = []
    i, j = len(src), len(tgt)
    while i or j:
        here = d[i][j]
        if i and j and src[i - 1] == tgt[j - 1] and d[i - 1][j - 1] == here:
            ops.append(AlignmentOp(OpKind.MATCH, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i and j and d[i - 1][j - 1] + 1 == here:
            ops.append(AlignmentOp(OpKind.SUBSTITUTE, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i and d[i - 1][j] + 1 == here:
            ops.append(AlignmentOp(OpKind.DELETE, src_index=i - 1))
            i -= 1
        else:
            ops.append(AlignmentOp(OpKind.INSERT, tgt_index=j - 1))
            j -= 1
    ops.reverse()
    return ops


@dataclass(frozen=True)
class EditCounts:
    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def edit_counts(ref_words: Sequence[str], hyp_words: Sequence[str]) -> EditCounts:
    """Substitution/deletion/insertion counts turning ``ref_words`` into ``hyp_words``."""
    sub = dele = ins = 0
    for op in align(ref_words, hyp_words):
        if op.kind is OpKind.SUBSTITUTE:
            sub += 1
        elif op.kind is OpKind.DELETE:
            dele += 1
        elif op.kind is OpKind.INSERT:
            ins += 1
    return EditCounts(sub, dele, ins)


def edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    return _distance_table(list(a), list(b))[-1][-1]


def transfer_speakers(src_words, src_speakers, tgt_words) -> list[int]:
    """Carry speaker labels from one word sequence onto another.

    Aligned target words (matched or substituted) take the source label;
    inserted target words take the nearest preceding transferred label, or
    the nearest following one when nothing precedes them.
    """
    if len(src_words) != len(src_speakers):
        raise ValidationError("src_words and src_speakers differ in length", "src_speakers")
    if not len(tgt_words):
        return []
    if not len(src_words):
        raise ValidationError("no labels to transfer", "src_words")
    labels: list[Optional[int]] = [None] * len(tgt_words)
    for op in align(src_words, tgt_words):
        if op.kind in (OpKind.MATCH, OpKind.SUBSTITUTE):
            labels[op.tgt_index] = int(src_speakers[op.src_index])
    last = None
    for i, label in enumerate(labels):
        if label is None:
            labels[i] = last
        else:
            last = label
    nxt = None
    for i in range(len(labels) - 1, -1, -1):
        if labels[i] is None:
            labels[i] = nxt
        else:
            nxt = labels[i]
    return labels


def make_oracle_target(session: Session, reference: Optional[Session] = None) -> Session:
    """Relabel ``session`` with reference speakers, keeping its words.

    With ``reference`` given, its speakers are transferred onto the
    session's word sequence by alignment.  Otherwise the session's own
    ``ref_speakers`` (one per hypothesis word) are used.
    """
    if reference is not None:
        speakers = transfer_speakers(reference.texts, reference.speakers, session.texts)
    elif session.ref_speakers is not None:
        speakers = transfer_speakers(session.texts, session.ref_speakers, session.texts)
    else:
        raise ValidationError(f"session {session.session_id!r} has no reference speakers", "ref_speakers")
    if any(s > session.num_speakers for s in speakers):
        raise ValidationError("reference speaker exceeds num_speakers", "ref_speakers")
    return session.with_speakers(speakers)
