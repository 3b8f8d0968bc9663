import itertools

import numpy as np
import pytest

from spkfix.errors import ValidationError
from spkfix.metrics import aggregate, cpwer, delta_cp, evaluate_session, group_by_speaker, wer
from spkfix.synth import synth_sessions
from spkfix.transcript import AttributedWord, Session
from strategies import brute_cp_errors, brute_edit_distance


def test_wer_basic():
    assert wer("a b c".split(), "a b c".split()) == 0.0
    assert wer("a b c".split(), "a x c".split()) == pytest.approx(1 / 3)
    with pytest.raises(ValidationError, match="undefined WER"):
        wer([], ["a"])


def test_wer_matches_oracle():
    rng = np.random.default_rng(1)
    for _ in range(500):
        ref = list(rng.choice(list("abcd"), size=int(rng.integers(1, 14))))
        hyp = list(rng.choice(list("abcd"), size=int(rng.integers(0, 14))))
        assert wer(ref, hyp) == brute_edit_distance(ref, hyp) / len(ref)


def test_cpwer_identity_and_permutation():
    ref = {1: ["a", "b"], 2: ["c", "d"]}
    assert cpwer(ref, ref).cpwer == 0.0
    report = cpwer(ref, {1: ["c", "d"], 2: ["a", "b"]})
    assert report.cpwer == 0.0
    assert report.mapping == {1: 2, 2: 1}


def test_cpwer_unmatched_speakers():
    report = cpwer({1: ["a", "b"], 2: ["c"]}, {5: ["a", "b"]})
    assert report.cpwer == pytest.approx(1 / 3)
    assert sorted(report.per_speaker_errors) == [(0, 0, 0), (0, 1, 0)]
    report = cpwer({1: ["a"]}, {1: ["a"], 2: ["x", "y"]})
    assert report.cpwer == 2.0


def test_cpwer_empty_reference():
    with pytest.raises(ValidationError):
        cpwer({}, {1: ["a"]})
    with pytest.raises(ValidationError):
        cpwer({1: []}, {1: ["a"]})


def _random_groups(rng, k, vocab="abcde"):
    return {s: list(rng.choice(list(vocab), size=int(rng.integers(0, 8)))) for s in range(1, k + 1)}


def test_cpwer_matches_exhaustive_permutations():
    rng = np.random.default_rng(2)
    for _ in range(300):
        ref = _random_groups(rng, int(rng.integers(1, 5)))
        if not any(ref.values()):
            ref[1] = ["a"]
        hyp = _random_groups(rng, int(rng.integers(1, 5)))
        n = sum(len(v) for v in ref.values())
        assert cpwer(ref, hyp).cpwer_errors == brute_cp_errors(ref, hyp)
        assert cpwer(ref, hyp).cpwer == brute_cp_errors(ref, hyp) / n


def test_cpwer_permutation_invariance():
    rng = np.random.default_rng(3)
    for _ in range(50):
        ref = _random_groups(rng, 3)
        ref[1].append("a")
        hyp = _random_groups(rng, 3)
        base = cpwer(ref, hyp).cpwer
        for perm in itertools.permutations([1, 2, 3]):
            relabeled = {perm[s - 1]: w for s, w in hyp.items()}
            assert cpwer(ref, relabeled).cpwer == base


def test_single_speaker_cpwer_equals_wer():
    rng = np.random.default_rng(4)
    for _ in range(100):
        ref = {1: list(rng.choice(list("abc"), size=int(rng.integers(1, 10))))}
        hyp = {1: list(rng.choice(list("abc"), size=int(rng.integers(0, 10))))}
        r = cpwer(ref, hyp)
        assert r.cpwer == r.wer == wer(ref[1], hyp[1])
        assert r.delta_cp == 0.0


def test_delta_cp():
    assert delta_cp(12.53, 8.81) == pytest.approx(3.72, abs=1e-9)
    assert delta_cp(14.33, 8.92) == pytest.approx(5.41, abs=1e-9)
    assert delta_cp(0.3, 0.3) == 0


def _session(text, speakers):
    ws = tuple(AttributedWord(w, i, i + 0.5, s) for i, (w, s) in enumerate(zip(text.split(), speakers)))
    return Session("e", max(speakers), ws)


def test_evaluate_identity_and_flip():
    ref = _session("a b c d e f", [1, 1, 2, 2, 1, 2])
    rep = evaluate_session(ref, ref)
    assert (rep.wer, rep.cpwer, rep.delta_cp) == (0.0, 0.0, 0.0)
    flipped = ref.with_speakers([3 - s for s in ref.speakers])
    rep = evaluate_session(ref, flipped)
    assert rep.cpwer == rep.wer == 0.0 and rep.delta_cp == 0.0


def test_evaluate_corrupted_session_positive_delta():
    refs, hyps = synth_sessions(5, seed=1, corruption_rate=0.1)
    for ref, hyp in zip(refs, hyps):
        rep = evaluate_session(ref, hyp)
        assert rep.wer == 0.0 and rep.delta_cp > 0
        assert abs(rep.delta_cp - (rep.cpwer - rep.wer)) <= 1e-12


def test_aggregate_micro_average():
    a = evaluate_session(_session("a b", [1, 2]), _session("a b", [1, 1]))
    b = evaluate_session(_session("a b c d", [1, 1, 1, 1]), _session("a b c d", [1, 1, 1, 1]))
    agg = aggregate([a, b])
    assert agg["sessions"] == 2
    assert agg["cpwer"] == pytest.approx((a.cpwer_errors + b.cpwer_errors) / 6)
    assert agg == aggregate([b, a])


def test_group_by_speaker_keeps_order():
    s = _session("a b c d", [2, 1, 2, 1])
    assert group_by_speaker(s) == {2: ["a", "c"], 1: ["b", "d"]}
