import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spkfix.errors import ParseError
from spkfix.formats import FormatKind, normalize, parse, serialize
from spkfix.scores import MapperConfig, conditioning_label
from spkfix.transcript import AttributedWord, Session
from strategies import random_session, sessions

VARIANTS = ["none", "prob", "int", "label"]
KINDS = list(FormatKind)


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("Hello, World!", "hello world"),
        ("", ""),
        ("don't STOP", "don't stop"),
        ("  Room 101\tis   here. ", "room 101 is here"),
        ("<spk:1> Hi|", "spk1 hi"),
    ],
)
def test_normalize(raw, expected):
    assert normalize(raw) == expected


@pytest.fixture
def greeting():
    words = (
        AttributedWord("hello", 0.0, 0.3, 1, 0.9),
        AttributedWord("there", 0.3, 0.6, 1, 0.95),
        AttributedWord("hi", 0.8, 1.0, 2, 0.2),
    )
    return Session("g", 2, words)


def test_serialize_spk_turn_label(greeting):
    out = serialize(greeting, "spk_turn", MapperConfig(variant="label"))
    assert out.text == "<spk:1> hello|high there|high <spk:2> hi|low"
    assert out.source_word_count == 3


def test_serialize_spk_word_label(greeting):
    out = serialize(greeting, "spk_word", MapperConfig(variant="label"))
    assert out.text == "hello <spk:1|high> there <spk:1|high> hi <spk:2|low>"


def test_serialize_single_word_no_variant():
    s = Session("x", 1, (AttributedWord("hello", 0, 0.2, 1),))
    assert serialize(s, "spk_turn", MapperConfig(variant="none")).text == "<spk:1> hello"
    assert serialize(s, "spk_word", MapperConfig(variant="none")).text == "hello <spk:1>"


def test_serialize_prob_and_int(greeting):
    assert serialize(greeting, "spk_word", MapperConfig(variant="prob")).text == (
        "hello <spk:1|0.90> there <spk:1|0.95> hi <spk:2|0.20>"
    )
    assert serialize(greeting, "spk_turn", MapperConfig(variant="int")).text == (
        "<spk:1> hello|9 there|9 <spk:2> hi|2"
    )


def test_spk_turn_minimal_markers(greeting):
    toks = serialize(greeting, "spk_turn").tokens
    assert sum(t.startswith("<spk:") for t in toks) == 2


@pytest.mark.parametrize(
    "text, kind, message",
    [
        ("<spk:1> hello <spk:1> <spk:2> there", "spk_turn", "consecutive speaker markers"),
        ("<spk:1> <spk:2> hello", "spk_turn", "consecutive speaker markers"),
        ("hello <spk:1>", "spk_turn", "open with a speaker marker"),
        ("<spk:1> hello <spk:2>", "spk_turn", "empty speaker turn"),
        ("<spk:3> hello", "spk_turn", "outside 1..2"),
        ("<spk:1> hello|huge", "spk_turn", "unknown confidence marker"),
        ("<spk:1> hello|high there", "spk_turn", "missing confidence marker"),
        ("hello", "spk_word", "missing attribution marker"),
        ("hello there", "spk_word", "missing attribution marker"),
        ("<spk:1> hello", "spk_word", "without a preceding word"),
        ("hello <spk:1|sure>", "spk_word", "unknown confidence marker"),
        ("Hello <spk:1>", "spk_word", "malformed word"),
    ],
)
def test_parse_errors(text, kind, message):
    with pytest.raises(ParseError, match=message):
        parse(text, kind, 2)


def test_parse_error_offset():
    with pytest.raises(ParseError) as info:
        parse("<spk:1> a b <spk:2> <spk:1> c", "spk_turn", 2)
    assert info.value.location == 4


def test_spec_consecutive_marker_example():
    # a redundant marker between words is legal; only empty turns are rejected
    parsed = parse("<spk:1> hello <spk:1> there", "spk_turn", 2)
    assert parsed.speakers == (1, 1)


def test_parse_pinned_variant_mismatch():
    with pytest.raises(ParseError):
        parse("hello <spk:1|high>", "spk_word", 2, variant="int")
    with pytest.raises(ParseError):
        parse("hello <spk:1|high>", "spk_word", 2, variant="none")


def test_parse_empty():
    for kind in KINDS:
        parsed = parse("", kind, 2)
        assert parsed.words == () and parsed.labels is None


def _check_round_trip(s, kind, variant):
    cfg = MapperConfig(variant=variant)
    out = serialize(s, kind, cfg)
    assert out.words() == s.texts
    parsed = parse(out.text, kind, s.num_speakers, variant)
    assert list(parsed.words) == s.texts
    assert list(parsed.speakers) == s.speakers
    expected = [conditioning_label(w.score, cfg) for w in s.words]
    if variant == "none" or not s.words:
        assert parsed.labels is None
    else:
        assert list(parsed.labels) == expected


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("variant", VARIANTS)
def test_round_trip_random(kind, variant):
    rng = np.random.default_rng([KINDS.index(kind), VARIANTS.index(variant)])
    for _ in range(200):
        _check_round_trip(random_session(rng, 0, 40), kind, variant)


@settings(max_examples=100, deadline=None)
@given(sessions(), st.sampled_from(KINDS), st.sampled_from(VARIANTS))
def test_round_trip_property(s, kind, variant):
    _check_round_trip(s, kind, variant)
