from __future__ import annotations

import io
import random
from dataclasses import replace
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kathtb.conllu import (Profile, Sentence, Severity, Token, Treebank, errors_only,
                           find_cycles, parse_treebank, read_treebank, serialize_treebank,
                           validate_sentence, validate_treebank)
from kathtb.errors import ConlluError
from kathtb.schema import default_schema

FIXTURES = Path(__file__).parent / "fixtures"


def sentence_with_heads(heads, sent_id="s", upos="NOUN", deprel="obj"):
    tokens = [Token(i, f"w{i}", upos=upos, head=h, deprel=deprel) for i, h in enumerate(heads, start=1)]
    return Sentence.build(sent_id, tokens)


def codes(issues, severity=None):
    return {i.code for i in issues if severity is None or i.severity is severity}


# --- parsing / serialization --------------------------------------------------------

def test_three_token_sentence():
    text = ("# sent_id = s1\n"
            "1\ta\ta\tNOUN\t_\t_\t2\tnsubj\t_\t_\n"
            "2\tb\tb\tVERB\t_\t_\t0\troot\t_\t_\n"
            "3\tc\tc\tNOUN\t_\t_\t2\tobj\t_\t_\n\n")
    tb = parse_treebank(text)
    assert len(tb) == 1
    s = tb.sentences[0]
    assert s.sent_id == "s1"
    assert [t.head for t in s.tokens] == [2, 0, 2]
    assert s.origin == "unknown"


def test_empty_input():
    assert len(parse_treebank("")) == 0
    assert serialize_treebank(Treebank()) == ""


def test_mwt_rows_are_passthrough():
    text = ("# sent_id = m\n"
            "1-2\tστο\t_\t_\t_\t_\t_\t_\t_\t_\n"
            "1\tσε\tσε\tADP\t_\t_\t3\tcase\t_\t_\n"
            "2\tτο\tο\tDET\t_\t_\t3\tdet\t_\t_\n"
            "3\tσπίτι\tσπίτι\tNOUN\t_\t_\t0\troot\t_\t_\n\n")
    s = parse_treebank(text).sentences[0]
    assert len(s.tokens) == 3
    assert len(s.passthrough_rows) == 1
    assert serialize_treebank(parse_treebank(text)) == text


def test_feats_separator():
    t = Token(1, "τῷ", upos="DET", feats=(("Case", "Dat"), ("Number", "Sing")), head=0, deprel="root")
    assert t.to_line().split("\t")[5] == "Case=Dat|Number=Sing"


@pytest.mark.parametrize("name", sorted(p.name for p in FIXTURES.glob("*.conllu")))
def test_fixture_round_trip_is_byte_identical(name):
    raw = (FIXTURES / name).read_bytes()
    assert serialize_treebank(parse_treebank(raw)).encode("utf-8") == raw


def test_missing_final_blank_line_only_adds_newline():
    text = "# sent_id = a\n1\tx\tx\tNOUN\t_\t_\t0\troot\t_\t_\n"
    assert serialize_treebank(parse_treebank(text)) == text + "\n"


def test_crlf_input_is_written_with_lf():
    text = "# sent_id = a\r\n1\tx\tx\tNOUN\t_\t_\t0\troot\t_\t_\r\n\r\n"
    assert serialize_treebank(parse_treebank(text)) == text.replace("\r\n", "\n")


def test_origin_comment():
    s = read_treebank(FIXTURES / "roundtrip.conllu").sentences[0]
    assert s.origin == "retry"
    assert s.text == "ἐν τῷ νόμῳ στὸ ἄρθρο"


def test_bad_field_count_lenient_skips_row():
    text = "# sent_id = a\n1\tx\tx\tNOUN\t_\t_\t0\troot\t_\t_\n2\ty\tNOUN\n\n"
    tb = parse_treebank(text)
    assert len(tb.sentences[0].tokens) == 1
    assert [i.code for i in tb.parse_issues] == ["BAD_FIELD_COUNT"]
    assert codes(errors_only(validate_treebank(tb, Profile.LENIENT))) == {"BAD_FIELD_COUNT"}


def test_bad_field_count_strict_is_fatal():
    with pytest.raises(ConlluError):
        parse_treebank("1\tx\tx\n\n", strict=True)


def test_non_utf8_is_fatal():
    with pytest.raises(ConlluError) as exc:
        parse_treebank(b"1\t\xff\tx\tNOUN\t_\t_\t0\troot\t_\t_\n")
    assert exc.value.code == "BAD_ENCODING"


def test_text_stream_input():
    tb = parse_treebank(io.StringIO((FIXTURES / "clean5.conllu").read_text("utf-8")))
    assert len(tb) == 5


def test_with_tokens_keeps_passthrough_positions():
    s = read_treebank(FIXTURES / "roundtrip.conllu").sentences[0]
    upper = s.with_tokens(replace(t, upos="X") for t in s.tokens)
    assert [type(r).__name__ for r in upper.rows] == [type(r).__name__ for r in s.rows]
    assert all(t.upos == "X" for t in upper.tokens)


def test_token_invariants():
    with pytest.raises(ValueError):
        Token(0, "x")
    with pytest.raises(ValueError):
        Token(1, "a\tb")
    with pytest.raises(ValueError):
        Token(1, "x", feats=(("Case", "Nom"), ("Case", "Dat")))


# generated treebanks ---------------------------------------------------------------

_form = st.text(alphabet=st.sampled_from("αβγδεζἀὁῷῇΑΒ.,;·-_0123456789abc"), min_size=1, max_size=6)
_pairs = st.lists(st.tuples(st.sampled_from(["Case", "Number", "Gender", "Kath:x"]),
                            st.sampled_from(["Nom", "Dat", "Sing", "a"])),
                  max_size=3, unique_by=lambda p: p[0]).map(tuple)


@st.composite
def treebanks(draw):
    sentences = []
    for k in range(draw(st.integers(0, 4))):
        n = draw(st.integers(1, 6))
        tokens = [Token(i, draw(_form), lemma=draw(_form), upos=draw(st.sampled_from(["NOUN", "VERB", "X"])),
                        feats=draw(_pairs), head=draw(st.integers(0, n)),
                        deprel=draw(st.sampled_from(["obj", "nsubj:pass", "root"])), misc=draw(_pairs))
                  for i in range(1, n + 1)]
        sentences.append(Sentence.build(f"g{k}", tokens, origin=draw(st.sampled_from(["batch", "retry", "unknown"]))))
    return Treebank(tuple(sentences))


@given(treebanks())
@settings(max_examples=100, deadline=None)
def test_round_trip_generated(tb):
    text = serialize_treebank(tb)
    again = parse_treebank(text)
    assert again.sentences == tb.sentences
    assert serialize_treebank(again) == text


# --- validation ----------------------------------------------------------------------

def test_valid_tree_has_no_issues():
    assert validate_sentence(sentence_with_heads([2, 0, 2]), Profile.STRICT) == []


def test_two_cycle_without_root():
    issues = validate_sentence(sentence_with_heads([2, 1, 2]), Profile.STRICT)
    assert codes(issues) == {"CYCLE", "NO_ROOT"}
    assert codes(issues, Severity.ERROR) == {"CYCLE", "NO_ROOT"}


def test_multi_root_strict_vs_lenient():
    s = sentence_with_heads([0, 0, 1])
    assert codes(validate_sentence(s, Profile.STRICT), Severity.ERROR) == {"MULTI_ROOT"}
    lenient = validate_sentence(s, Profile.LENIENT)
    assert codes(lenient) == {"MULTI_ROOT"}
    assert codes(lenient, Severity.ERROR) == set()


def test_head_out_of_range_is_error_in_both_profiles():
    s = sentence_with_heads([0, 9])
    for profile in Profile:
        assert "HEAD_OUT_OF_RANGE" in codes(validate_sentence(s, profile), Severity.ERROR)


def test_self_loop_is_a_cycle():
    issues = validate_sentence(sentence_with_heads([0, 2]), Profile.STRICT)
    assert codes(issues) == {"CYCLE"}


def test_label_checks():
    assert codes(validate_sentence(sentence_with_heads([0], upos="NOUNN", deprel="root"))) == {"BAD_UPOS"}
    assert codes(validate_sentence(sentence_with_heads([0], deprel="subject"))) == {"BAD_DEPREL"}
    # Without a schema, subtypes are judged by the universal part.
    assert validate_sentence(sentence_with_heads([0], deprel="obj:whatever")) == []
    # With a schema the full label must be listed.
    assert codes(validate_sentence(sentence_with_heads([0], deprel="obj:whatever"),
                                   schema=default_schema())) == {"BAD_DEPREL"}


def test_nonprojective_is_info_only():
    s = sentence_with_heads([3, 4, 0, 3])  # arcs 1<-3 and 2<-4 cross
    issues = validate_sentence(s, Profile.STRICT)
    assert codes(issues) == {"NONPROJECTIVE_INFO"}
    assert errors_only(issues) == []


def test_duplicate_sent_id():
    s = sentence_with_heads([0], sent_id="s1")
    issues = validate_treebank(Treebank((s, s)), Profile.STRICT)
    assert [i.code for i in issues] == ["DUPLICATE_SENT_ID"]


def test_clean_fixture_has_no_issues():
    tb = read_treebank(FIXTURES / "clean5.conllu")
    assert validate_treebank(tb, Profile.STRICT, default_schema()) == []


def _reaches_root(heads):
    n = len(heads)
    for start in range(1, n + 1):
        node, steps = start, 0
        while node != 0 and steps <= n:
            if not 1 <= node <= n:
                break
            node = heads[node - 1]
            steps += 1
        if node != 0:
            yield start


@given(st.integers(1, 10).flatmap(lambda n: st.lists(st.integers(0, n), min_size=n, max_size=n)))
@settings(max_examples=300, deadline=None)
def test_cycle_detection_matches_brute_force(heads):
    stuck = set(_reaches_root(heads))
    in_cycles = {i for c in find_cycles(heads) for i in c}
    # A token fails to reach the root exactly when its head chain runs into a cycle.
    assert bool(stuck) == bool(in_cycles)
    assert in_cycles <= stuck
    s = sentence_with_heads(heads)
    assert ("CYCLE" in codes(validate_sentence(s))) == bool(stuck)


@given(st.integers(1, 8).flatmap(lambda n: st.lists(st.integers(-1, n + 2), min_size=n, max_size=n)),
       st.sampled_from(["NOUN", "NOUNN"]), st.sampled_from(["obj", "bogus"]))
@settings(max_examples=200, deadline=None)
def test_strict_errors_superset_of_lenient(heads, upos, deprel):
    s = sentence_with_heads(heads, upos=upos, deprel=deprel)
    strict = {(i.code, i.token_id) for i in errors_only(validate_sentence(s, Profile.STRICT))}
    lenient = {(i.code, i.token_id) for i in errors_only(validate_sentence(s, Profile.LENIENT))}
    assert lenient <= strict


def test_random_non_trees_flagged_consistently():
    rng = random.Random(3)
    for _ in range(200):
        n = rng.randint(1, 8)
        heads = [rng.randint(0, n) for _ in range(n)]
        issues = validate_sentence(sentence_with_heads(heads), Profile.STRICT)
        roots = heads.count(0)
        assert ("NO_ROOT" in codes(issues)) == (roots == 0)
        assert ("MULTI_ROOT" in codes(issues)) == (roots > 1)
