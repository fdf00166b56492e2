from __future__ import annotations

import json
import random
from fractions import Fraction

import pytest

from kathtb.conllu import Sentence, Token, Treebank
from kathtb.errors import AlignmentError, KathError
from kathtb.metrics import (EvalOptions, EvalReport, check_alignment, deprel_weighted_f1,
                            diff_reports, evaluate, las, upos_accuracy, uas)

from oracles import naive_scores
from synthetic import random_pair


def tb(*sentences):
    return Treebank(tuple(sentences))


def sent(heads, deprels, upos=None, sent_id="s", forms=None):
    n = len(heads)
    upos = upos or ["NOUN"] * n
    forms = forms or [f"w{i}" for i in range(1, n + 1)]
    return Sentence.build(sent_id, [Token(i, forms[i - 1], upos=upos[i - 1], head=heads[i - 1],
                                          deprel=deprels[i - 1]) for i in range(1, n + 1)])


def test_alignment_identity_and_failures():
    g = tb(sent([2, 0, 2], ["a", "root", "b"]), sent([0], ["root"], sent_id="t"))
    assert len(check_alignment(g, g)) == 2
    with pytest.raises(AlignmentError) as exc:
        check_alignment(g, tb(g.sentences[0]))
    assert exc.value.sentence_index == 1 and exc.value.sent_id == "t"
    other = tb(sent([2, 0, 2], ["a", "root", "b"], forms=["w1", "XX", "w3"]), g.sentences[1])
    with pytest.raises(AlignmentError) as exc:
        check_alignment(g, other)
    assert (exc.value.sent_id, exc.value.position) == ("s", 2)
    assert exc.value.code == "ALIGNMENT_MISMATCH"
    renamed = tb(g.sentences[0], sent([0], ["root"], sent_id="u"))
    with pytest.raises(AlignmentError):
        check_alignment(g, renamed)


def test_upos_accuracy():
    g = tb(sent([0, 1, 1], ["root", "x", "x"], upos=["NOUN", "VERB", "ADJ"]))
    p = tb(sent([0, 1, 1], ["root", "x", "x"], upos=["NOUN", "VERB", "ADV"]))
    assert upos_accuracy(g, g) == 1
    assert upos_accuracy(g, p) == Fraction(2, 3)
    q = tb(sent([0, 1, 1], ["root", "x", "x"], upos=["X", "X", "X"]))
    assert upos_accuracy(g, q) == 0


def test_uas_las_examples():
    g = tb(sent([2, 0, 2], ["nsubj", "root", "obj"]))
    p = tb(sent([2, 0, 1], ["nsubj", "root", "obj"]))
    assert (uas(g, p), las(g, p)) == (Fraction(2, 3), Fraction(2, 3))
    g4 = tb(sent([2, 0, 2, 2], ["nsubj", "root", "obj", "punct"]))
    p4 = tb(sent([2, 0, 2, 2], ["nsubj", "root", "iobj", "punct"]))
    assert (uas(g4, p4), las(g4, p4)) == (1, Fraction(3, 4))


def test_universal_only_option():
    g = tb(sent([0, 1], ["root", "nsubj:pass"]))
    p = tb(sent([0, 1], ["root", "nsubj"]))
    assert las(g, p) == Fraction(1, 2)
    assert las(g, p, EvalOptions(universal_only=True)) == 1


def test_exclude_punct_uses_gold_tag():
    g = tb(sent([0, 1], ["root", "punct"], upos=["VERB", "PUNCT"]))
    p = tb(sent([0, 0], ["root", "root"], upos=["VERB", "NOUN"]))
    assert uas(g, p) == Fraction(1, 2)
    assert uas(g, p, EvalOptions(exclude_punct=True)) == 1


def test_weighted_f1_example():
    g = tb(sent([0, 1, 1], ["nsubj", "obj", "obj"]))
    p = tb(sent([0, 1, 1], ["nsubj", "obj", "nsubj"]))
    score, per_label = deprel_weighted_f1(g, p)
    assert score == Fraction(2, 3)
    assert per_label["nsubj"]["precision"] == Fraction(1, 2)
    assert per_label["obj"]["recall"] == Fraction(1, 2)
    assert per_label["nsubj"]["gold_support"] == 1


def test_pred_only_label_has_zero_weight():
    g = tb(sent([0, 1], ["root", "obj"]))
    p = tb(sent([0, 1], ["root", "weird"]))
    score, per_label = deprel_weighted_f1(g, p)
    assert per_label["weird"]["gold_support"] == 0
    assert score == Fraction(1, 2)


def test_identity_gives_one():
    rng = random.Random(1)
    for _ in range(20):
        g, _ = random_pair(rng)
        r = evaluate(g, g)
        assert (r.upos_accuracy, r.deprel_weighted_f1, r.uas, r.las) == (1.0, 1.0, 1.0, 1.0)
        assert all(v["f1"] == 1.0 for v in r.per_label.values())


def test_oracle_equivalence_and_las_bound():
    rng = random.Random(11)
    for _ in range(300):
        g, p = random_pair(rng)
        expected = naive_scores(g, p)
        assert upos_accuracy(g, p) == expected["upos"]
        assert uas(g, p) == expected["uas"]
        assert las(g, p) == expected["las"]
        assert deprel_weighted_f1(g, p)[0] == expected["deprel_f1"]
        assert las(g, p) <= uas(g, p)


def test_reordering_invariance():
    rng = random.Random(5)
    g, p = random_pair(rng, max_sentences=6)
    order = list(range(len(g)))
    rng.shuffle(order)
    g2 = Treebank(tuple(g.sentences[i] for i in order))
    p2 = Treebank(tuple(p.sentences[i] for i in order))
    assert evaluate(g, p) == evaluate(g2, p2)


def test_report_round_trip():
    g, p = random_pair(random.Random(2))
    r = evaluate(g, p)
    again = EvalReport.from_dict(json.loads(r.to_json()))
    assert again == r
    assert set(r.to_dict()) == {"upos", "deprel_f1", "uas", "las", "tokens", "sentences", "per_label"}
    assert r.token_count == sum(len(s.tokens) for s in g.sentences)
    assert r.sentence_count == len(g)


def test_empty_evaluation():
    with pytest.raises(KathError) as exc:
        evaluate(Treebank(), Treebank())
    assert exc.value.code == "EMPTY_EVALUATION"


def _report(las_value, uas_value=0.5):
    return EvalReport(0.9, 0.8, uas_value, las_value, 10, 1)


def test_diff_reference_values():
    d = diff_reports(_report(0.4183), _report(0.5162))
    assert abs(d.absolute["las"] - 0.0979) <= 1e-12
    assert abs(d.relative["las"] - 0.2340) <= 5e-4
    assert d.absolute["uas"] == 0 and d.relative["uas"] == 0


def test_diff_self_and_zero_baseline():
    r = _report(0.3)
    d = diff_reports(r, r)
    assert all(v == 0 for v in d.absolute.values())
    z = diff_reports(_report(0.0), _report(0.2))
    assert z.relative["las"] is None
    assert z.absolute["las"] == 0.2
    assert json.loads(json.dumps(z.to_dict()))["las"]["relative"] is None
