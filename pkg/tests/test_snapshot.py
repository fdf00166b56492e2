from __future__ import annotations

import hashlib
import json
from fractions import Fraction

import pytest

from kathtb.conllu import Profile, Sentence, Token, Treebank, parse_treebank, serialize_treebank
from kathtb.errors import SnapshotError
from kathtb.snapshot import (PENDING_KEY, PENDING_VALUE, SnapshotManifest, SplitManifest, apply_split,
                             deterministic_split, freeze, membership_digest, splitmix64_next,
                             train_size)

from synthetic import simple_sentence


# splitmix64 ---------------------------------------------------------------------------

def test_splitmix64_reference_values():
    assert splitmix64_next(0)[1] == 0xE220A8397B1DCDAF
    assert splitmix64_next(1)[1] == 0x910A2DEC89025CC1
    assert splitmix64_next(2)[1] == 0x975835DE1C9756CE
    assert splitmix64_next(0)[0] == 0x9E3779B97F4A7C15


def test_splitmix64_pure_and_wraps():
    assert splitmix64_next(12345) == splitmix64_next(12345)
    state, value = splitmix64_next((1 << 64) - 1)
    assert state == 0x9E3779B97F4A7C14
    assert 0 <= value < 1 << 64


# split ---------------------------------------------------------------------------------

def _oracle_split(ids, seed, n_test):
    """Straight re-execution of the shuffle with nothing shared with the package."""
    mask = 2 ** 64 - 1
    perm = list(range(len(ids)))
    s = seed
    for i in reversed(range(1, len(ids))):
        s = (s + 0x9E3779B97F4A7C15) % 2 ** 64
        z = s
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        z ^= z >> 31
        j = z % (i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    test = set(perm[:n_test])
    return ([x for k, x in enumerate(ids) if k not in test], [x for k, x in enumerate(ids) if k in test])


def test_split_n5_seed7_matches_reexecution():
    ids = [f"s{k}" for k in range(5)]
    split = deterministic_split(ids, seed=7, test_fraction=Fraction(1, 5))
    train, test = _oracle_split(ids, 7, 1)
    assert (split.train_ids, split.test_ids) == (train, test)
    assert split.test_ids == ["s4"]
    payload = "train\n" + "\n".join(train) + "\ntest\n" + "\n".join(test)
    assert split.membership_sha256 == hashlib.sha256(payload.encode()).hexdigest()
    assert split.membership_sha256 == "ed15188d00cbf87d9aceb3e036ef93327002be972bdd98cdacd652f2eb5e2359"


@pytest.mark.parametrize("seed", [0, 1, 42, 2 ** 64 - 1])
def test_split_n10(seed):
    ids = [f"d{k}" for k in range(10)]
    split = deterministic_split(ids, seed=seed, test_fraction=0.2)
    assert len(split.test_ids) == 2 and len(split.train_ids) == 8
    assert not set(split.train_ids) & set(split.test_ids)
    assert sorted(split.train_ids + split.test_ids) == sorted(ids)
    # both lists are in document order
    assert split.train_ids == [i for i in ids if i in split.train_ids]
    assert (split.train_ids, split.test_ids) == _oracle_split(ids, seed, 2)


def test_split_reference_sizes():
    ids = [f"q{k:04d}" for k in range(1697)]
    split = deterministic_split(ids, seed=42, test_fraction=0.2)
    assert (len(split.train_ids), len(split.test_ids)) == (1357, 340)
    assert split == deterministic_split(list(ids), seed=42, test_fraction=Fraction(1, 5))


def test_train_size_uses_floor_on_exact_fraction():
    assert train_size(1697, 0.2) == 1357
    assert train_size(10, 0.3) == 7  # float 0.3 would give 6.999... without exact parsing
    assert train_size(3, Fraction(1, 2)) == 1


def test_seed_changes_membership():
    ids = [f"x{k}" for k in range(200)]
    memberships = {tuple(deterministic_split(ids, seed=s).test_ids) for s in range(20)}
    assert len(memberships) == 20


@pytest.mark.parametrize("kwargs", [dict(test_fraction=0), dict(test_fraction=1), dict(seed=-1)])
def test_split_preconditions(kwargs):
    with pytest.raises(SnapshotError):
        deterministic_split(["a", "b", "c"], **kwargs)


def test_split_needs_two_unique_ids():
    with pytest.raises(SnapshotError):
        deterministic_split(["a"])
    with pytest.raises(SnapshotError):
        deterministic_split(["a", "a"])


def test_split_manifest_json_round_trip_and_external_ingest():
    split = deterministic_split([f"s{k}" for k in range(12)], seed=3)
    again = SplitManifest.from_dict(json.loads(json.dumps(split.to_dict())))
    assert again == split
    # An external file may carry only the id lists.
    external = SplitManifest.from_dict({"seed": 0, "test_fraction": 0.5,
                                        "train_ids": ["b", "a"], "test_ids": ["c"]})
    assert external.membership_sha256 == membership_digest(["b", "a"], ["c"])
    with pytest.raises(SnapshotError):
        SplitManifest.from_dict({**split.to_dict(), "membership_sha256": "0" * 64})
    with pytest.raises(SnapshotError):
        SplitManifest.from_dict({"seed": 0, "test_fraction": 0.5, "train_ids": ["a"], "test_ids": ["a"]})


def test_apply_split():
    tb = Treebank(tuple(simple_sentence(f"s{k}") for k in range(6)))
    split = deterministic_split(tb, seed=9, test_fraction=Fraction(1, 3))
    train, test = apply_split(tb, split)
    assert train.sent_ids == split.train_ids and test.sent_ids == split.test_ids
    with pytest.raises(SnapshotError):
        apply_split(Treebank(tb.sentences[:-1]), split)
    with pytest.raises(SnapshotError):
        apply_split(Treebank(tb.sentences + (simple_sentence("extra"),)), split)


# freeze --------------------------------------------------------------------------------

def _pending(sent_id):
    return simple_sentence(sent_id).with_comment(PENDING_KEY, PENDING_VALUE)


def test_freeze_reference_counts():
    queued = set(list(range(0, 1697, 12))[:132])
    batch = [_pending(f"q{k}") if k in queued else simple_sentence(f"q{k}", 4, origin="batch")
             for k in range(1697)]
    batches = [Treebank(tuple(batch[:900]), source_path="/x/batch1.conllu"),
               Treebank(tuple(batch[900:]), source_path="/x/batch2.conllu")]
    retries = Treebank(tuple(simple_sentence(f"q{k}", 5) for k in sorted(queued)), source_path="retries.conllu")
    snap, manifest, rejected = freeze(batches, retries)
    assert rejected == []
    assert (manifest.total_sentences, manifest.batch_origin, manifest.retry_origin) == (1697, 1565, 132)
    assert snap.sent_ids == [s.sent_id for s in batch]
    assert manifest.created_from == ["batch1.conllu", "batch2.conllu", "retries.conllu"]
    text = serialize_treebank(snap)
    assert manifest.verify(text)
    assert not manifest.verify(text + "\n")
    assert PENDING_KEY not in text
    assert SnapshotManifest.from_dict(json.loads(json.dumps(manifest.to_dict()))) == manifest


def test_freeze_without_retries_is_concatenation():
    a = Treebank(tuple(simple_sentence(f"a{k}", origin="batch") for k in range(3)))
    b = Treebank(tuple(simple_sentence(f"b{k}", origin="batch") for k in range(2)))
    snap, manifest, _ = freeze([a, b])
    assert snap.sentences == a.sentences + b.sentences
    assert manifest.total_sentences == 5


def test_freeze_unmatched_retry():
    with pytest.raises(SnapshotError) as exc:
        freeze([Treebank((simple_sentence("a"),))], Treebank((simple_sentence("zzz"),)))
    assert exc.value.code == "UNMATCHED_RETRY"
    assert exc.value.sent_ids == ["zzz"]


def test_freeze_rejects_invalid_and_duplicates():
    bad = Sentence.build("bad", [Token(1, "a", upos="NOUN", head=1, deprel="root")])
    tb = Treebank((simple_sentence("ok"), bad, simple_sentence("ok"), _pending("left")))
    snap, manifest, rejected = freeze([tb])
    assert snap.sent_ids == ["ok"]
    assert rejected == ["bad", "ok", "left"]
    assert manifest.batch_origin == 1


def test_freeze_profile_matters():
    multi = Sentence.build("m", [Token(1, "a", upos="NOUN", head=0, deprel="root"),
                                 Token(2, "b", upos="NOUN", head=0, deprel="root")])
    assert freeze([Treebank((multi,))], profile=Profile.STRICT)[2] == ["m"]
    assert freeze([Treebank((multi,))], profile=Profile.LENIENT)[2] == []


def test_freeze_is_idempotent():
    batch = Treebank((simple_sentence("a"), _pending("b"), simple_sentence("c")))
    snap, manifest, _ = freeze([batch], Treebank((simple_sentence("b", 2),)))
    text = serialize_treebank(snap)
    snap2, manifest2, rejected2 = freeze([parse_treebank(text)])
    assert serialize_treebank(snap2) == text
    assert manifest2.content_sha256 == manifest.content_sha256
    assert (manifest2.batch_origin, manifest2.retry_origin) == (2, 1)
    assert rejected2 == []
