"""Snapshot freezing, manifests, and the seeded fixed train/test split."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import __version__
from .conllu import (Profile, Sentence, Treebank, errors_only, serialize_treebank,
                     validate_sentence)
from .errors import SnapshotError
from .schema import AnnotationSchema

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

# Batch slots for records still waiting in the retry queue carry this
# comment; they only enter a snapshot through a retry replacement.
PENDING_KEY = "kath_status"
PENDING_VALUE = "queued"


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class SnapshotManifest:
    total_sentences: int
    batch_origin: int
    retry_origin: int
    content_sha256: str
    created_from: list[str] = field(default_factory=list)
    tool_version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SnapshotManifest":
        return cls(**{k: d[k] for k in ("total_sentences", "batch_origin", "retry_origin",
                                        "content_sha256", "created_from", "tool_version")})

    def verify(self, snapshot_text: str) -> bool:
        return sha256_text(snapshot_text) == self.content_sha256


@dataclass(frozen=True)
class SplitManifest:
    seed: int
    test_fraction: float
    train_ids: list[str]
    test_ids: list[str]
    membership_sha256: str

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SplitManifest":
        m = cls(
            seed=int(d["seed"]),
            test_fraction=float(d["test_fraction"]),
            train_ids=[str(x) for x in d["train_ids"]],
            test_ids=[str(x) for x in d["test_ids"]],
            membership_sha256=d.get("membership_sha256") or membership_digest(d["train_ids"], d["test_ids"]),
        )
        if set(m.train_ids) & set(m.test_ids):
            raise SnapshotError("split lists overlap", code="BAD_SPLIT")
        if m.membership_sha256 != membership_digest(m.train_ids, m.test_ids):
            raise SnapshotError("membership digest does not match id lists", code="BAD_SPLIT")
        return m


def membership_digest(train_ids: Sequence[str], test_ids: Sequence[str]) -> str:
    payload = "train\n" + "\n".join(train_ids) + "\ntest\n" + "\n".join(test_ids)
    return sha256_text(payload)


def _is_pending(s: Sentence) -> bool:
    return s.comment(PENDING_KEY) == PENDING_VALUE


def freeze(batches: Sequence[Treebank], retries: Treebank | None = None,
           profile: Profile | str = Profile.STRICT, schema: AnnotationSchema | None = None
           ) -> tuple[Treebank, SnapshotManifest, list[str]]:
    """Merge batches, apply retry replacements in place, and keep only
    sentences that validate without errors at ``profile``.

    Returns the snapshot, its manifest and the ids that were rejected.
    Raises SnapshotError(UNMATCHED_RETRY) when a retry has no batch slot.
    """
    retries = retries or Treebank()
    replacements: dict[str, Sentence] = {}
    for s in retries.sentences:
        replacements[s.sent_id] = s

    batch_ids = {s.sent_id for tb in batches for s in tb.sentences}
    unmatched = [sid for sid in replacements if sid not in batch_ids]
    if unmatched:
        raise SnapshotError(f"retry ids without batch counterpart: {unmatched}",
                            code="UNMATCHED_RETRY", sent_ids=unmatched)

    admitted: list[Sentence] = []
    rejected: list[str] = []
    seen: set[str] = set()
    for tb in batches:
        for s in tb.sentences:
            if s.sent_id in replacements:
                s = replacements[s.sent_id].with_comment(PENDING_KEY, None).with_origin("retry")
            elif _is_pending(s):
                rejected.append(s.sent_id)
                continue
            elif s.origin == "unknown":
                s = s.with_origin("batch")
            if s.sent_id in seen or errors_only(validate_sentence(s, profile, schema)):
                rejected.append(s.sent_id)
                continue
            seen.add(s.sent_id)
            admitted.append(s)

    sources = [tb.source_path for tb in batches if tb.source_path]
    if retries.source_path:
        sources.append(retries.source_path)
    snapshot = Treebank(tuple(admitted), source_path="")
    text = serialize_treebank(snapshot)
    manifest = SnapshotManifest(
        total_sentences=len(admitted),
        batch_origin=sum(1 for s in admitted if s.origin == "batch"),
        retry_origin=sum(1 for s in admitted if s.origin == "retry"),
        content_sha256=sha256_text(text),
        created_from=[Path(p).name for p in sources],
    )
    return snapshot, manifest, rejected


def splitmix64_next(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns ``(new_state, output)``."""
    state = (state + GOLDEN_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    # str() avoids binary float artefacts: 0.3 -> 3/10.
    return Fraction(str(value))


def train_size(n: int, test_fraction) -> int:
    f = _as_fraction(test_fraction)
    return math.floor((1 - f) * n)


def deterministic_split(tb: Treebank | Sequence[str], seed: int = 42,
                        test_fraction=Fraction(1, 5)) -> SplitManifest:
    """Fisher-Yates over document indices driven by splitmix64(seed).

    The first ``n - floor((1 - f) n)`` shuffled indices are the test set;
    both lists come back in document order.
    """
    ids = tb.sent_ids if isinstance(tb, Treebank) else list(tb)
    n = len(ids)
    f = _as_fraction(test_fraction)
    if not 0 < f < 1:
        raise SnapshotError(f"test_fraction must be in (0, 1), got {test_fraction}", code="BAD_SPLIT")
    if n < 2:
        raise SnapshotError("need at least two sentences to split", code="BAD_SPLIT")
    if not 0 <= seed <= MASK64:
        raise SnapshotError("seed must be an unsigned 64-bit integer", code="BAD_SPLIT")
    if len(set(ids)) != n:
        raise SnapshotError("sent_ids must be unique", code="BAD_SPLIT")

    order = list(range(n))
    state = seed
    for i in range(n - 1, 0, -1):
        state, value = splitmix64_next(state)
        j = value % (i + 1)
        order[i], order[j] = order[j], order[i]

    n_test = n - train_size(n, f)
    test_idx = sorted(order[:n_test])
    train_idx = sorted(order[n_test:])
    train_ids = [ids[i] for i in train_idx]
    test_ids = [ids[i] for i in test_idx]
    return SplitManifest(seed, float(f), train_ids, test_ids, membership_digest(train_ids, test_ids))


def apply_split(tb: Treebank, split: SplitManifest) -> tuple[Treebank, Treebank]:
    """Materialize train/test treebanks; works for externally supplied splits too."""
    by_id = {s.sent_id: s for s in tb.sentences}
    missing = [sid for sid in split.train_ids + split.test_ids if sid not in by_id]
    if missing:
        raise SnapshotError(f"split ids not in treebank: {missing[:5]}", code="BAD_SPLIT",
                            sent_ids=missing)
    extra = set(by_id) - set(split.train_ids) - set(split.test_ids)
    if extra:
        raise SnapshotError(f"{len(extra)} treebank sentences are in neither split", code="BAD_SPLIT")
    train = set(split.train_ids)
    return (Treebank(tuple(s for s in tb.sentences if s.sent_id in train)),
            Treebank(tuple(s for s in tb.sentences if s.sent_id not in train)))


def write_json(obj: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
