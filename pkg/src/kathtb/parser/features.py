"""Feature templates and the pinned FNV-1a hashing into a fixed index space."""

from __future__ import annotations

import unicodedata
from functools import lru_cache
from typing import Sequence

import numpy as np

from ..conllu import Sentence

HASH_BITS = 20
HASH_DIM = 1 << HASH_BITS

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

BOS, EOS, ROOT = "<BOS>", "<EOS>", "<ROOT>"


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


@lru_cache(maxsize=1 << 18)
def hash_feature(template_id: str, value: str, dim: int = HASH_DIM) -> int:
    """FNV-1a 64 of ``"template_id=value"`` (UTF-8), reduced modulo ``dim``."""
    return fnv1a64(f"{template_id}={value}".encode("utf-8")) % dim


def to_vector(features: Sequence[tuple[str, str]], dim: int = HASH_DIM) -> np.ndarray:
    """Hash ``(template, value)`` pairs into a sorted, duplicate-free index array."""
    return np.unique(np.fromiter((hash_feature(t, v, dim) for t, v in features),
                                 dtype=np.int64, count=len(features)))


def is_punct(form: str) -> bool:
    return bool(form) and all(unicodedata.category(c).startswith("P") for c in form)


def _forms(s: Sentence | Sequence[str]) -> list[str]:
    if isinstance(s, Sentence):
        return [t.form for t in s.tokens]
    return list(s)


def tag_feature_strings(forms: Sequence[str], i: int, prev_tags: Sequence[str]) -> list[tuple[str, str]]:
    n = len(forms)
    if not 1 <= i <= n:
        raise ValueError(f"position {i} outside 1..{n}")

    def form_at(k):
        if k < 1:
            return BOS
        if k > n:
            return EOS
        return forms[k - 1]

    def tag_at(k):
        return prev_tags[k - 1] if k >= 1 else BOS

    w = forms[i - 1]
    low = w.lower()
    feats = [("bias", ""), ("w0", w), ("lw0", low)]
    for k in range(1, 5):
        feats.append((f"p{k}", low[:k]))
        feats.append((f"s{k}", low[-k:]))
    if any(c.isdigit() for c in w):
        feats.append(("digit", "1"))
    if is_punct(w):
        feats.append(("punct", "1"))
    if w.isupper():
        feats.append(("caps", "1"))
    feats += [
        ("w-1", form_at(i - 1)),
        ("w+1", form_at(i + 1)),
        ("w-2", form_at(i - 2)),
        ("w+2", form_at(i + 2)),
        ("t-1", tag_at(i - 1)),
        ("t-2t-1", f"{tag_at(i - 2)}|{tag_at(i - 1)}"),
    ]
    return feats


def extract_tag_features(s: Sentence | Sequence[str], i: int, prev_tags: Sequence[str],
                         dim: int = HASH_DIM) -> np.ndarray:
    """Tagger features for 1-based position ``i``; ``prev_tags`` covers 1..i-1."""
    return to_vector(tag_feature_strings(_forms(s), i, prev_tags), dim)


def distance_bucket(distance: int) -> str:
    """Signed ``head - dep`` bucketed into 1, 2, 3, 4..7, 8..15, 16+."""
    if distance == 0:
        raise ValueError("head and dependent coincide")
    sign = "-" if distance < 0 else "+"
    d = abs(distance)
    if d <= 3:
        mag = str(d)
    elif d <= 7:
        mag = "4..7"
    elif d <= 15:
        mag = "8..15"
    else:
        mag = "16+"
    return sign + mag


def _punct_bucket(count: int) -> str:
    return str(count) if count < 3 else "3+"


def arc_feature_strings(forms: Sequence[str], tags: Sequence[str], dep: int, head: int
                        ) -> list[tuple[str, str]]:
    n = len(forms)
    if not 1 <= dep <= n or not 0 <= head <= n or head == dep:
        raise ValueError(f"bad arc {head}->{dep} for {n} tokens")

    def tag_at(k):
        if k == 0:
            return ROOT
        if k < 0:
            return BOS
        if k > n:
            return EOS
        return tags[k - 1]

    dw, dt = forms[dep - 1].lower(), tags[dep - 1]
    hw = ROOT if head == 0 else forms[head - 1].lower()
    ht = tag_at(head)
    if head == 0:
        dist, direction = ROOT, ROOT
        between = range(1, dep)
    else:
        dist = distance_bucket(head - dep)
        direction = "L" if head < dep else "R"
        between = range(min(head, dep) + 1, max(head, dep))
    punct = _punct_bucket(sum(1 for k in between if tags[k - 1] == "PUNCT"))
    tt = f"{dt}|{ht}"
    hp, hn = (ROOT, ROOT) if head == 0 else (tag_at(head - 1), tag_at(head + 1))
    dp, dn = tag_at(dep - 1) if dep > 1 else BOS, tag_at(dep + 1)
    return [
        ("abias", ""),
        ("dw", dw), ("dt", dt), ("hw", hw), ("ht", ht),
        ("tt", tt), ("ww", f"{dw}|{hw}"),
        ("hw_dt", f"{hw}|{dt}"), ("dw_ht", f"{dw}|{ht}"),
        ("dist", dist), ("dir", direction), ("npunct", punct),
        ("tt_dist", f"{tt}|{dist}"), ("tt_dir", f"{tt}|{direction}"),
        ("tt_npunct", f"{tt}|{punct}"),
        ("tt_hp", f"{tt}|{hp}"), ("tt_hn", f"{tt}|{hn}"),
        ("tt_dp", f"{tt}|{dp}"), ("tt_dn", f"{tt}|{dn}"),
        ("tt_hp_dn", f"{tt}|{hp}|{dn}"), ("tt_hn_dp", f"{tt}|{hn}|{dp}"),
    ]


def extract_arc_features(s: Sentence | Sequence[str], dep: int, head: int, tags: Sequence[str],
                         dim: int = HASH_DIM) -> np.ndarray:
    """Features for attaching ``dep`` to ``head`` (0 = root) under UPOS ``tags``."""
    return to_vector(arc_feature_strings(_forms(s), tags, dep, head), dim)
