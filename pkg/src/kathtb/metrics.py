"""UPOS accuracy, weighted DEPREL F1, UAS and LAS over aligned treebanks."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

from .conllu import Sentence, Token, Treebank
from .errors import AlignmentError, KathError

METRICS = ("upos", "deprel_f1", "uas", "las")


@dataclass(frozen=True)
class EvalOptions:
    universal_only: bool = False  # compare DEPREL up to the first ":"
    exclude_punct: bool = False   # drop tokens whose gold UPOS is PUNCT


def check_alignment(gold: Treebank, pred: Treebank) -> list[tuple[Sentence, Sentence]]:
    """Pair sentences, requiring identical ids, token counts and FORMs."""
    if len(gold.sentences) != len(pred.sentences):
        index = min(len(gold.sentences), len(pred.sentences))
        sent_id = gold.sentences[index].sent_id if index < len(gold.sentences) else pred.sentences[index].sent_id
        raise AlignmentError(
            f"sentence counts differ: gold {len(gold.sentences)}, pred {len(pred.sentences)}; "
            f"first unpaired sentence {sent_id!r} at index {index}",
            sentence_index=index, sent_id=sent_id)
    pairs = []
    for index, (g, p) in enumerate(zip(gold.sentences, pred.sentences)):
        if g.sent_id != p.sent_id:
            raise AlignmentError(f"sentence {index}: gold id {g.sent_id!r} vs pred id {p.sent_id!r}",
                                 sentence_index=index, sent_id=g.sent_id)
        if len(g.tokens) != len(p.tokens):
            raise AlignmentError(
                f"sentence {g.sent_id!r}: {len(g.tokens)} gold tokens vs {len(p.tokens)} predicted",
                sentence_index=index, sent_id=g.sent_id,
                position=min(len(g.tokens), len(p.tokens)) + 1)
        for gt, pt in zip(g.tokens, p.tokens):
            if gt.form != pt.form:
                raise AlignmentError(
                    f"sentence {g.sent_id!r} token {gt.id}: FORM {gt.form!r} vs {pt.form!r}",
                    sentence_index=index, sent_id=g.sent_id, position=gt.id)
        pairs.append((g, p))
    return pairs


def _token_pairs(gold: Treebank, pred: Treebank, options: EvalOptions) -> Iterator[tuple[Token, Token]]:
    for g, p in check_alignment(gold, pred):
        for gt, pt in zip(g.tokens, p.tokens):
            if options.exclude_punct and gt.upos == "PUNCT":
                continue
            yield gt, pt


def _label(deprel: str, options: EvalOptions) -> str:
    return deprel.split(":", 1)[0] if options.universal_only else deprel


@dataclass
class _Counts:
    tokens: int = 0
    upos: int = 0
    heads: int = 0
    labeled: int = 0
    gold_labels: Counter = field(default_factory=Counter)
    pred_labels: Counter = field(default_factory=Counter)
    true_pos: Counter = field(default_factory=Counter)


def _count(gold: Treebank, pred: Treebank, options: EvalOptions) -> _Counts:
    c = _Counts()
    for gt, pt in _token_pairs(gold, pred, options):
        gl, pl = _label(gt.deprel, options), _label(pt.deprel, options)
        c.tokens += 1
        c.upos += gt.upos == pt.upos
        if gt.head == pt.head:
            c.heads += 1
            c.labeled += gl == pl
        c.gold_labels[gl] += 1
        c.pred_labels[pl] += 1
        if gl == pl:
            c.true_pos[gl] += 1
    if c.tokens == 0:
        raise KathError("no tokens to evaluate", code="EMPTY_EVALUATION")
    return c


def _ratio(num: int, den: int) -> Fraction:
    return Fraction(num, den) if den else Fraction(0)


def _per_label(c: _Counts) -> dict[str, dict]:
    out = {}
    for label in sorted(set(c.gold_labels) | set(c.pred_labels)):
        tp = c.true_pos[label]
        precision = _ratio(tp, c.pred_labels[label])
        recall = _ratio(tp, c.gold_labels[label])
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else Fraction(0)
        out[label] = {"precision": precision, "recall": recall, "f1": f1,
                      "gold_support": c.gold_labels[label]}
    return out


def _weighted_f1(c: _Counts, per_label: dict[str, dict]) -> Fraction:
    return sum((Fraction(v["gold_support"], c.tokens) * v["f1"] for v in per_label.values()),
               Fraction(0))


def upos_accuracy(gold: Treebank, pred: Treebank, options: EvalOptions = EvalOptions()) -> Fraction:
    c = _count(gold, pred, options)
    return Fraction(c.upos, c.tokens)


def uas(gold: Treebank, pred: Treebank, options: EvalOptions = EvalOptions()) -> Fraction:
    c = _count(gold, pred, options)
    return Fraction(c.heads, c.tokens)


def las(gold: Treebank, pred: Treebank, options: EvalOptions = EvalOptions()) -> Fraction:
    c = _count(gold, pred, options)
    return Fraction(c.labeled, c.tokens)


def deprel_weighted_f1(gold: Treebank, pred: Treebank, options: EvalOptions = EvalOptions()
                       ) -> tuple[Fraction, dict[str, dict]]:
    """Label-only F1 per relation (heads ignored), weighted by gold support."""
    c = _count(gold, pred, options)
    per_label = _per_label(c)
    return _weighted_f1(c, per_label), per_label


@dataclass(frozen=True)
class EvalReport:
    upos_accuracy: float
    deprel_weighted_f1: float
    uas: float
    las: float
    token_count: int
    sentence_count: int
    per_label: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "upos": self.upos_accuracy,
            "deprel_f1": self.deprel_weighted_f1,
            "uas": self.uas,
            "las": self.las,
            "tokens": self.token_count,
            "sentences": self.sentence_count,
            "per_label": self.per_label,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=False)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            upos_accuracy=float(d["upos"]),
            deprel_weighted_f1=float(d["deprel_f1"]),
            uas=float(d["uas"]),
            las=float(d["las"]),
            token_count=int(d.get("tokens", 0)),
            sentence_count=int(d.get("sentences", 0)),
            per_label=d.get("per_label", {}),
        )

    def metric(self, name: str) -> float:
        return self.to_dict()[name]


def evaluate(gold: Treebank, pred: Treebank, options: EvalOptions = EvalOptions()) -> EvalReport:
    """All four metrics from a single counting pass."""
    c = _count(gold, pred, options)
    per_label = _per_label(c)
    return EvalReport(
        upos_accuracy=float(Fraction(c.upos, c.tokens)),
        deprel_weighted_f1=float(_weighted_f1(c, per_label)),
        uas=float(Fraction(c.heads, c.tokens)),
        las=float(Fraction(c.labeled, c.tokens)),
        token_count=c.tokens,
        sentence_count=len(gold.sentences),
        per_label={k: {"precision": float(v["precision"]), "recall": float(v["recall"]),
                       "f1": float(v["f1"]), "gold_support": v["gold_support"]}
                   for k, v in per_label.items()},
    )


@dataclass(frozen=True)
class ReportDelta:
    absolute: dict[str, float]
    relative: dict[str, float | None]

    def to_dict(self) -> dict:
        return {m: {"absolute": self.absolute[m], "relative": self.relative[m]} for m in METRICS}


def diff_reports(a: EvalReport, b: EvalReport) -> ReportDelta:
    """Per-metric ``b - a`` and ``(b - a) / a``; relative is None when ``a`` is 0.

    Values go through their decimal repr so 0.5162 - 0.4183 is exactly 0.0979.
    """
    absolute, relative = {}, {}
    for m in METRICS:
        va, vb = Fraction(repr(a.metric(m))), Fraction(repr(b.metric(m)))
        diff = vb - va
        absolute[m] = float(diff)
        relative[m] = float(diff / va) if va > 0 else None
    return ReportDelta(absolute, relative)
