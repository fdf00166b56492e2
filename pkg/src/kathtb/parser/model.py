"""Training and greedy prediction for the three-part baseline parser."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from ..conllu import Profile, Sentence, Treebank, errors_only, validate_sentence
from ..errors import TrainingError
from .features import arc_feature_strings, tag_feature_strings, to_vector
from .linear import LinearModel, SGDTrainer, softmax

log = logging.getLogger(__name__)

ARC_LABELS = ["arc"]


@dataclass(frozen=True)
class ParserConfig:
    epochs: int = 20
    window: int = 16
    hash_bits: int = 20
    lr0: float = 0.1
    decay: float = 1e-4
    l2: float = 1e-6
    seed: int = 42
    profile: str = "lenient"  # validation level a training sentence must pass

    def __post_init__(self):
        if self.epochs < 0 or self.window < 1 or not 1 <= self.hash_bits <= 30:
            raise ValueError(f"bad parser config: {self}")
        Profile(self.profile)

    @property
    def dim(self) -> int:
        return 1 << self.hash_bits

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ParserModel:
    tagger: LinearModel
    arc_scorer: LinearModel
    labeler: LinearModel
    config: ParserConfig

    def __post_init__(self):
        dims = {self.tagger.dim, self.arc_scorer.dim, self.labeler.dim}
        if dims != {self.config.dim}:
            raise ValueError("components must share the hash dimension")


def candidates(dep: int, n: int, window: int) -> list[int]:
    """Root plus every token within ``window`` of ``dep``, ascending."""
    lo, hi = max(1, dep - window), min(n, dep + window)
    return [0] + [h for h in range(lo, hi + 1) if h != dep]


def _training_candidates(dep: int, gold_head: int, n: int, window: int) -> list[int]:
    cands = candidates(dep, n, window)
    if gold_head not in cands:
        cands = sorted(cands + [gold_head])
    return cands


def train(train_tb: Treebank | Sequence[Sentence], config: ParserConfig = ParserConfig()) -> ParserModel:
    """Fit tagger, arc scorer and labeler by per-example SGD in fixed sentence order."""
    sentences = list(train_tb.sentences if isinstance(train_tb, Treebank) else train_tb)
    sentences = [s for s in sentences if s.tokens]
    if not sentences:
        raise TrainingError("training treebank has no sentences", code="EMPTY_TRAINING_SET")
    usable = [s for s in sentences if not errors_only(validate_sentence(s, config.profile))]
    if not usable:
        raise TrainingError(f"no sentence passes {config.profile} validation", code="NO_VALID_SENTENCES")
    if len(usable) < len(sentences):
        log.warning("skipping %d sentences that fail %s validation",
                    len(sentences) - len(usable), config.profile)

    dim = config.dim
    tag_labels = sorted({t.upos for s in usable for t in s.tokens})
    rel_labels = sorted({t.deprel for s in usable for t in s.tokens})
    tag_index = {t: k for k, t in enumerate(tag_labels)}
    rel_index = {r: k for k, r in enumerate(rel_labels)}

    # Features never change across epochs (gold context), so build them once.
    tag_examples, arc_examples, rel_examples = [], [], []
    for s in usable:
        forms = [t.form for t in s.tokens]
        tags = [t.upos for t in s.tokens]
        n = len(forms)
        for t in s.tokens:
            tag_examples.append((to_vector(tag_feature_strings(forms, t.id, tags), dim), tag_index[t.upos]))
        for t in s.tokens:
            cands = _training_candidates(t.id, t.head, n, config.window)
            fvs = [to_vector(arc_feature_strings(forms, tags, t.id, h), dim) for h in cands]
            arc_examples.append((fvs, cands.index(t.head)))
            rel_examples.append((fvs[cands.index(t.head)], rel_index[t.deprel]))

    hyper = dict(dim=dim, lr0=config.lr0, decay=config.decay, l2=config.l2)
    tagger = SGDTrainer(len(tag_labels), **hyper)
    arcs = SGDTrainer(1, **hyper)
    labeler = SGDTrainer(len(rel_labels), **hyper)
    for epoch in range(config.epochs):
        for fv, gold in tag_examples:
            tagger.step(fv, gold)
        for fvs, gold in arc_examples:
            arcs.step_candidates(fvs, gold)
        for fv, gold in rel_examples:
            labeler.step(fv, gold)
        log.debug("epoch %d done", epoch + 1)

    return ParserModel(
        tagger=tagger.to_model(tag_labels, config.epochs, config.seed),
        arc_scorer=arcs.to_model(ARC_LABELS, config.epochs, config.seed, with_bias=False),
        labeler=labeler.to_model(rel_labels, config.epochs, config.seed),
        config=config,
    )


def predict_tags(m: ParserModel, forms: Sequence[str]) -> list[str]:
    tags: list[str] = []
    for i in range(1, len(forms) + 1):
        fv = to_vector(tag_feature_strings(forms, i, tags), m.config.dim)
        tags.append(m.tagger.class_labels[m.tagger.best(fv)])
    return tags


def arc_distribution(m: ParserModel, s: Sentence, dep: int, tags: Sequence[str]
                     ) -> tuple[list[int], np.ndarray]:
    """Candidate heads for ``dep`` and their softmax probabilities."""
    forms = [t.form for t in s.tokens]
    cands = candidates(dep, len(forms), m.config.window)
    fvs = [to_vector(arc_feature_strings(forms, tags, dep, h), m.config.dim) for h in cands]
    return cands, softmax(m.arc_scorer.candidate_scores(fvs))


def predict_sentence(m: ParserModel, s: Sentence) -> Sentence:
    """Greedy tagging, then per-token head argmax, then labels; may yield a non-tree."""
    forms = [t.form for t in s.tokens]
    if not forms:
        return s
    tags = predict_tags(m, forms)
    new_tokens = []
    for t in s.tokens:
        cands = candidates(t.id, len(forms), m.config.window)
        fvs = [to_vector(arc_feature_strings(forms, tags, t.id, h), m.config.dim) for h in cands]
        best = int(np.argmax(m.arc_scorer.candidate_scores(fvs)))
        label = m.labeler.class_labels[m.labeler.best(fvs[best])]
        new_tokens.append(replace(t, upos=tags[t.id - 1], head=cands[best], deprel=label))
    return s.with_tokens(new_tokens)


def predict_treebank(m: ParserModel, tb: Treebank, repair: bool = False) -> Treebank:
    from .repair import repair_tree

    out = []
    for s in tb.sentences:
        p = predict_sentence(m, s)
        out.append(repair_tree(p) if repair else p)
    return Treebank(tuple(out), tb.source_path)
