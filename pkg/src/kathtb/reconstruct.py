"""OCR-aware text cleanup run before annotation.

Three conservative rewrite rules (line-break dehyphenation, lexicon-gated
split-word joins, boundary punctuation) plus a flagging pass for overlong
enumerative sentences. Every rewrite is recorded in an audit trail so that
the reported counts can be replayed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .conllu import Treebank

RULE_DEHYPHENATE = "dehyphenate"
RULE_JOIN = "join_split_words"
RULE_BOUNDARY = "boundary_punct"
RULE_LONG = "long_sentence"


@dataclass(frozen=True)
class ReconstructionConfig:
    hyphen_chars: frozenset[str] = frozenset({"-", "‐", "­"})
    max_join_gap: int = 1
    enum_split_threshold: int = 120
    boundary_punct: frozenset[str] = frozenset({".", ";", "·", "!", "?"})

    def __post_init__(self):
        if self.enum_split_threshold <= 0:
            raise ValueError("enum_split_threshold must be positive")
        if self.max_join_gap < 1:
            raise ValueError("max_join_gap must be >= 1")
        if not self.boundary_punct:
            raise ValueError("boundary_punct must not be empty")


@dataclass(frozen=True)
class AuditEntry:
    rule: str
    line: int
    before: str
    after: str

    def to_dict(self) -> dict:
        return {"rule": self.rule, "line": self.line, "before": self.before, "after": self.after}


@dataclass
class ReconstructionReport:
    audit: list[AuditEntry] = field(default_factory=list)

    def _count(self, rule: str) -> int:
        return sum(1 for e in self.audit if e.rule == rule)

    @property
    def hyphens_removed(self) -> int:
        return self._count(RULE_DEHYPHENATE)

    @property
    def joins_performed(self) -> int:
        return self._count(RULE_JOIN)

    @property
    def boundary_fixes(self) -> int:
        return self._count(RULE_BOUNDARY)

    @property
    def long_sentences_flagged(self) -> int:
        return self._count(RULE_LONG)

    def merge(self, other: "ReconstructionReport") -> "ReconstructionReport":
        return ReconstructionReport(self.audit + other.audit)

    def to_dict(self) -> dict:
        return {
            "joins_performed": self.joins_performed,
            "hyphens_removed": self.hyphens_removed,
            "boundary_fixes": self.boundary_fixes,
            "long_sentences_flagged": self.long_sentences_flagged,
            "audit": [e.to_dict() for e in self.audit],
        }


def _starts_with_letter(line: str) -> bool:
    return bool(line) and line[0].isalpha()


def dehyphenate(lines: Iterable[str], cfg: ReconstructionConfig = ReconstructionConfig()
                ) -> tuple[list[str], ReconstructionReport]:
    """Merge a line ending in a hyphen with the following line when that line
    starts with a letter.

    Blank lines always block a merge. With ``max_join_gap > 1`` up to
    ``max_join_gap - 1`` whitespace-only (but non-empty) lines between the
    two halves are skipped and dropped. Line numbers in the audit refer to
    the input.
    """
    lines = list(lines)
    report = ReconstructionReport()
    # Work from the end so every line is compared with its final successor;
    # a lone hyphen line that merges forward changes what the line above sees.
    tail: list[str] = []  # finished lines, reversed
    entries = []
    for i in range(len(lines) - 1, -1, -1):
        current = lines[i]
        if current and current[-1] in cfg.hyphen_chars:
            k = len(tail) - 1
            while k >= 0 and len(tail) - 1 - k < cfg.max_join_gap - 1 and tail[k] and not tail[k].strip():
                k -= 1
            if k >= 0 and _starts_with_letter(tail[k]):
                merged = current[:-1] + tail[k]
                entries.append(AuditEntry(RULE_DEHYPHENATE, i + 1, current + "\n" + tail[k], merged))
                del tail[k:]
                current = merged
        tail.append(current)
    report.audit.extend(reversed(entries))
    return tail[::-1], report


_WORD_SPLIT = re.compile(r"(\s+)")


def _strip_edges(word: str) -> tuple[str, str, str]:
    """Split ``word`` into (leading punctuation, core, trailing punctuation)."""
    start = 0
    while start < len(word) and not word[start].isalnum():
        start += 1
    end = len(word)
    while end > start and not word[end - 1].isalnum():
        end -= 1
    return word[:start], word[start:end], word[end:]


def _join_line(line: str, lexicon: frozenset[str]) -> tuple[str, list[tuple[str, str]]]:
    parts = _WORD_SPLIT.split(line)  # words at even indices, separators at odd
    joins = []
    k = 0
    while k + 2 < len(parts):
        a, sep, b = parts[k], parts[k + 1], parts[k + 2]
        lead_a, core_a, trail_a = _strip_edges(a)
        lead_b, core_b, trail_b = _strip_edges(b)
        if (sep == " " and core_a and core_b and not trail_a and not lead_b
                and core_a + core_b in lexicon
                and core_a not in lexicon and core_b not in lexicon):
            joined = a + b
            joins.append((f"{a} {b}", joined))
            parts[k:k + 3] = [joined]
            continue
        k += 2
    return "".join(parts), joins


def join_split_words(lines: Iterable[str], cfg: ReconstructionConfig = ReconstructionConfig(),
                     lexicon: Iterable[str] | None = None) -> tuple[list[str], ReconstructionReport]:
    """Join ``A B`` into ``AB`` when the lexicon knows ``AB`` but neither half.

    Edge punctuation is ignored for the lexicon lookup. Without a lexicon
    this is the identity.
    """
    lines = list(lines)
    report = ReconstructionReport()
    if not lexicon:
        return lines, report
    lexicon = frozenset(lexicon)
    out = []
    for lineno, line in enumerate(lines, start=1):
        new, joins = _join_line(line, lexicon)
        for before, after in joins:
            report.audit.append(AuditEntry(RULE_JOIN, lineno, before, after))
        out.append(new)
    return out, report


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def normalize_boundary_punct(text: str, cfg: ReconstructionConfig = ReconstructionConfig()
                             ) -> tuple[str, ReconstructionReport]:
    """Tidy sentence-final punctuation.

    Applied in order: drop horizontal whitespace before a boundary mark,
    collapse runs of one repeated mark, then force exactly one space between
    a boundary mark and a following letter.
    """
    report = ReconstructionReport()
    punct = "".join(sorted(cfg.boundary_punct))
    cls = "[" + re.escape(punct) + "]"

    def rewrite(pattern, repl, source):
        pieces = []
        last = 0
        for m in re.finditer(pattern, source):
            after = m.expand(repl)
            if after == m.group(0):
                continue
            report.audit.append(AuditEntry(RULE_BOUNDARY, _line_of(source, m.start()), m.group(0), after))
            pieces.append(source[last:m.start()])
            pieces.append(after)
            last = m.end()
        pieces.append(source[last:])
        return "".join(pieces)

    text = rewrite(r"[ \t]+(" + cls + ")", r"\1", text)
    text = rewrite(r"(" + cls + r")\1+", r"\1", text)
    text = rewrite(r"(" + cls + r")[ \t]*(?=[^\W\d_])", r"\1 ", text)
    return text, report


def flag_long_sentences(tb: Treebank, cfg: ReconstructionConfig = ReconstructionConfig()) -> list[str]:
    """Ids of sentences with more than ``enum_split_threshold`` tokens. Nothing is split."""
    return [s.sent_id for s in tb.sentences if len(s.tokens) > cfg.enum_split_threshold]


def load_lexicon(path) -> frozenset[str]:
    with open(path, encoding="utf-8") as f:
        return frozenset(w.strip() for w in f if w.strip())


def reconstruct_lines(lines: Iterable[str], cfg: ReconstructionConfig = ReconstructionConfig(), *,
                      lexicon: Iterable[str] | None = None, dehyphen: bool = True,
                      join: bool = True, boundary: bool = True
                      ) -> tuple[list[str], ReconstructionReport]:
    """Run the enabled rules in pipeline order over a document."""
    lines = list(lines)
    report = ReconstructionReport()
    if dehyphen:
        lines, r = dehyphenate(lines, cfg)
        report = report.merge(r)
    if join:
        lines, r = join_split_words(lines, cfg, lexicon)
        report = report.merge(r)
    if boundary:
        text, r = normalize_boundary_punct("\n".join(lines), cfg)
        report = report.merge(r)
        lines = text.split("\n") if lines else []
    return lines, report
