"""CoNLL-U data model, exact round-trip reading/writing and tree validation."""

from __future__ import annotations

import enum
import io
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, TextIO, Union

from .errors import ConlluError
from .schema import UD_DEPRELS, UD_UPOS, AnnotationSchema

Pairs = tuple[tuple[str, Union[str, None]], ...]

ORIGINS = ("batch", "retry", "unknown")

_RANGE_ID = re.compile(r"^\d+-\d+$")
_EMPTY_ID = re.compile(r"^\d+\.\d+$")
_COMMENT_KV = re.compile(r"^#\s*([A-Za-z_][\w.-]*)\s*=\s?(.*)$")


class Profile(str, enum.Enum):
    STRICT = "strict"
    LENIENT = "lenient"


class Severity(str, enum.Enum):
    ERROR = "error"
    WARNING = "warning"


# Codes that stay errors under the lenient profile.
_LENIENT_ERRORS = frozenset({"HEAD_OUT_OF_RANGE", "BAD_FIELD_COUNT"})
_STRICT_ERRORS = frozenset({
    "CYCLE", "MULTI_ROOT", "NO_ROOT", "HEAD_OUT_OF_RANGE", "BAD_UPOS",
    "BAD_DEPREL", "BAD_FIELD_COUNT", "DUPLICATE_SENT_ID",
})
ISSUE_CODES = _STRICT_ERRORS | {"NONPROJECTIVE_INFO"}


def severity_for(code: str, profile: Profile | str) -> Severity:
    profile = Profile(profile)
    errors = _STRICT_ERRORS if profile is Profile.STRICT else _LENIENT_ERRORS
    return Severity.ERROR if code in errors else Severity.WARNING


def parse_pairs(column: str) -> Pairs:
    """Split a FEATS/MISC column into ordered ``(key, value)`` pairs.

    Items without ``=`` keep ``None`` as value so they serialize unchanged.
    """
    if column == "_":
        return ()
    pairs = []
    for item in column.split("|"):
        key, sep, value = item.partition("=")
        pairs.append((key, value) if sep else (item, None))
    return tuple(pairs)


def format_pairs(pairs: Pairs) -> str:
    if not pairs:
        return "_"
    return "|".join(k if v is None else f"{k}={v}" for k, v in pairs)


def pairs_from_mapping(mapping) -> Pairs:
    """Synthesized pairs are sorted by key."""
    return tuple(sorted((str(k), str(v)) for k, v in mapping.items()))


@dataclass(frozen=True)
class Token:
    id: int
    form: str
    lemma: str = "_"
    upos: str = "_"
    xpos: str = "_"
    feats: Pairs = ()
    head: int = 0
    deprel: str = "_"
    deps: str = "_"
    misc: Pairs = ()

    def __post_init__(self):
        if self.id < 1:
            raise ValueError(f"token id must be >= 1, got {self.id}")
        if not self.form or any(c in self.form for c in "\t\n\r"):
            raise ValueError(f"bad FORM {self.form!r}")
        for name in ("feats", "misc"):
            keys = [k for k, _ in getattr(self, name)]
            if len(keys) != len(set(keys)):
                raise ValueError(f"duplicate {name} key in token {self.id}")

    @classmethod
    def from_columns(cls, cols: list[str]) -> "Token":
        return cls(
            id=int(cols[0]),
            form=cols[1],
            lemma=cols[2],
            upos=cols[3],
            xpos=cols[4],
            feats=parse_pairs(cols[5]),
            head=int(cols[6]),
            deprel=cols[7],
            deps=cols[8],
            misc=parse_pairs(cols[9]),
        )

    def to_line(self) -> str:
        return "\t".join((
            str(self.id), self.form, self.lemma, self.upos, self.xpos,
            format_pairs(self.feats), str(self.head), self.deprel, self.deps,
            format_pairs(self.misc),
        ))

    def misc_dict(self) -> dict[str, str | None]:
        return dict(self.misc)


def _comment_value(comments: Iterable[str], key: str) -> str | None:
    for line in comments:
        m = _COMMENT_KV.match(line)
        if m and m.group(1) == key:
            return m.group(2)
    return None


@dataclass(frozen=True)
class Sentence:
    """One sentence block.

    ``rows`` holds tokens and pass-through lines (multiword ranges, empty
    nodes) in file order; ``tokens`` is the regular-token view used by
    validation, metrics and the parser.
    """

    sent_id: str
    rows: tuple[Union[Token, str], ...]
    comments: tuple[str, ...] = ()
    text: str | None = None
    origin: str = "unknown"
    tokens: tuple[Token, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")
        object.__setattr__(self, "tokens", tuple(r for r in self.rows if isinstance(r, Token)))

    @classmethod
    def build(cls, sent_id: str, tokens: Iterable[Token], *, text: str | None = None,
              origin: str = "unknown", extra_comments: Iterable[str] = ()) -> "Sentence":
        tokens = tuple(tokens)
        if text is None:
            text = " ".join(t.form for t in tokens)
        comments = [f"# sent_id = {sent_id}", f"# text = {text}"]
        if origin != "unknown":
            comments.append(f"# origin = {origin}")
        comments.extend(extra_comments)
        return cls(sent_id=sent_id, rows=tokens, comments=tuple(comments), text=text, origin=origin)

    @property
    def passthrough_rows(self) -> tuple[str, ...]:
        return tuple(r for r in self.rows if isinstance(r, str))

    def __len__(self) -> int:
        return len(self.tokens)

    def comment(self, key: str) -> str | None:
        return _comment_value(self.comments, key)

    def with_tokens(self, tokens: Iterable[Token]) -> "Sentence":
        """Replace regular tokens positionally, keeping pass-through rows in place."""
        tokens = tuple(tokens)
        if len(tokens) != len(self.tokens):
            raise ValueError(f"expected {len(self.tokens)} tokens, got {len(tokens)}")
        new = iter(tokens)
        rows = tuple(next(new) if isinstance(r, Token) else r for r in self.rows)
        return replace(self, rows=rows)

    def with_comment(self, key: str, value: str | None) -> "Sentence":
        """Set (or drop, when ``value`` is None) a ``# key = value`` comment."""
        comments = []
        placed = False
        for line in self.comments:
            m = _COMMENT_KV.match(line)
            if m and m.group(1) == key:
                if value is not None and not placed:
                    comments.append(f"# {key} = {value}")
                    placed = True
                continue
            comments.append(line)
        if value is not None and not placed:
            comments.append(f"# {key} = {value}")
        return replace(self, comments=tuple(comments))

    def with_origin(self, origin: str) -> "Sentence":
        if origin == self.origin and (origin == "unknown" or self.comment("origin") == origin):
            return self
        updated = self.with_comment("origin", None if origin == "unknown" else origin)
        return replace(updated, origin=origin)

    def lines(self) -> list[str]:
        return list(self.comments) + [r if isinstance(r, str) else r.to_line() for r in self.rows]


@dataclass(frozen=True)
class ValidationIssue:
    sent_id: str
    token_id: int | None
    code: str
    severity: Severity
    message: str

    def to_dict(self) -> dict:
        return {
            "sent_id": self.sent_id,
            "token_id": self.token_id,
            "code": self.code,
            "severity": self.severity.value,
            "message": self.message,
        }


@dataclass(frozen=True)
class Treebank:
    sentences: tuple[Sentence, ...] = ()
    source_path: str = ""
    # Row-level problems found while reading (lenient mode only).
    parse_issues: tuple[ValidationIssue, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def sent_ids(self) -> list[str]:
        return [s.sent_id for s in self.sentences]

    @property
    def token_count(self) -> int:
        return sum(len(s.tokens) for s in self.sentences)


def _parse_block(lines: list[tuple[int, str]], index: int, strict: bool,
                 issues: list[ValidationIssue]) -> Sentence:
    comments: list[str] = []
    rows: list[Union[Token, str]] = []
    for _, line in lines:
        if not line.startswith("#"):
            break
        comments.append(line)
    sent_id = _comment_value(comments, "sent_id")
    label = sent_id if sent_id is not None else str(index + 1)

    for lineno, line in lines[len(comments):]:
        if line.startswith("#"):
            _row_problem(issues, strict, label, lineno, "comment line inside token rows")
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            _row_problem(issues, strict, label, lineno, f"expected 10 columns, found {len(cols)}")
            continue
        if _RANGE_ID.match(cols[0]) or _EMPTY_ID.match(cols[0]):
            rows.append(line)
            continue
        try:
            rows.append(Token.from_columns(cols))
        except ValueError as exc:
            _row_problem(issues, strict, label, lineno, f"malformed token row: {exc}")

    token_ids = [r.id for r in rows if isinstance(r, Token)]
    if token_ids != list(range(1, len(token_ids) + 1)):
        _row_problem(issues, strict, label, lines[0][0], "token ids are not 1..n in order")

    origin = _comment_value(comments, "origin")
    return Sentence(
        sent_id=label,
        rows=tuple(rows),
        comments=tuple(comments),
        text=_comment_value(comments, "text"),
        origin=origin if origin in ORIGINS else "unknown",
    )


def _row_problem(issues, strict, sent_id, lineno, message):
    message = f"line {lineno}: {message}"
    if strict:
        raise ConlluError(message)
    issues.append(ValidationIssue(sent_id, None, "BAD_FIELD_COUNT", Severity.ERROR, message))


def parse_treebank(source: Union[str, bytes, TextIO], *, strict: bool = False,
                   source_path: str = "") -> Treebank:
    """Read CoNLL-U from a string, UTF-8 bytes or a text stream.

    Rows with the wrong column count are skipped and recorded in
    ``Treebank.parse_issues``; with ``strict=True`` they raise ConlluError.
    """
    if isinstance(source, bytes):
        try:
            text = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConlluError(f"input is not valid UTF-8: {exc}", code="BAD_ENCODING") from exc
    elif isinstance(source, str):
        text = source
    else:
        try:
            text = source.read()
        except UnicodeDecodeError as exc:
            raise ConlluError(f"input is not valid UTF-8: {exc}", code="BAD_ENCODING") from exc

    if text.startswith("﻿"):
        text = text[1:]

    sentences: list[Sentence] = []
    issues: list[ValidationIssue] = []
    block: list[tuple[int, str]] = []
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if line.strip() == "":
            if block:
                sentences.append(_parse_block(block, len(sentences), strict, issues))
                block = []
            continue
        block.append((lineno, line))
    if block:
        sentences.append(_parse_block(block, len(sentences), strict, issues))
    return Treebank(tuple(sentences), source_path, tuple(issues))


def read_treebank(path: str | Path, *, strict: bool = False) -> Treebank:
    data = Path(path).read_bytes()
    return parse_treebank(data, strict=strict, source_path=str(path))


def serialize_treebank(tb: Treebank | Iterable[Sentence]) -> str:
    sentences = tb.sentences if isinstance(tb, Treebank) else tuple(tb)
    return "".join("\n".join(s.lines()) + "\n\n" for s in sentences)


def write_treebank(tb: Treebank | Iterable[Sentence], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(serialize_treebank(tb))


# --- validation -----------------------------------------------------------

def find_cycles(heads: list[int]) -> list[list[int]]:
    """Return every cycle (as sorted 1-based ids) in a head assignment.

    ``heads[i]`` is the head of token ``i + 1``; out-of-range heads end a path.
    """
    n = len(heads)
    state = [0] * (n + 1)  # 0 unvisited, 1 on current path, 2 done
    cycles = []
    for start in range(1, n + 1):
        if state[start]:
            continue
        path = []
        node = start
        while 1 <= node <= n and state[node] == 0:
            state[node] = 1
            path.append(node)
            node = heads[node - 1]
        if 1 <= node <= n and state[node] == 1:
            cycles.append(sorted(path[path.index(node):]))
        for p in path:
            state[p] = 2
    return cycles


def _is_projective(heads: list[int]) -> bool:
    arcs = [(min(h, d), max(h, d)) for d, h in enumerate(heads, start=1)]
    for a, b in arcs:
        for c, e in arcs:
            if a < c < b < e:
                return False
    return True


def validate_sentence(s: Sentence, profile: Profile | str = Profile.STRICT,
                      schema: AnnotationSchema | None = None) -> list[ValidationIssue]:
    """Structural and label checks for one sentence.

    Without a schema UPOS is checked against the UD v2 tags and DEPREL by
    its universal part; with one, both are compared against the schema sets
    exactly as written.
    """
    profile = Profile(profile)
    issues: list[ValidationIssue] = []

    def add(code, token_id, message):
        issues.append(ValidationIssue(s.sent_id, token_id, code, severity_for(code, profile), message))

    tokens = s.tokens
    n = len(tokens)
    heads = [t.head for t in tokens]

    for t in tokens:
        if t.head < 0 or t.head > n:
            add("HEAD_OUT_OF_RANGE", t.id, f"head {t.head} outside 0..{n}")

    for cycle in find_cycles(heads):
        add("CYCLE", cycle[0], "cycle through tokens " + ",".join(map(str, cycle)))

    roots = [t.id for t in tokens if t.head == 0]
    if not roots:
        add("NO_ROOT", None, "no token attached to 0")
    elif len(roots) > 1:
        add("MULTI_ROOT", roots[1], "roots at tokens " + ",".join(map(str, roots)))

    upos_set = schema.upos_set if schema else UD_UPOS
    for t in tokens:
        if t.upos not in upos_set:
            add("BAD_UPOS", t.id, f"UPOS {t.upos!r} not in inventory")
        ok = t.deprel in schema.deprel_set if schema else t.deprel.split(":", 1)[0] in UD_DEPRELS
        if not ok:
            add("BAD_DEPREL", t.id, f"DEPREL {t.deprel!r} not in inventory")

    structural = {"HEAD_OUT_OF_RANGE", "CYCLE", "NO_ROOT", "MULTI_ROOT"}
    if n and not any(i.code in structural for i in issues) and not _is_projective(heads):
        issues.append(ValidationIssue(s.sent_id, None, "NONPROJECTIVE_INFO", Severity.WARNING,
                                      "tree is non-projective"))
    return issues


def validate_treebank(tb: Treebank, profile: Profile | str = Profile.STRICT,
                      schema: AnnotationSchema | None = None) -> list[ValidationIssue]:
    profile = Profile(profile)
    issues = [replace(i, severity=severity_for(i.code, profile)) for i in tb.parse_issues]
    seen: set[str] = set()
    for s in tb.sentences:
        if s.sent_id in seen:
            issues.append(ValidationIssue(s.sent_id, None, "DUPLICATE_SENT_ID",
                                          severity_for("DUPLICATE_SENT_ID", profile),
                                          f"sent_id {s.sent_id!r} repeated"))
        seen.add(s.sent_id)
        issues.extend(validate_sentence(s, profile, schema))
    return issues


def errors_only(issues: Iterable[ValidationIssue]) -> list[ValidationIssue]:
    return [i for i in issues if i.severity is Severity.ERROR]
