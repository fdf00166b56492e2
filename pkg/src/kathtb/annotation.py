"""File-based annotation ingestion: JSON recovery, schema gating, resumable
offsets, and a bounded retry queue.

Records are newline-delimited JSON objects::

    {"sent_id": "q12-s3", "text": "...",
     "tokens": [{"form": "...", "lemma": "...", "upos": "NOUN",
                 "feats": {"Case": "Dat"} | "Case=Dat" | null,
                 "head": 2, "deprel": "obl",
                 "sidecars": {"archaic_lexeme_class": "dative_form"}}]}

``id``, ``xpos`` and ``misc`` are optional per token. Sidecars land in MISC
as ``Kath:<name>=<value>``.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, NamedTuple

from .conllu import (Profile, Sentence, Severity, Token, pairs_from_mapping, parse_pairs,
                     validate_sentence)
from .errors import IngestError
from .schema import AnnotationSchema
from .snapshot import PENDING_KEY, PENDING_VALUE

SIDECAR_PREFIX = "Kath:"
STATE_FIELDS = ("next_offset", "admitted", "retry_queue", "max_attempts")
REQUIRED_TOKEN_FIELDS = ("form", "lemma", "upos", "feats", "head", "deprel")

_SENT_ID_RE = re.compile(r'"sent_id"\s*:\s*"((?:[^"\\]|\\.)*)"')


# --- JSON recovery ----------------------------------------------------------

def _strip_fences(text: str) -> str:
    lines = text.strip().split("\n")
    while lines and lines[0].strip().startswith("```"):
        lines.pop(0)
    while lines and lines[-1].strip().startswith("```"):
        lines.pop()
    return "\n".join(lines)


def _trim_to_brackets(text: str) -> str:
    starts = [i for i in (text.find("{"), text.find("[")) if i >= 0]
    ends = [i for i in (text.rfind("}"), text.rfind("]")) if i >= 0]
    if not starts or not ends:
        return text
    start, end = min(starts), max(ends)
    return text[start:end + 1] if start <= end else text


def _drop_trailing_commas(text: str) -> str:
    out = []
    in_string = False
    escaped = False
    i = 0
    while i < len(text):
        c = text[i]
        if in_string:
            out.append(c)
            if escaped:
                escaped = False
            elif c == "\\":
                escaped = True
            elif c == '"':
                in_string = False
        elif c == '"':
            in_string = True
            out.append(c)
        elif c == ",":
            j = i + 1
            while j < len(text) and text[j] in " \t\r\n":
                j += 1
            if j < len(text) and text[j] in "}]":
                i = j  # drop the comma, keep the whitespace-free bracket
                continue
            out.append(c)
        else:
            out.append(c)
        i += 1
    return "".join(out)


def recover_json(text: str) -> str:
    """Conservative cleanup of near-valid JSON.

    Strips code-fence lines, trims text outside the outermost brackets and
    removes trailing commas before a closing bracket. Nothing else is
    repaired; callers still have to parse the result.
    """
    text = _trim_to_brackets(_strip_fences(text))
    while True:
        cleaned = _drop_trailing_commas(text)
        if cleaned == text:
            return text
        text = cleaned


# --- state ------------------------------------------------------------------

@dataclass
class RetryEntry:
    sent_id: str
    reason: str
    attempt_count: int = 0

    def to_dict(self) -> dict:
        return {"sent_id": self.sent_id, "reason": self.reason, "attempt_count": self.attempt_count}


@dataclass
class IngestState:
    next_offset: int = 0
    admitted: list[str] = field(default_factory=list)
    retry_queue: list[RetryEntry] = field(default_factory=list)
    max_attempts: int = 3

    def queued_ids(self) -> list[str]:
        return [e.sent_id for e in self.retry_queue]

    def copy(self) -> "IngestState":
        return IngestState(self.next_offset, list(self.admitted),
                           [RetryEntry(**e.to_dict()) for e in self.retry_queue], self.max_attempts)

    def check(self) -> None:
        problems = []
        if not isinstance(self.max_attempts, int) or self.max_attempts < 1:
            problems.append("max_attempts must be a positive integer")
        if not isinstance(self.next_offset, int) or self.next_offset < len(self.admitted):
            problems.append("next_offset smaller than number of admitted sentences")
        if len(set(self.admitted)) != len(self.admitted):
            problems.append("duplicate admitted ids")
        queued = self.queued_ids()
        if len(set(queued)) != len(queued):
            problems.append("duplicate retry queue ids")
        if set(queued) & set(self.admitted):
            problems.append("ids both admitted and queued")
        for e in self.retry_queue:
            if not isinstance(e.attempt_count, int) or not 0 <= e.attempt_count < max(self.max_attempts, 1):
                problems.append(f"bad attempt_count for {e.sent_id!r}")
        if problems:
            raise IngestError("state invariants violated: " + "; ".join(problems), code="STATE_CORRUPT")

    def to_dict(self) -> dict:
        return {
            "next_offset": self.next_offset,
            "admitted": list(self.admitted),
            "retry_queue": [e.to_dict() for e in self.retry_queue],
            "max_attempts": self.max_attempts,
        }

    @classmethod
    def from_dict(cls, d: Any) -> "IngestState":
        if not isinstance(d, dict) or set(d) != set(STATE_FIELDS):
            raise IngestError(f"state must have exactly the fields {STATE_FIELDS}", code="STATE_CORRUPT")
        try:
            if not all(isinstance(x, str) for x in d["admitted"]):
                raise TypeError("admitted ids must be strings")
            queue = []
            for e in d["retry_queue"]:
                if set(e) != {"sent_id", "reason", "attempt_count"}:
                    raise TypeError(f"bad retry entry {e!r}")
                queue.append(RetryEntry(str(e["sent_id"]), str(e["reason"]), e["attempt_count"]))
            state = cls(d["next_offset"], list(d["admitted"]), queue, d["max_attempts"])
        except (TypeError, KeyError) as exc:
            raise IngestError(f"malformed state: {exc}", code="STATE_CORRUPT") from exc
        state.check()
        return state

    def save(self, path: str | Path) -> None:
        """Write-new then rename-over, so a crash leaves either the old or the new state."""
        self.check()
        path = Path(path)
        fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent or ".")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                json.dump(self.to_dict(), f, ensure_ascii=False, indent=2)
                f.write("\n")
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path: str | Path, max_attempts: int = 3) -> "IngestState":
        path = Path(path)
        if not path.exists():
            return cls(max_attempts=max_attempts)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (ValueError, UnicodeDecodeError) as exc:
            raise IngestError(f"state file {path} is not valid JSON: {exc}", code="STATE_CORRUPT") from exc
        return cls.from_dict(data)


# --- record mapping -----------------------------------------------------------

def _parse_record(raw: str | dict) -> tuple[dict | None, str | None]:
    """Return ``(record, sent_id_guess)``; record is None when JSON fails."""
    if isinstance(raw, dict):
        sid = raw.get("sent_id")
        return raw, sid if isinstance(sid, str) else None
    m = _SENT_ID_RE.search(raw)
    guess = json.loads(f'"{m.group(1)}"') if m else None
    try:
        record = json.loads(recover_json(raw))
    except ValueError:
        return None, guess
    if not isinstance(record, dict):
        return None, guess
    sid = record.get("sent_id")
    return record, sid if isinstance(sid, str) and sid else guess


def _feats(value) -> tuple:
    if value is None or value == "_" or value == {}:
        return ()
    if isinstance(value, dict):
        return pairs_from_mapping(value)
    if isinstance(value, str):
        return parse_pairs(value)
    raise TypeError("feats must be a mapping, a string or null")


def record_to_sentence(record: dict, schema: AnnotationSchema, origin: str = "batch"
                       ) -> tuple[Sentence | None, list[str]]:
    """Map a record to a Sentence and list the reasons it cannot be admitted."""
    sent_id = record.get("sent_id")
    tokens_in = record.get("tokens")
    if not isinstance(sent_id, str) or not sent_id.strip() or any(c in sent_id for c in "\n\t"):
        return None, ["SCHEMA"]
    if not isinstance(tokens_in, list) or not tokens_in:
        return None, ["SCHEMA"]

    reasons: list[str] = []
    tokens = []
    try:
        for pos, tok in enumerate(tokens_in, start=1):
            if not isinstance(tok, dict) or any(k not in tok for k in REQUIRED_TOKEN_FIELDS):
                raise TypeError(f"token {pos} lacks required fields")
            if tok.get("id", pos) != pos:
                raise TypeError(f"token {pos} has id {tok.get('id')!r}")
            head = tok["head"]
            if isinstance(head, bool) or not isinstance(head, int):
                raise TypeError(f"token {pos} head is not an integer")
            for key in ("form", "lemma", "upos", "deprel"):
                if not isinstance(tok[key], str) or not tok[key] or any(c in tok[key] for c in "\t\n"):
                    raise TypeError(f"token {pos} field {key} is not a clean string")
            misc = dict(_feats(tok.get("misc")))
            sidecars = tok.get("sidecars") or {}
            if not isinstance(sidecars, dict):
                raise TypeError("sidecars must be a mapping")
            for name, value in sidecars.items():
                spec = schema.sidecar(name)
                if spec is None or not spec.accepts(value):
                    if "BAD_SIDECAR" not in reasons:
                        reasons.append("BAD_SIDECAR")
                    continue
                misc[SIDECAR_PREFIX + name] = value
            tokens.append(Token(
                id=pos, form=tok["form"], lemma=tok["lemma"], upos=tok["upos"],
                xpos=tok.get("xpos") or "_", feats=_feats(tok["feats"]), head=head,
                deprel=tok["deprel"], misc=pairs_from_mapping(misc),
            ))
    except (TypeError, ValueError):
        return None, ["SCHEMA"]

    text = record.get("text")
    sentence = Sentence.build(sent_id, tokens, text=text if isinstance(text, str) and "\n" not in text else None,
                              origin=origin)
    for issue in validate_sentence(sentence, Profile.LENIENT, schema):
        if issue.code in ("BAD_UPOS", "BAD_DEPREL") or issue.severity is Severity.ERROR:
            if issue.code not in reasons:
                reasons.append(issue.code)
    return sentence, reasons


def pending_slot(sent_id: str, reason: str) -> Sentence:
    """Token-less placeholder keeping a queued record's position in the batch file."""
    return Sentence(sent_id=sent_id, rows=(), comments=(
        f"# sent_id = {sent_id}", f"# {PENDING_KEY} = {PENDING_VALUE}", f"# kath_reason = {reason}"))


# --- ingestion ------------------------------------------------------------------

class IngestResult(NamedTuple):
    admitted: list[Sentence]
    state: IngestState
    batch_sentences: list[Sentence]     # admitted plus pending slots, in record order
    rejected: list[tuple[str, str]]     # (sent_id, reason) dropped without queueing


def ingest_batch(records: Iterable[str | dict], schema: AnnotationSchema, state: IngestState,
                 limit: int | None = None) -> IngestResult:
    """Consume records from ``state.next_offset`` on (at most ``limit`` of them).

    Valid records are admitted with origin ``batch``; failures go to the retry
    queue with a reason; ids already admitted or queued are rejected as
    DUPLICATE. The input state is not modified.
    """
    state.check()
    state = state.copy()
    admitted_set = set(state.admitted)
    queued_set = set(state.queued_ids())
    admitted, batch, rejected = [], [], []
    consumed = 0
    for offset, raw in enumerate(records):
        if offset < state.next_offset:
            continue
        if limit is not None and consumed >= limit:
            break
        consumed += 1
        state.next_offset = offset + 1

        record, guess = _parse_record(raw)
        if record is None:
            sentence, reasons = None, ["JSON_PARSE"]
            sent_id = guess or f"record-{offset + 1}"
        else:
            sentence, reasons = record_to_sentence(record, schema, "batch")
            sent_id = sentence.sent_id if sentence else (guess or f"record-{offset + 1}")

        if sent_id in admitted_set or sent_id in queued_set:
            rejected.append((sent_id, "DUPLICATE"))
            continue
        if reasons:
            reason = ",".join(reasons)
            state.retry_queue.append(RetryEntry(sent_id, reason, 0))
            queued_set.add(sent_id)
            batch.append(pending_slot(sent_id, reason))
        else:
            state.admitted.append(sent_id)
            admitted_set.add(sent_id)
            admitted.append(sentence)
            batch.append(sentence)
    state.check()
    return IngestResult(admitted, state, batch, rejected)


class RetryResult(NamedTuple):
    admitted: list[Sentence]
    state: IngestState
    dead_letter: list[dict]


def process_retries(replacements: Iterable[str | dict], state: IngestState,
                    schema: AnnotationSchema) -> RetryResult:
    """Apply regenerated records to queued ids.

    Raises IngestError(UNKNOWN_RETRY_ID) before touching anything if a
    replacement names an id that is not in the retry queue.
    """
    state.check()
    parsed = []
    for raw in replacements:
        record, guess = _parse_record(raw)
        parsed.append((raw, record, guess))
    queued = set(state.queued_ids())
    unknown = [g for _, _, g in parsed if g is None or g not in queued]
    if unknown:
        raise IngestError(f"replacements for ids not in the retry queue: {unknown}", code="UNKNOWN_RETRY_ID")

    state = state.copy()
    admitted, dead = [], []
    for raw, record, sent_id in parsed:
        entry = next((e for e in state.retry_queue if e.sent_id == sent_id), None)
        if entry is None:
            # Already resolved earlier in this call.
            continue
        if record is None:
            sentence, reasons = None, ["JSON_PARSE"]
        else:
            sentence, reasons = record_to_sentence(record, schema, "retry")
        if not reasons:
            state.retry_queue.remove(entry)
            state.admitted.append(sent_id)
            admitted.append(sentence)
            continue
        entry.attempt_count += 1
        entry.reason = ",".join(reasons)
        if entry.attempt_count >= state.max_attempts:
            state.retry_queue.remove(entry)
            dead.append({"sent_id": sent_id, "record": record if record is not None else raw,
                         "reasons": reasons, "attempts": entry.attempt_count})
    state.check()
    return RetryResult(admitted, state, dead)


def read_records(path: str | Path) -> list[str]:
    """Non-blank lines of a newline-delimited JSON file."""
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f if line.strip()]
