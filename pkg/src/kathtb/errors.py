"""Exception types shared across the toolkit.

Every error carries a stable ``code`` string so callers (and the CLI) can
branch on it without parsing messages.
"""

from __future__ import annotations


class KathError(Exception):
    code = "ERROR"

    def __init__(self, message: str, *, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ConlluError(KathError):
    code = "BAD_FIELD_COUNT"


class SchemaError(KathError):
    code = "SCHEMA_PARSE_ERROR"


class SnapshotError(KathError):
    code = "SNAPSHOT_ERROR"

    def __init__(self, message: str, *, code: str | None = None, sent_ids=()):
        super().__init__(message, code=code)
        self.sent_ids = list(sent_ids)


class AlignmentError(KathError):
    code = "ALIGNMENT_MISMATCH"

    def __init__(self, message: str, *, sentence_index: int, sent_id: str | None,
                 position: int | None = None):
        super().__init__(message)
        self.sentence_index = sentence_index
        self.sent_id = sent_id
        self.position = position


class TrainingError(KathError):
    code = "EMPTY_TRAINING_SET"


class ModelFormatError(KathError):
    code = "BAD_MODEL_FILE"


class IngestError(KathError):
    code = "STATE_CORRUPT"
