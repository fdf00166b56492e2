"""Annotation schema: label inventories plus the Katharevousa sidecar fields."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .errors import SchemaError

UD_UPOS = frozenset({
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
})

UD_DEPRELS = frozenset({
    "acl", "advcl", "advmod", "amod", "appos", "aux", "case", "cc", "ccomp",
    "clf", "compound", "conj", "cop", "csubj", "dep", "det", "discourse",
    "dislocated", "expl", "fixed", "flat", "goeswith", "iobj", "list", "mark",
    "nmod", "nsubj", "nummod", "obj", "obl", "orphan", "parataxis", "punct",
    "reparandum", "root", "vocative", "xcomp",
})


@dataclass(frozen=True)
class SidecarField:
    name: str
    allowed_values: frozenset[str] | None = None  # None means free text

    @property
    def free_text(self) -> bool:
        return self.allowed_values is None

    def accepts(self, value: str) -> bool:
        if not isinstance(value, str) or not value or any(c in value for c in "|\t\n="):
            return False
        return self.free_text or value in self.allowed_values


@dataclass(frozen=True)
class AnnotationSchema:
    upos_set: frozenset[str]
    deprel_set: frozenset[str]
    sidecar_fields: tuple[SidecarField, ...] = ()
    schema_version: str = "0"

    def __post_init__(self):
        if not self.upos_set or not self.deprel_set:
            raise SchemaError("label sets must be non-empty", code="EMPTY_LABEL_SET")
        names = [f.name for f in self.sidecar_fields]
        if len(names) != len(set(names)):
            raise SchemaError("duplicate sidecar field name")

    def sidecar(self, name: str) -> SidecarField | None:
        for f in self.sidecar_fields:
            if f.name == name:
                return f
        return None


def _label_set(doc: dict, key: str, default=None) -> frozenset[str]:
    if key not in doc or doc[key] is None:
        if default is not None:
            return default
        raise SchemaError(f"missing label set {key!r}", code="EMPTY_LABEL_SET")
    values = doc[key]
    if not isinstance(values, list) or not all(isinstance(v, str) and v for v in values):
        raise SchemaError(f"{key!r} must be a list of non-empty strings")
    if not values:
        raise SchemaError(f"label set {key!r} is empty", code="EMPTY_LABEL_SET")
    return frozenset(values)


def parse_schema(text: str) -> AnnotationSchema:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError(f"cannot parse schema: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise SchemaError("schema document must be a mapping")

    upos = _label_set(doc, "upos", default=UD_UPOS)
    deprel = _label_set(doc, "deprel")

    sidecars = []
    for entry in doc.get("sidecar_fields") or []:
        if not isinstance(entry, dict) or not isinstance(entry.get("name"), str):
            raise SchemaError(f"bad sidecar entry: {entry!r}")
        values = entry.get("values")
        if entry.get("free_text"):
            allowed = None
        elif isinstance(values, list) and values and all(isinstance(v, str) for v in values):
            allowed = frozenset(values)
        else:
            raise SchemaError(f"sidecar {entry['name']!r} needs 'values' or 'free_text: true'")
        sidecars.append(SidecarField(entry["name"], allowed))

    return AnnotationSchema(
        upos_set=upos,
        deprel_set=deprel,
        sidecar_fields=tuple(sidecars),
        schema_version=str(doc.get("schema_version", "0")),
    )


def load_schema(path: str | Path) -> AnnotationSchema:
    """Load a YAML schema file; ``upos`` falls back to the 17 UD v2 tags."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise SchemaError(f"cannot read schema {path}: {exc}") from exc
    return parse_schema(text)


def default_schema() -> AnnotationSchema:
    text = resources.files("kathtb").joinpath("data/annotation_schema.yaml").read_text("utf-8")
    return parse_schema(text)
