"""Reproducible treebank tooling for OCR-derived Katharevousa text."""

__version__ = "0.1.0"
