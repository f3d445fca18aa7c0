"""Regex generation and evaluation for file-path, registry and command-line IOCs."""

from ._core import (
    ClassificationError,
    ConfigError,
    KnowledgeBaseError,
    RegexSyntaxError,
    Session,
    escape,
    search,
    similarity,
    structural_similarity,
)

__all__ = [
    "ClassificationError",
    "ConfigError",
    "KnowledgeBaseError",
    "RegexSyntaxError",
    "Session",
    "escape",
    "search",
    "similarity",
    "structural_similarity",
]
