"""Compiler driving, explorer fetching and corpus manifests."""

from equiv_guard.ingest.compiler import compile_sources, make_source_unit, select_version
from equiv_guard.ingest.corpus import normalize_corpus
from equiv_guard.ingest.explorer import ExplorerClient
from equiv_guard.ingest.models import (
    AstKind,
    AstNode,
    Chain,
    CompilationArtifact,
    ExplorerQuery,
    SourceUnit,
)

__all__ = [
    "AstKind",
    "AstNode",
    "Chain",
    "CompilationArtifact",
    "ExplorerClient",
    "ExplorerQuery",
    "SourceUnit",
    "compile_sources",
    "make_source_unit",
    "normalize_corpus",
    "select_version",
]
