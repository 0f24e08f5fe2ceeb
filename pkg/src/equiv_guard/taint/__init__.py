"""Taint specifications, reverse path search and CEI ordering."""

from equiv_guard.taint.cei import cei_violations, check_cei_order
from equiv_guard.taint.engine import flow_graph, forward_closure, reverse_search, search_all
from equiv_guard.taint.models import (
    CeiViolation,
    LiteralClass,
    PathVerdict,
    SanitizerKind,
    SanitizerPattern,
    SinkKind,
    SinkPattern,
    SourceKind,
    SourcePattern,
    TaintPath,
    TaintSpec,
)

__all__ = [
    "CeiViolation",
    "LiteralClass",
    "PathVerdict",
    "SanitizerKind",
    "SanitizerPattern",
    "SinkKind",
    "SinkPattern",
    "SourceKind",
    "SourcePattern",
    "TaintPath",
    "TaintSpec",
    "cei_violations",
    "check_cei_order",
    "flow_graph",
    "forward_closure",
    "reverse_search",
    "search_all",
]
