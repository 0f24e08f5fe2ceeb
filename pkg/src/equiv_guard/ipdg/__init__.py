"""Inter-contract program dependency graph."""

from equiv_guard.ipdg.builder import IpdgBuilder, build_ipdg, reaching_definitions
from equiv_guard.ipdg.models import (
    CallKind,
    CallSite,
    EdgeKind,
    FunctionInfo,
    Ipdg,
    IpdgEdge,
    IpdgNode,
    StmtKind,
    VariableKind,
)
from equiv_guard.ipdg.queries import constants_of, data_closure, paths_between

__all__ = [
    "CallKind",
    "CallSite",
    "EdgeKind",
    "FunctionInfo",
    "Ipdg",
    "IpdgBuilder",
    "IpdgEdge",
    "IpdgNode",
    "StmtKind",
    "VariableKind",
    "build_ipdg",
    "constants_of",
    "data_closure",
    "paths_between",
    "reaching_definitions",
]
