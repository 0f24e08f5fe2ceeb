"""
taint.patterns - Matching of source, sink and sanitizer patterns against nodes and paths.
"""

import logging
from collections import deque
from typing import Dict, FrozenSet, Iterable, Optional, Sequence, Set

from equiv_guard.ingest.models import AstKind, AstNode
from equiv_guard.ipdg.models import CallKind, EdgeKind, Ipdg, IpdgNode, StmtKind
from equiv_guard.taint.models import (
    LiteralClass,
    SanitizerKind,
    SanitizerPattern,
    SinkKind,
    SinkPattern,
    SourceKind,
    SourcePattern,
)

logger = logging.getLogger(__name__)

COMPARISON_OPS = frozenset({"<", "<=", ">", ">=", "==", "!="})
BRANCH_KINDS = frozenset({StmtKind.IF, StmtKind.LOOP, StmtKind.REQUIRE})
FLOW_EDGES = frozenset({EdgeKind.DATA, EdgeKind.CALL, EdgeKind.RETURN})
PRECOMPILE_MAX = 9


def comparisons(expr: Optional[AstNode]) -> Iterable[AstNode]:
    if expr is None:
        return ()
    return (n for n in expr.walk() if n.kind == AstKind.BINARY and n.attr("operator") in COMPARISON_OPS)


def source_matches(ipdg: Ipdg, node: IpdgNode, pattern: SourcePattern) -> bool:
    kind = pattern.kind
    if kind == SourceKind.EXTERNAL_PARAMETER:
        info = ipdg.functions.get(node.function_key)
        return (node.stmt_kind == StmtKind.FUNCTION_ENTRY and info is not None
                and info.externally_callable and bool(info.params))
    if kind == SourceKind.ENV_READ:
        return bool(node.env_reads & pattern.env)
    if kind == SourceKind.LITERAL:
        for fact in node.literals:
            if pattern.literal == LiteralClass.ADDRESS:
                if fact.is_address and fact.value > PRECOMPILE_MAX:
                    return True
            elif fact.value >= pattern.min_value:
                return True
        return False
    return node.id in pattern.nodes


def sink_matches(node: IpdgNode, pattern: SinkPattern) -> bool:
    kind = pattern.kind
    if kind == SinkKind.NAMED_CALL:
        return any(c.name in pattern.names for c in node.calls)
    if kind == SinkKind.VALUE_TRANSFER:
        return any(c.kind in (CallKind.TRANSFER, CallKind.SEND) for c in node.calls)
    if kind == SinkKind.EXTERNAL_CALL:
        return any(c.kind in (CallKind.EXTERNAL, CallKind.LOW_LEVEL) for c in node.calls)
    if kind == SinkKind.BRANCH_COMPARISON:
        return node.stmt_kind in BRANCH_KINDS and any(True for _ in comparisons(node.ast))
    return node.id in pattern.nodes


def matching_nodes(ipdg: Ipdg, patterns: Sequence, matcher) -> Set[int]:
    return {nid for nid, node in ipdg.nodes.items() if any(matcher(node, p) for p in patterns)}


def _mentions_code_check(expr: Optional[AstNode]) -> bool:
    if expr is None:
        return False
    for n in expr.walk():
        if n.kind == AstKind.MEMBER_ACCESS and n.attr("member_name") in ("code", "codehash"):
            return True
        if n.kind == AstKind.IDENTIFIER and n.name in ("extcodesize", "isContract"):
            return True
        if n.kind == AstKind.MEMBER_ACCESS and n.attr("member_name") == "isContract":
            return True
    return False


class SanitizerChecker:
    """Evaluates sanitizer predicates over paths of one graph.

    Backward data closures are memoized per node, so checking many paths of
    the same graph stays linear in practice.
    """

    def __init__(self, ipdg: Ipdg, depth_bound: int = 64):
        self.ipdg = ipdg
        self.depth_bound = depth_bound
        self._env_closure: Dict[int, FrozenSet[str]] = {}

    def env_closure(self, node_id: int) -> FrozenSet[str]:
        """Env inputs any node in the backward data closure of `node_id` reads."""
        if node_id in self._env_closure:
            return self._env_closure[node_id]
        found: Set[str] = set()
        seen = {node_id}
        queue = deque([(node_id, 0)])
        while queue:
            current, depth = queue.popleft()
            found |= self.ipdg.nodes[current].env_reads
            if depth >= self.depth_bound:
                continue
            for edge in self.ipdg.in_edges(current, FLOW_EDGES):
                pred = edge.source
                if pred in seen or self.ipdg.nodes[pred].opaque:
                    continue
                seen.add(pred)
                queue.append((pred, depth + 1))
        result = frozenset(found)
        self._env_closure[node_id] = result
        return result

    def _guards(self, node_id: int) -> Iterable[IpdgNode]:
        for edge in self.ipdg.in_edges(node_id, {EdgeKind.CONTROL}):
            guard = self.ipdg.nodes[edge.source]
            if guard.stmt_kind in BRANCH_KINDS:
                yield guard

    def hit(self, pattern: SanitizerPattern, path: Sequence[int]) -> Optional[int]:
        """First node on `path` where `pattern` holds, or None."""
        for nid in path:
            if pattern.kind == SanitizerKind.NODES:
                if nid in pattern.nodes:
                    return nid
            elif pattern.kind == SanitizerKind.ENV_DEPENDENCE:
                if self.env_closure(nid) & pattern.env:
                    return nid
            elif pattern.kind == SanitizerKind.GUARDED_BY_ENV:
                if any(self.env_closure(g.id) & pattern.env for g in self._guards(nid)):
                    return nid
            elif pattern.kind == SanitizerKind.CODE_EXISTENCE_GUARD:
                if any(_mentions_code_check(g.ast) for g in self._guards(nid)):
                    return nid
        return None
