"""
ipdg.queries - Read-only questions asked of a finished graph.
"""

import logging
import operator
from typing import Callable, Dict, Iterable, List, Optional, Set

import networkx as nx

from equiv_guard.errors import PathBudgetExceeded
from equiv_guard.ingest.models import AstKind, AstNode
from equiv_guard.ipdg.models import CallKind, CallSite, EdgeKind, Ipdg, IpdgNode, StmtKind, VariableKind

logger = logging.getLogger(__name__)

WORD = 1 << 256
MASK = WORD - 1

_BINARY: Dict[str, Callable[[int, int], Optional[int]]] = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "/": lambda a, b: a // b if b else None,
    "%": lambda a, b: a % b if b else None,
    "**": lambda a, b: pow(a, b, WORD),
    "<<": lambda a, b: a << b if b < 256 else 0,
    ">>": operator.rshift,
    "&": operator.and_,
    "|": operator.or_,
    "^": operator.xor,
}

PATH_EDGE_KINDS = frozenset({EdgeKind.DATA, EdgeKind.CONTROL, EdgeKind.CALL, EdgeKind.RETURN})


# --- Constants ---

class _Folder:
    """Folds constant initializers, following references to other constants."""

    def __init__(self, ipdg: Ipdg, candidates: Dict[str, AstNode]):
        self.ipdg = ipdg
        self.candidates = candidates
        self.by_decl_id = {
            ipdg.nodes[ipdg.state_vars[name]].ast.node_id: name
            for name in ipdg.state_vars if ipdg.nodes[ipdg.state_vars[name]].ast is not None
        }
        self.values: Dict[str, Optional[int]] = {}
        self.active: Set[str] = set()

    def value_of(self, name: str) -> Optional[int]:
        if name in self.values:
            return self.values[name]
        if name in self.active or name not in self.candidates:
            return None
        self.active.add(name)
        try:
            value = self.fold(self.candidates[name])
        finally:
            self.active.discard(name)
        self.values[name] = value
        return value

    def fold(self, expr: Optional[AstNode]) -> Optional[int]:
        if expr is None:
            return None
        kind = expr.kind
        if kind == AstKind.LITERAL:
            value = expr.attr("int_value")
            return value & MASK if value is not None and expr.attr("literal_kind") == "number" else None
        if kind == AstKind.IDENTIFIER:
            name = self.by_decl_id.get(expr.attr("referenced_declaration"))
            return self.value_of(name) if name is not None else None
        if kind == AstKind.TUPLE and len(expr.children) == 1:
            return self.fold(expr.children[0])
        if kind == AstKind.FUNCTION_CALL and expr.attr("call_kind") == "typeConversion":
            args = expr.children_with("arg")
            return self.fold(args[0]) if len(args) == 1 else None
        if kind == AstKind.UNARY and expr.attr("operator") == "-":
            value = self.fold(expr.child("operand"))
            return (-value) & MASK if value is not None else None
        if kind == AstKind.BINARY and expr.attr("operator") in _BINARY:
            left, right = self.fold(expr.child("left")), self.fold(expr.child("right"))
            if left is None or right is None:
                return None
            result = _BINARY[expr.attr("operator")](left, right)
            return result & MASK if result is not None else None
        return None


def _writers(ipdg: Ipdg, name: str) -> List[IpdgNode]:
    return [n for n in ipdg.nodes.values() if name in n.writes and n.id != ipdg.state_vars[name]]


def _constructor_literal(ipdg: Ipdg, writer: IpdgNode, name: str) -> Optional[AstNode]:
    info = ipdg.functions.get(writer.function_key)
    if info is None or not info.is_constructor or writer.ast is None:
        return None
    expr = writer.ast.child("expr")
    if expr is None or expr.kind != AstKind.ASSIGNMENT or expr.attr("operator") != "=":
        return None
    lhs = expr.child("lhs")
    if lhs is None or lhs.kind != AstKind.IDENTIFIER or lhs.name != ipdg.variables[name].name:
        return None
    return expr.child("rhs")


def constants_of(ipdg: Ipdg) -> Dict[str, int]:
    """Compile-time values of constant state and file-level variables.

    Covers `constant` and `immutable` declarations plus ordinary state
    variables initialized at declaration and never written anywhere else.
    An immutable assigned once in the constructor counts when the assigned
    expression folds to a value.

    Args:
        ipdg: A finished graph.

    Returns:
        Qualified variable name -> 256-bit value.
    """
    candidates: Dict[str, AstNode] = {}
    for name, decl_node in ipdg.state_vars.items():
        decl = ipdg.nodes[decl_node].ast
        if decl is None:
            continue
        init = decl.child("init")
        mutability = ipdg.variables[name].mutability
        writers = _writers(ipdg, name)
        if init is not None and not writers:
            candidates[name] = init
        elif init is None and mutability == "immutable" and len(writers) == 1:
            rhs = _constructor_literal(ipdg, writers[0], name)
            if rhs is not None:
                candidates[name] = rhs
    folder = _Folder(ipdg, candidates)
    constants = {}
    for name in sorted(candidates):
        value = folder.value_of(name)
        if value is not None:
            constants[name] = value
    return constants


# --- Paths ---

def _projection(ipdg: Ipdg) -> nx.DiGraph:
    projected = nx.DiGraph()
    projected.add_nodes_from(ipdg.graph.nodes)
    for u, v, data in ipdg.graph.edges(data=True):
        if data["kind"] in PATH_EDGE_KINDS:
            projected.add_edge(u, v)
    return projected


def paths_between(ipdg: Ipdg, sources: Iterable[int], targets: Iterable[int], max_len: int,
                  cap: int = 10_000) -> List[List[int]]:
    """All simple paths from any source to any target.

    Args:
        ipdg: The graph.
        sources: Start node ids.
        targets: End node ids.
        max_len: Longest path, in edges.
        cap: Most paths enumerated before giving up.

    Returns:
        Node-id paths in lexicographic order. A node that is both a source and
        a target contributes the zero-length path `[node]`.

    Raises:
        PathBudgetExceeded: More than `cap` paths exist.
    """
    graph = _projection(ipdg)
    found: List[List[int]] = []
    for s in sorted(set(sources)):
        for t in sorted(set(targets)):
            if s == t:
                found.append([s])
            elif s in graph and t in graph:
                for path in nx.all_simple_paths(graph, s, t, cutoff=max_len):
                    found.append(list(path))
                    if len(found) > cap:
                        raise PathBudgetExceeded(len(found))
    return sorted(found)


# --- Lookups used by the detectors ---

def call_sites(ipdg: Ipdg, predicate: Callable[[CallSite], bool]) -> List[tuple]:
    """(node, call) pairs whose call matches `predicate`, in node order."""
    return [(node, call) for nid, node in sorted(ipdg.nodes.items()) for call in node.calls if predicate(call)]


def env_readers(ipdg: Ipdg, env: str) -> List[IpdgNode]:
    return [node for _, node in sorted(ipdg.nodes.items()) if env in node.env_reads]


def writable_outside_constructor(ipdg: Ipdg, name: str) -> bool:
    """True when some non-constructor function writes `name`."""
    for node in ipdg.nodes.values():
        if name not in node.writes or node.stmt_kind == StmtKind.STATE_VAR_DECL:
            continue
        info = ipdg.functions.get(node.function_key)
        if info is not None and not info.is_constructor:
            return True
    return False


def is_state(ipdg: Ipdg, name: str) -> bool:
    info = ipdg.variables.get(name)
    return info is not None and info.kind in (VariableKind.STATE, VariableKind.CONSTANT)


def interaction_calls(node: IpdgNode) -> List[CallSite]:
    """Value-moving external interactions in a statement."""
    return [c for c in node.calls
            if c.kind in (CallKind.TRANSFER, CallKind.SEND) or (c.kind == CallKind.LOW_LEVEL and c.sends_value)]


def data_closure(ipdg: Ipdg, node_id: int, depth_bound: int = 64) -> Set[int]:
    """Nodes whose values flow into `node_id` over Data, Call and Return edges.

    Inline-assembly nodes are not entered.
    """
    kinds = {EdgeKind.DATA, EdgeKind.CALL, EdgeKind.RETURN}
    seen = {node_id}
    frontier = [node_id]
    for _ in range(depth_bound):
        following = []
        for current in frontier:
            for edge in ipdg.in_edges(current, kinds):
                if edge.source not in seen and not ipdg.nodes[edge.source].opaque:
                    seen.add(edge.source)
                    following.append(edge.source)
        if not following:
            break
        frontier = following
    return seen
