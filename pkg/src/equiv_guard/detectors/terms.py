"""
detectors.terms - Expression-level helpers shared by the detectors.
"""

import operator
from typing import Callable, Dict, Iterator, Optional, Tuple

from equiv_guard.ingest.models import AstKind, AstNode
from equiv_guard.ipdg.models import EdgeKind, Ipdg, IpdgNode
from equiv_guard.ipdg.queries import is_state
from equiv_guard.taint.patterns import BRANCH_KINDS, comparisons

MASK = (1 << 256) - 1
MAX_DEFINITION_HOPS = 3

_FOLDABLE: Dict[str, Callable[[int, int], Optional[int]]] = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "/": lambda a, b: a // b if b else None,
    "%": lambda a, b: a % b if b else None,
    "**": lambda a, b: pow(a, b, 1 << 256),
    "<<": lambda a, b: a << b if b < 256 else 0,
    ">>": operator.rshift,
}

# comparison operator with its operands swapped
MIRRORED = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "==": "==", "!=": "!="}


def strip(expr: Optional[AstNode]) -> Optional[AstNode]:
    """Drop parentheses and single-argument type conversions."""
    while expr is not None:
        if expr.kind == AstKind.TUPLE and len(expr.children) == 1:
            expr = expr.children[0]
        elif expr.kind == AstKind.FUNCTION_CALL and expr.attr("call_kind") == "typeConversion":
            args = expr.children_with("arg")
            if len(args) != 1:
                return expr
            expr = args[0]
        else:
            return expr
    return None


def is_env_member(expr: Optional[AstNode], base: str, member: str) -> bool:
    expr = strip(expr)
    if expr is None or expr.kind != AstKind.MEMBER_ACCESS or expr.attr("member_name") != member:
        return False
    owner = expr.child("base")
    return owner is not None and owner.kind == AstKind.IDENTIFIER and owner.name == base


def is_block_number(expr: Optional[AstNode]) -> bool:
    return is_env_member(expr, "block", "number")


def is_gasleft(expr: Optional[AstNode]) -> bool:
    expr = strip(expr)
    if expr is None or expr.kind != AstKind.FUNCTION_CALL:
        return False
    callee = expr.child("callee")
    return callee is not None and callee.kind == AstKind.IDENTIFIER and callee.name == "gasleft"


def branch_comparisons(ipdg: Ipdg) -> Iterator[Tuple[IpdgNode, AstNode]]:
    """(branch node, comparison) for every comparison controlling a branch or loop."""
    for nid in sorted(ipdg.nodes):
        node = ipdg.nodes[nid]
        if node.stmt_kind in BRANCH_KINDS:
            for cmp in comparisons(node.ast):
                yield node, cmp


def mentions(expr: Optional[AstNode], predicate: Callable[[AstNode], bool]) -> bool:
    return expr is not None and any(predicate(n) for n in expr.walk())


def sides(cmp: AstNode) -> Iterator[Tuple[AstNode, AstNode, str]]:
    """(side, other side, operator as seen from `side`) for both orientations."""
    op = cmp.attr("operator")
    left, right = cmp.child("left"), cmp.child("right")
    if left is None or right is None:
        return
    yield left, right, op
    yield right, left, MIRRORED.get(op, op)


class Terms:
    """Constant folding and definition lookup against one graph."""

    def __init__(self, ipdg: Ipdg):
        self.ipdg = ipdg
        self.state_by_decl: Dict[int, str] = {}
        for name, node_id in ipdg.state_vars.items():
            decl = ipdg.nodes[node_id].ast
            if decl is not None:
                self.state_by_decl[decl.node_id] = name

    def state_var(self, expr: Optional[AstNode]) -> Optional[str]:
        """Qualified name of the state variable an identifier or member access names."""
        expr = strip(expr)
        if expr is None or expr.kind not in (AstKind.IDENTIFIER, AstKind.MEMBER_ACCESS):
            return None
        return self.state_by_decl.get(expr.attr("referenced_declaration"))

    def constant(self, expr: Optional[AstNode]) -> Optional[int]:
        """Compile-time value of `expr`, following constant state variables."""
        expr = strip(expr)
        if expr is None:
            return None
        kind = expr.kind
        if kind == AstKind.LITERAL:
            value = expr.attr("int_value")
            return value & MASK if value is not None and expr.attr("literal_kind") == "number" else None
        if kind in (AstKind.IDENTIFIER, AstKind.MEMBER_ACCESS):
            name = self.state_var(expr)
            return self.ipdg.constants.get(name) if name is not None else None
        if kind == AstKind.UNARY and expr.attr("operator") == "-":
            value = self.constant(expr.child("operand"))
            return (-value) & MASK if value is not None else None
        if kind == AstKind.BINARY and expr.attr("operator") in _FOLDABLE:
            left, right = self.constant(expr.child("left")), self.constant(expr.child("right"))
            if left is None or right is None:
                return None
            result = _FOLDABLE[expr.attr("operator")](left, right)
            return result & MASK if result is not None else None
        return None

    def reads_mutable_state(self, expr: Optional[AstNode]) -> bool:
        """Whether `expr` reads a state variable that is not a compile-time constant."""
        def hit(n: AstNode) -> bool:
            name = self.state_by_decl.get(n.attr("referenced_declaration")) \
                if n.kind in (AstKind.IDENTIFIER, AstKind.MEMBER_ACCESS) else None
            return name is not None and name not in self.ipdg.constants
        return mentions(expr, hit)

    def definition(self, node: IpdgNode, expr: Optional[AstNode]) -> Optional[Tuple[IpdgNode, AstNode]]:
        """The expression a local identifier was last assigned, when exactly one definition reaches `node`."""
        expr = strip(expr)
        if expr is None or expr.kind != AstKind.IDENTIFIER or self.state_var(expr) is not None:
            return None
        suffix = f".{expr.name}"
        defs = {e.source for e in self.ipdg.in_edges(node.id, {EdgeKind.DATA})
                if e.variable and e.variable.endswith(suffix) and not is_state(self.ipdg, e.variable)}
        if len(defs) != 1:
            return None
        owner = self.ipdg.nodes[defs.pop()]
        stmt = owner.ast
        if stmt is None:
            return None
        if stmt.kind == AstKind.VARIABLE_STATEMENT and len(stmt.children_with("decl")) == 1:
            init = stmt.child("init")
            return (owner, init) if init is not None else None
        inner = stmt.child("expr")
        if inner is not None and inner.kind == AstKind.ASSIGNMENT and inner.attr("operator") == "=":
            return owner, inner.child("rhs")
        return None

    def resolve(self, node: IpdgNode, expr: Optional[AstNode]) -> Optional[AstNode]:
        """Follow single local definitions a few hops back from `node`."""
        current = strip(expr)
        for _ in range(MAX_DEFINITION_HOPS):
            found = self.definition(node, current)
            if found is None:
                break
            node, current = found[0], strip(found[1])
        return current
