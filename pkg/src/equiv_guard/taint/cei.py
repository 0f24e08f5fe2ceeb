"""Check-Effect-Interaction ordering inside one function."""

import logging
from typing import List, Optional, Tuple

from equiv_guard.ipdg.models import CallKind, FunctionInfo, Ipdg, IpdgNode
from equiv_guard.ipdg.queries import interaction_calls, is_state
from equiv_guard.taint.models import CeiViolation

logger = logging.getLogger(__name__)


def _function(ipdg: Ipdg, function: str) -> Optional[FunctionInfo]:
    if function in ipdg.functions:
        return ipdg.functions[function]
    return ipdg.function_named(function)


def _effects(ipdg: Ipdg, node: IpdgNode) -> set:
    written = {v for v in node.writes if is_state(ipdg, v)}
    for call in node.calls:
        if call.kind == CallKind.INTERNAL and call.callee in ipdg.write_summaries:
            written |= ipdg.write_summaries[call.callee]
    return written


def cei_violations(ipdg: Ipdg, function: str) -> List[CeiViolation]:
    """Writes after an interaction to state that was read at or before it.

    An interaction is a transfer, a send or a low-level call carrying value.
    Writes made by internal callees count at their call site.
    """
    info = _function(ipdg, function)
    if info is None:
        return []
    stmts = [ipdg.nodes[n] for n in info.statements]
    found: List[CeiViolation] = []
    for i, node in enumerate(stmts):
        if not interaction_calls(node):
            continue
        read_before = set()
        for earlier in stmts[: i + 1]:
            read_before |= {v for v in earlier.reads if is_state(ipdg, v)}
        for later in stmts[i + 1:]:
            shared = _effects(ipdg, later) & read_before
            if shared:
                found.append(CeiViolation(interaction=node.id, effect=later.id, variables=tuple(sorted(shared))))
    return found


def check_cei_order(ipdg: Ipdg, function: str) -> List[Tuple[int, int]]:
    """(interaction node, later effect node) pairs; empty means CEI-compliant.

    Args:
        ipdg: A finished graph.
        function: Function key, or a bare function name.

    Returns:
        Violating pairs in statement order.
    """
    return [(v.interaction, v.effect) for v in cei_violations(ipdg, function)]
