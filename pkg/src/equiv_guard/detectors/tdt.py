"""
detectors.tdt - Time-delay traps: waiting periods measured in blocks.

`block.number >= depositBlock[user] + BLOCKS_PER_WEEK` assumes one block
interval. On a chain with faster blocks the delay shrinks accordingly.
"""

import logging
from typing import List, Optional

from equiv_guard.cfg.models import Cfg
from equiv_guard.detectors.base import DetectionContext, run_detector
from equiv_guard.detectors.models import Candidate, Finding
from equiv_guard.detectors.terms import Terms, branch_comparisons, is_block_number, sides, strip
from equiv_guard.ingest.models import AstKind, AstNode, CompilationArtifact
from equiv_guard.ipdg.models import Ipdg, IpdgNode
from equiv_guard.models import Smell
from equiv_guard.settings import AnalysisSettings
from equiv_guard.taint.models import SinkKind, SinkPattern, SourceKind, SourcePattern, TaintSpec

logger = logging.getLogger(__name__)

NUMBER_ENV = frozenset({"block.number"})


def block_number_spec(sink: int, smell: Smell) -> TaintSpec:
    return TaintSpec(
        smell=smell,
        sources=(SourcePattern(kind=SourceKind.ENV_READ, env=NUMBER_ENV),),
        sinks=(SinkPattern(kind=SinkKind.NODES, nodes=frozenset({sink})),),
    )


def _offset(terms: Terms, node: IpdgNode, expr: Optional[AstNode]) -> Optional[int]:
    """C in `X + C` or `C + X` where X reads mutable state."""
    expr = strip(expr)
    if expr is None or expr.kind != AstKind.BINARY or expr.attr("operator") != "+":
        return None
    left, right = expr.child("left"), expr.child("right")
    for base, step in ((left, right), (right, left)):
        value = terms.constant(terms.resolve(node, step))
        if value is not None and terms.reads_mutable_state(terms.resolve(node, base)):
            return value
    return None


def interval_of(terms: Terms, node: IpdgNode, cmp: AstNode) -> Optional[int]:
    """The block interval a comparison waits for, if it has the interval shape.

    Recognized shapes, in either operand order:
        block.number <op> stored + C
        block.number - stored <op> C
    """
    for side, other, _ in sides(cmp):
        side, other = terms.resolve(node, side), terms.resolve(node, other)
        if is_block_number(side):
            value = _offset(terms, node, other)
            if value is not None:
                return value
        if side is not None and side.kind == AstKind.BINARY and side.attr("operator") == "-" \
                and is_block_number(terms.resolve(node, side.child("left"))) \
                and terms.reads_mutable_state(terms.resolve(node, side.child("right"))):
            value = terms.constant(other)
            if value is not None:
                return value
    return None


def find_tdt(ctx: DetectionContext) -> List[Candidate]:
    threshold = ctx.settings.tdt_interval_threshold
    candidates = []
    for node, cmp in branch_comparisons(ctx.ipdg):
        interval = interval_of(ctx.terms, node, cmp)
        if interval is None:
            continue
        if interval < threshold:
            logger.debug("interval %d at %s below threshold %d", interval, cmp.src, threshold)
            continue
        candidates.append(Candidate(
            smell=Smell.TDT, function_key=node.function_key, node=node.id, location=cmp.src,
            target=ctx.guarded_statement(node.id),
            witness=ctx.witness(block_number_spec(node.id, Smell.TDT), node.id),
            message=f"waiting period of {interval} blocks assumes this chain's block interval",
            metadata={"interval_blocks": interval},
        ))
    return candidates


def detect_tdt(artifact: CompilationArtifact, ipdg: Ipdg, cfg: Optional[Cfg],
               settings: Optional[AnalysisSettings] = None) -> List[Finding]:
    return run_detector(find_tdt, artifact, ipdg, cfg, settings)
