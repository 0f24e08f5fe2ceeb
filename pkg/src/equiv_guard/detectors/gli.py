"""
detectors.gli - Gas-limit imbalance: control flow decided by `gasleft()` against a fixed amount.
"""

import logging
from typing import List, Optional

from equiv_guard.cfg.models import Cfg
from equiv_guard.detectors.base import DetectionContext, run_detector
from equiv_guard.detectors.models import Candidate, Finding
from equiv_guard.detectors.terms import Terms, branch_comparisons, is_gasleft, sides
from equiv_guard.ingest.models import AstNode, CompilationArtifact
from equiv_guard.ipdg.models import Ipdg, IpdgNode
from equiv_guard.models import Smell
from equiv_guard.settings import AnalysisSettings
from equiv_guard.taint.models import SinkKind, SinkPattern, SourceKind, SourcePattern, TaintSpec

logger = logging.getLogger(__name__)


def gas_constant(terms: Terms, node: IpdgNode, cmp: AstNode) -> Optional[int]:
    for side, other, _ in sides(cmp):
        if is_gasleft(terms.resolve(node, side)):
            value = terms.constant(terms.resolve(node, other))
            if value is not None:
                return value
    return None


def find_gli(ctx: DetectionContext) -> List[Candidate]:
    candidates = []
    for node, cmp in branch_comparisons(ctx.ipdg):
        value = gas_constant(ctx.terms, node, cmp)
        if value is None:
            continue
        spec = TaintSpec(
            smell=Smell.GLI,
            sources=(SourcePattern(kind=SourceKind.ENV_READ, env=frozenset({"gasleft"})),),
            sinks=(SinkPattern(kind=SinkKind.NODES, nodes=frozenset({node.id})),),
        )
        candidates.append(Candidate(
            smell=Smell.GLI, function_key=node.function_key, node=node.id, location=cmp.src,
            target=ctx.guarded_statement(node.id),
            witness=ctx.witness(spec, node.id),
            message=f"{node.stmt_kind.value.lower()} decided by gasleft() against fixed {value} gas",
            metadata={"gas_constant": value},
        ))
    return candidates


def detect_gli(artifact: CompilationArtifact, ipdg: Ipdg, cfg: Optional[Cfg],
               settings: Optional[AnalysisSettings] = None) -> List[Finding]:
    return run_detector(find_gli, artifact, ipdg, cfg, settings)
