"""
detectors.pca - Phishing contract attacks: external calls to hardcoded addresses.

A router or token address is only meaningful on the chain it was deployed
to. On another chain the same address may hold nothing, or a contract
somebody deployed to impersonate it.
"""

import logging
from typing import List, Optional

from eth_utils import to_checksum_address

from equiv_guard.cfg.models import Cfg
from equiv_guard.detectors.base import DetectionContext, run_detector
from equiv_guard.detectors.models import Candidate, Finding
from equiv_guard.ingest.models import AstKind, AstNode, CompilationArtifact
from equiv_guard.ipdg.models import CallKind, Ipdg, IpdgNode
from equiv_guard.ipdg.queries import call_sites
from equiv_guard.models import Smell
from equiv_guard.settings import AnalysisSettings
from equiv_guard.symexec.verifier import CALL_TARGET_SYMBOLIC, CALLER_PERMISSION
from equiv_guard.taint.models import (
    LiteralClass,
    SanitizerKind,
    SanitizerPattern,
    SinkKind,
    SinkPattern,
    SourceKind,
    SourcePattern,
    TaintSpec,
)
from equiv_guard.taint.patterns import PRECOMPILE_MAX, SanitizerChecker

logger = logging.getLogger(__name__)

ADDRESS_LIMIT = 1 << 160
CODE_GUARD = SanitizerPattern(id="code-existence-guard", kind=SanitizerKind.CODE_EXISTENCE_GUARD)


def pca_spec(sink: int) -> TaintSpec:
    return TaintSpec(
        smell=Smell.PCA,
        sources=(SourcePattern(kind=SourceKind.LITERAL, literal=LiteralClass.ADDRESS),),
        sinks=(SinkPattern(kind=SinkKind.NODES, nodes=frozenset({sink})),),
        sanitizers=(CODE_GUARD,),
    )


def fixed_target(ctx: DetectionContext, node: IpdgNode, target: Optional[AstNode]) -> Optional[int]:
    """The address a call goes to when it folds to one hardcoded, non-precompile value."""
    terms = ctx.terms
    resolved = terms.resolve(node, target)
    if resolved is None:
        return None
    if resolved.kind == AstKind.LITERAL and resolved.attr("is_address"):
        value = resolved.attr("int_value")
    else:
        value = terms.constant(resolved)
    if value is None or not PRECOMPILE_MAX < value < ADDRESS_LIMIT:
        return None
    return value


def find_pca(ctx: DetectionContext) -> List[Candidate]:
    checker = SanitizerChecker(ctx.ipdg, ctx.settings.taint_depth_bound)
    candidates = []
    for node, call in call_sites(ctx.ipdg, lambda c: c.kind in (CallKind.EXTERNAL, CallKind.LOW_LEVEL)):
        value = fixed_target(ctx, node, call.target)
        if value is None:
            continue
        witness = ctx.witness(pca_spec(node.id), node.id)
        if ctx.mode.sanitizers and (not witness.suspicious or checker.hit(CODE_GUARD, [node.id]) is not None):
            logger.debug("call to %#x at %s guarded by a code-existence check", value, call.src)
            continue
        address = to_checksum_address(value.to_bytes(20, "big"))
        candidates.append(Candidate(
            smell=Smell.PCA, function_key=node.function_key, node=node.id, location=call.src,
            witness=witness,
            message=f"{call.name}() called on hardcoded address {address}",
            metadata={"address": address},
            checks=(CALL_TARGET_SYMBOLIC, CALLER_PERMISSION),
        ))
    return candidates


def detect_pca(artifact: CompilationArtifact, ipdg: Ipdg, cfg: Optional[Cfg],
               settings: Optional[AnalysisSettings] = None) -> List[Finding]:
    return run_detector(find_pca, artifact, ipdg, cfg, settings)
