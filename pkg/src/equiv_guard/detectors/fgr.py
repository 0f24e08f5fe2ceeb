"""
detectors.fgr - Fixed-gas reentrancy: transfer()/send() before the state they depend on is updated.

The 2300 gas stipend only prevents reentry while opcode prices stay the
same; a chain with cheaper storage opcodes lets the recipient re-enter.
Low-level calls carrying value are reported as diagnostics instead, since
their gas is not fixed.
"""

import logging
from collections import defaultdict
from typing import Dict, List, Optional, Set

from equiv_guard.cfg.models import Cfg
from equiv_guard.detectors.base import DetectionContext, run_detector
from equiv_guard.detectors.models import Candidate, Finding
from equiv_guard.ingest.models import CompilationArtifact
from equiv_guard.ipdg.models import CallKind, Ipdg
from equiv_guard.models import Smell
from equiv_guard.settings import AnalysisSettings
from equiv_guard.taint.cei import cei_violations
from equiv_guard.taint.models import TaintPath

logger = logging.getLogger(__name__)

STIPEND_CALLS = (CallKind.TRANSFER, CallKind.SEND)


def find_fgr(ctx: DetectionContext) -> List[Candidate]:
    ipdg = ctx.ipdg
    candidates = []
    for key in sorted(ipdg.functions):
        written: Dict[int, Set[str]] = defaultdict(set)
        for violation in cei_violations(ipdg, key):
            written[violation.interaction] |= set(violation.variables)
        for nid in sorted(written):
            node = ipdg.nodes[nid]
            variables = sorted(written[nid])
            stipend = [c for c in node.calls if c.kind in STIPEND_CALLS]
            if not stipend:
                ctx.diagnose("cei-violation-low-level",
                             f"{node.function} writes {', '.join(variables)} after a value-carrying call",
                             node.src)
                continue
            for call in stipend:
                candidates.append(Candidate(
                    smell=Smell.FGR, function_key=key, node=nid, location=call.src,
                    witness=TaintPath(smell=Smell.FGR, nodes=(nid,)),
                    message=f"{call.name}() runs before {', '.join(variables)} is updated",
                    metadata={"variables": variables},
                ))
    return candidates


def detect_fgr(artifact: CompilationArtifact, ipdg: Ipdg, cfg: Optional[Cfg],
               settings: Optional[AnalysisSettings] = None) -> List[Finding]:
    return run_detector(find_fgr, artifact, ipdg, cfg, settings)
