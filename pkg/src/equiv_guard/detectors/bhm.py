"""
detectors.bhm - Block-height misalignment: branches on an absolute block number.

Heights like a hard-fork block are chain specific; the same number is in the
past on one chain and years away on another.
"""

import logging
from typing import List, Optional

from equiv_guard.cfg.models import Cfg
from equiv_guard.detectors.base import DetectionContext, run_detector
from equiv_guard.detectors.models import Candidate, Finding
from equiv_guard.detectors.tdt import block_number_spec
from equiv_guard.detectors.terms import Terms, branch_comparisons, is_block_number, sides
from equiv_guard.ingest.models import AstNode, CompilationArtifact
from equiv_guard.ipdg.models import Ipdg, IpdgNode
from equiv_guard.models import Smell
from equiv_guard.settings import AnalysisSettings
from equiv_guard.symexec.verifier import BRANCH_BOTH_SIDES

logger = logging.getLogger(__name__)


def height_of(terms: Terms, node: IpdgNode, cmp: AstNode) -> Optional[int]:
    """The constant `block.number` is compared against, when the other side folds completely."""
    for side, other, _ in sides(cmp):
        if is_block_number(terms.resolve(node, side)):
            value = terms.constant(terms.resolve(node, other))
            if value is not None:
                return value
    return None


def find_bhm(ctx: DetectionContext) -> List[Candidate]:
    threshold = ctx.settings.bhm_height_threshold
    candidates = []
    for node, cmp in branch_comparisons(ctx.ipdg):
        height = height_of(ctx.terms, node, cmp)
        if height is None or height < threshold:
            continue
        candidates.append(Candidate(
            smell=Smell.BHM, function_key=node.function_key, node=node.id, location=cmp.src,
            witness=ctx.witness(block_number_spec(node.id, Smell.BHM), node.id),
            message=f"branch on absolute block height {height}",
            metadata={"block_height": height},
            checks=(BRANCH_BOTH_SIDES,), required=(BRANCH_BOTH_SIDES,),
        ))
    return candidates


def detect_bhm(artifact: CompilationArtifact, ipdg: Ipdg, cfg: Optional[Cfg],
               settings: Optional[AnalysisSettings] = None) -> List[Finding]:
    return run_detector(find_bhm, artifact, ipdg, cfg, settings)
