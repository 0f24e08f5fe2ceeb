"""
detectors.runner - Build the graphs for one contract and run the enabled detectors over them.
"""

import logging
import time
from typing import Callable, Dict, Iterable, List, Optional

from equiv_guard.cfg.disassembler import strip_metadata
from equiv_guard.cfg.models import Cfg
from equiv_guard.cfg.resolver import build_cfg
from equiv_guard.detectors.base import DetectionContext
from equiv_guard.detectors.bhm import find_bhm
from equiv_guard.detectors.ccra import find_ccra
from equiv_guard.detectors.fgr import find_fgr
from equiv_guard.detectors.gli import find_gli
from equiv_guard.detectors.models import Candidate, ContractAnalysis, Finding
from equiv_guard.detectors.pca import find_pca
from equiv_guard.detectors.tdt import find_tdt
from equiv_guard.errors import EquivGuardError
from equiv_guard.ingest.models import CompilationArtifact
from equiv_guard.ipdg.builder import build_ipdg
from equiv_guard.models import ALL_SMELLS, AnalysisMode, Diagnostic, Smell
from equiv_guard.settings import AnalysisSettings, load_settings

logger = logging.getLogger(__name__)

FINDERS: Dict[Smell, Callable[[DetectionContext], List[Candidate]]] = {
    Smell.CCRA: find_ccra,
    Smell.TDT: find_tdt,
    Smell.PCA: find_pca,
    Smell.GLI: find_gli,
    Smell.FGR: find_fgr,
    Smell.BHM: find_bhm,
}


def _elapsed_ms(started: float) -> float:
    return (time.perf_counter() - started) * 1000


def recover_cfg(artifact: CompilationArtifact, settings: AnalysisSettings,
                diagnostics: List[Diagnostic]) -> Optional[Cfg]:
    """The runtime CFG, or None for contracts without code or with undecodable code."""
    if not artifact.deployed_bytecode:
        return None
    try:
        return build_cfg(strip_metadata(artifact.deployed_bytecode), settings.jump_target_bound,
                         artifact.contract_name)
    except EquivGuardError as exc:
        logger.warning("%s: CFG recovery failed: %s", artifact.contract_name, exc)
        diagnostics.append(Diagnostic(phase="cfg", code="cfg-failed", message=str(exc),
                                      contract=artifact.contract_name))
        return None


def analyze_contract(artifact: CompilationArtifact, settings: Optional[AnalysisSettings] = None) -> ContractAnalysis:
    """Run the whole pipeline after compilation for one contract.

    Args:
        artifact: The compiled contract.
        settings: Effective settings; `detectors` and `mode` select what runs.

    Returns:
        Findings sorted by (smell, file, offset) together with every
        diagnostic, per-phase timing and budget event of the run.
    """
    settings = settings or load_settings()
    started_run = time.monotonic()
    deadline = started_run + settings.timeout_s if settings.mode.symbolic else None
    diagnostics: List[Diagnostic] = []
    timings: Dict[str, float] = {}

    started = time.perf_counter()
    cfg = recover_cfg(artifact, settings, diagnostics) if settings.mode.symbolic else None
    timings["cfg"] = _elapsed_ms(started)
    if cfg is not None:
        diagnostics.extend(cfg.diagnostics)

    started = time.perf_counter()
    ipdg = build_ipdg([artifact])
    timings["ipdg"] = _elapsed_ms(started)
    diagnostics.extend(ipdg.diagnostics)

    ctx = DetectionContext(artifact, ipdg, cfg, settings, deadline)
    findings: List[Finding] = []
    for smell in ALL_SMELLS:
        if smell not in settings.detectors:
            continue
        findings.extend(ctx.confirm_all(FINDERS[smell](ctx)))
    findings.sort(key=lambda f: f.sort_key)

    diagnostics.extend(ctx.diagnostics)
    for phase, ms in ctx.timings_ms.items():
        timings[phase] = timings.get(phase, 0.0) + ms
    timed_out = any(event.kind == "contract-timeout" for event in ctx.budget_events)
    if timed_out:
        logger.warning("%s: exceeded %.0fs budget, partial results", artifact.contract_name, settings.timeout_s)
    logger.info("%s: %d findings in %.0f ms", artifact.contract_name, len(findings),
                (time.monotonic() - started_run) * 1000)
    return ContractAnalysis(
        contract=artifact.contract_name,
        source_path=artifact.source_path,
        findings=findings,
        diagnostics=diagnostics,
        timings_ms=timings,
        budget_events=ctx.budget_events,
        timed_out=timed_out,
    )


def run_all(artifact: CompilationArtifact, enabled: Iterable[Smell] = ALL_SMELLS,
            mode: AnalysisMode = AnalysisMode.FULL, settings: Optional[AnalysisSettings] = None) -> List[Finding]:
    """Findings of the enabled detectors, at most Static confidence when symbolic execution is off."""
    base = settings or load_settings()
    effective = base.model_copy(update={"detectors": list(enabled), "mode": mode})
    return analyze_contract(artifact, effective).findings
