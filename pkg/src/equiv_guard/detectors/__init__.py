"""The six smell detectors, their verification and the per-contract runner."""

from equiv_guard.detectors.base import DetectionContext, run_detector
from equiv_guard.detectors.bhm import detect_bhm
from equiv_guard.detectors.ccra import detect_ccra
from equiv_guard.detectors.fgr import detect_fgr
from equiv_guard.detectors.gli import detect_gli
from equiv_guard.detectors.models import BudgetEvent, Candidate, Confidence, ContractAnalysis, Finding
from equiv_guard.detectors.pca import detect_pca
from equiv_guard.detectors.runner import FINDERS, analyze_contract, run_all
from equiv_guard.detectors.tdt import detect_tdt

__all__ = [
    "BudgetEvent",
    "Candidate",
    "Confidence",
    "ContractAnalysis",
    "DetectionContext",
    "FINDERS",
    "Finding",
    "analyze_contract",
    "detect_bhm",
    "detect_ccra",
    "detect_fgr",
    "detect_gli",
    "detect_pca",
    "detect_tdt",
    "run_all",
    "run_detector",
]
