"""Reports, evaluation metrics, SARIF and text output, corpus runs."""

from equiv_guard.report.batch import CorpusRun, EntryResult, run_corpus
from equiv_guard.report.metrics import compute_stats, format_ratio
from equiv_guard.report.models import SCHEMA_VERSION, EvalStats, InputDescriptor, Report, SmellStats
from equiv_guard.report.sarif import emit_sarif
from equiv_guard.report.text import render_stats, render_text

__all__ = [
    "SCHEMA_VERSION",
    "CorpusRun",
    "EntryResult",
    "EvalStats",
    "InputDescriptor",
    "Report",
    "SmellStats",
    "compute_stats",
    "emit_sarif",
    "format_ratio",
    "render_stats",
    "render_text",
    "run_corpus",
]
