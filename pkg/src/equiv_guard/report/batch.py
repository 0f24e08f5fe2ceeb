"""
report.batch - Corpus runs: compile a manifest, analyse every contract, score against labels.

Contracts are analysed in a bounded process pool; report assembly happens
in the calling process in manifest order.
"""

import logging
import time
from concurrent.futures import Executor, ProcessPoolExecutor
from pathlib import Path
from typing import Callable, List, Optional, Tuple

from pydantic import BaseModel, Field

from equiv_guard.detectors.models import ContractAnalysis
from equiv_guard.detectors.runner import analyze_contract
from equiv_guard.errors import EquivGuardError
from equiv_guard.ingest.compiler import compile_sources
from equiv_guard.ingest.corpus import Compiler, EntryFailure, normalize_corpus
from equiv_guard.ingest.explorer import ExplorerClient
from equiv_guard.ingest.models import CompilationArtifact
from equiv_guard.models import Smell
from equiv_guard.report.metrics import compute_stats
from equiv_guard.report.models import EvalStats, InputDescriptor, Report
from equiv_guard.settings import AnalysisSettings

logger = logging.getLogger(__name__)


class EntryResult(BaseModel):
    name: str
    labels: List[Smell] = Field(default_factory=list)
    contracts: List[str] = Field(default_factory=list)
    wall_ms: float = 0.0
    timed_out: bool = False


class CorpusRun(BaseModel):
    report: Report
    stats: EvalStats
    entries: List[EntryResult] = Field(default_factory=list)


class _InlineExecutor:
    """Executor stand-in that runs jobs in the calling process (workers=1)."""

    def __init__(self, max_workers: int = 1):
        pass

    def map(self, fn, *iterables):
        return map(fn, *iterables)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def _analyze_job(job: Tuple[CompilationArtifact, AnalysisSettings]) -> Tuple[Optional[ContractAnalysis], float, str]:
    artifact, settings = job
    started = time.perf_counter()
    try:
        analysis = analyze_contract(artifact, settings)
        return analysis, (time.perf_counter() - started) * 1000, ""
    except EquivGuardError as exc:
        return None, (time.perf_counter() - started) * 1000, f"{type(exc).__name__}: {exc}"


def run_corpus(manifest_path: Path, settings: AnalysisSettings, client: Optional[ExplorerClient] = None,
               compiler: Compiler = compile_sources,
               executor: Optional[Callable[..., Executor]] = None) -> CorpusRun:
    """Analyse every manifest entry and compute EvalStats.

    Args:
        manifest_path: Corpus manifest.
        settings: Effective settings; `workers` bounds the pool.
        client: Explorer client for address entries.
        compiler: Compilation function; swapped out by tests.
        executor: Executor factory; defaults to a process pool, or in-process
            execution when `settings.workers` is 1.

    Returns:
        The combined report, the statistics and per-entry timings. Entries
        that fail to compile or analyse are listed and left out of the counts.

    Raises:
        ManifestParseError: The manifest itself is invalid.
    """
    load = normalize_corpus(manifest_path, settings, client=client, compiler=compiler)
    failures: List[EntryFailure] = list(load.failures)
    jobs = [(item.name, artifact) for item in load.items for artifact in item.artifacts]
    factory = executor or (ProcessPoolExecutor if settings.workers > 1 else _InlineExecutor)
    with factory(max_workers=settings.workers) as pool:
        outcomes = list(pool.map(_analyze_job, [(artifact, settings) for _, artifact in jobs]))

    report = Report(input=InputDescriptor(manifest=str(manifest_path)), mode=settings.mode.value)
    by_entry = {item.name: EntryResult(name=item.name, labels=item.labels) for item in load.items}
    findings = {item.name: [] for item in load.items}
    broken = set()
    for (name, artifact), (analysis, wall_ms, error) in zip(jobs, outcomes):
        entry = by_entry[name]
        entry.wall_ms += wall_ms
        if analysis is None:
            logger.warning("corpus entry %s: %s failed: %s", name, artifact.contract_name, error)
            broken.add(name)
            failures.append(EntryFailure(name=name, reason=f"{artifact.contract_name}: {error}"))
            continue
        entry.contracts.append(analysis.contract)
        entry.timed_out = entry.timed_out or analysis.timed_out
        findings[name].extend(analysis.findings)
        report.add(analysis)
        if report.compiler.version == "":
            report.compiler = artifact.settings
    report.failures = failures

    scored = [(item.name, item.labels, findings[item.name]) for item in load.items if item.name not in broken]
    stats = compute_stats(scored, smells=settings.detectors, failures=failures, budget_events=report.budget_events)
    entries = [by_entry[item.name] for item in load.items]
    return CorpusRun(report=report, stats=stats, entries=entries)
