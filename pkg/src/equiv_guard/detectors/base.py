"""
detectors.base - The per-contract detection context and candidate verification.

Detectors only find candidates. `DetectionContext.confirm` turns a candidate
into a Finding: in static modes directly, in symbolic modes after guided
execution and a solver verdict.

    Reachable, required checks hold      -> Confirmed
    Reachable, a required check fails    -> dropped
    every entry explored, sink unreached -> dropped
    incomplete, budget or timeout        -> Likely
"""

import logging
import time
from collections import deque
from typing import Callable, Dict, List, Optional, Set

from equiv_guard.cfg.models import Cfg
from equiv_guard.detectors.models import BudgetEvent, Candidate, Confidence, Finding
from equiv_guard.detectors.terms import Terms
from equiv_guard.errors import BudgetExhausted, PerContractTimeout
from equiv_guard.ingest.models import AstKind, CompilationArtifact
from equiv_guard.ipdg.models import EdgeKind, FunctionInfo, Ipdg, IpdgNode, StmtKind
from equiv_guard.models import AnalysisMode, Diagnostic, SourceRange
from equiv_guard.settings import AnalysisSettings, load_settings
from equiv_guard.symexec.executor import execute_path, guidance_from_path, storage_seeds
from equiv_guard.symexec.models import Divergence, VerdictStatus
from equiv_guard.symexec.verifier import verify
from equiv_guard.taint.engine import reverse_search
from equiv_guard.taint.models import TaintPath, TaintSpec

logger = logging.getLogger(__name__)

BOUNDARY_KINDS = frozenset({StmtKind.FUNCTION_ENTRY, StmtKind.FUNCTION_EXIT})


class DetectionContext:
    """Shared, read-only inputs of one contract plus the outputs detectors append to.

    Args:
        artifact: The compiled contract.
        ipdg: Its dependency graph.
        cfg: Its runtime control-flow graph.
        settings: Effective settings; `mode` decides sanitizers and verification.
        deadline: `time.monotonic()` value ending the per-contract budget.
    """

    def __init__(self, artifact: CompilationArtifact, ipdg: Ipdg, cfg: Optional[Cfg], settings: AnalysisSettings,
                 deadline: Optional[float] = None):
        self.artifact = artifact
        self.ipdg = ipdg
        self.cfg = cfg
        self.settings = settings
        self.mode: AnalysisMode = settings.mode
        self.deadline = deadline
        self.terms = Terms(ipdg)
        self.diagnostics: List[Diagnostic] = []
        self.budget_events: List[BudgetEvent] = []
        self.timings_ms: Dict[str, float] = {}
        self.libraries: Set[str] = {
            c.name for unit in artifact.ast_units for c in unit.find(AstKind.CONTRACT)
            if c.attr("contract_kind") == "library"
        }
        self._seeds: Optional[Dict[int, int]] = None

    # --- Shared lookups ---

    @property
    def contract(self) -> str:
        return self.artifact.contract_name

    def function(self, node: IpdgNode) -> Optional[FunctionInfo]:
        return self.ipdg.functions.get(node.function_key)

    def in_library(self, node: IpdgNode) -> bool:
        return node.contract in self.libraries

    def diagnose(self, code: str, message: str, location: Optional[SourceRange] = None) -> None:
        self.diagnostics.append(Diagnostic(phase="detect", code=code, message=message,
                                           contract=self.contract, location=location))

    def timed(self, phase: str, started: float) -> None:
        self.timings_ms[phase] = self.timings_ms.get(phase, 0.0) + (time.perf_counter() - started) * 1000

    def taint(self, spec: TaintSpec) -> List[TaintPath]:
        started = time.perf_counter()
        try:
            return reverse_search(self.ipdg, spec, depth_bound=self.settings.taint_depth_bound,
                                  path_cap=self.settings.path_cap, sanitize=self.mode.sanitizers,
                                  diagnostics=self.diagnostics)
        finally:
            self.timed("taint", started)

    def witness(self, spec: TaintSpec, sink: int) -> TaintPath:
        """The best taint path ending at `sink`, or the sink alone when none reaches it."""
        paths = [p for p in self.taint(spec) if p.sink == sink]
        paths.sort(key=lambda p: (not p.suspicious, p.low_confidence, len(p.nodes)))
        return paths[0] if paths else TaintPath(smell=spec.smell, nodes=(sink,))

    def guarded_statement(self, branch: int) -> Optional[SourceRange]:
        """Range of the first statement of the same function that `branch` controls."""
        owner = self.ipdg.nodes[branch].function_key
        controlled = [self.ipdg.nodes[e.target] for e in self.ipdg.out_edges(branch, {EdgeKind.CONTROL})]
        controlled = [n for n in controlled if n.function_key == owner and n.stmt_kind not in BOUNDARY_KINDS
                      and n.order > self.ipdg.nodes[branch].order]
        if not controlled:
            return None
        return min(controlled, key=lambda n: n.order).src

    def over_budget(self) -> bool:
        return self.deadline is not None and time.monotonic() > self.deadline

    def check_budget(self) -> None:
        """Raises:
            PerContractTimeout: When the contract deadline has passed.
        """
        if self.over_budget():
            raise PerContractTimeout(self.contract, self.settings.timeout_s)

    # --- Entry points ---

    def _selector(self, info: FunctionInfo) -> Optional[str]:
        if info.selector:
            return info.selector
        signature = info.key.split(".", 1)[1]
        named = [f for f in self.artifact.abi if f.name == info.name]
        exact = [f for f in named if f.signature == signature]
        if exact:
            return exact[0].selector
        return named[0].selector if len(named) == 1 else None

    def entry_selectors(self, function_key: str) -> List[str]:
        """Selectors of externally callable functions that reach `function_key` by internal calls."""
        found: List[str] = []
        seen = {function_key}
        queue = deque([function_key])
        while queue:
            key = queue.popleft()
            info = self.ipdg.functions.get(key)
            if info is None:
                continue
            if info.externally_callable:
                selector = self._selector(info)
                if selector is not None and selector not in found:
                    found.append(selector)
            for edge in self.ipdg.in_edges(info.entry, {EdgeKind.CALL}):
                caller = self.ipdg.nodes[edge.source].function_key
                if caller not in seen:
                    seen.add(caller)
                    queue.append(caller)
        return found

    def seeds(self) -> Dict[int, int]:
        if self._seeds is None:
            self._seeds = storage_seeds(self.artifact, self.ipdg)
        return self._seeds

    # --- Findings ---

    def finding(self, candidate: Candidate, confidence: Confidence, verification: Optional[VerdictStatus] = None,
                checks: Optional[Dict[str, Optional[bool]]] = None, timed_out: bool = False) -> Finding:
        node = self.ipdg.nodes[candidate.node]
        line, column = self.artifact.line_col(candidate.location)
        info = self.function(node)
        return Finding(
            smell=candidate.smell,
            contract=self.contract,
            function=info.name if info is not None else node.function,
            primary_location=candidate.location,
            file=self.artifact.path_of(candidate.location.file_index),
            line=line,
            column=column,
            witness=candidate.witness,
            verification=verification,
            checks=checks or {},
            confidence=confidence,
            message=candidate.message,
            metadata=dict(candidate.metadata),
            timed_out=timed_out,
        )

    def _event(self, kind: str, candidate: Candidate, detail: str = "") -> None:
        self.budget_events.append(BudgetEvent(contract=self.contract, kind=kind, smell=candidate.smell, detail=detail))

    def confirm(self, candidate: Candidate) -> Optional[Finding]:
        """Verify one candidate according to the analysis mode; None drops it."""
        if not self.mode.symbolic:
            return self.finding(candidate, Confidence.STATIC)
        if self.cfg is None:
            return self.finding(candidate, Confidence.LIKELY)
        try:
            self.check_budget()
        except PerContractTimeout as exc:
            self._event("contract-timeout", candidate, str(exc))
            return self.finding(candidate, Confidence.LIKELY, timed_out=True)
        selectors = self.entry_selectors(candidate.function_key)
        if not selectors:
            self.diagnose("no-entry-point", f"{candidate.function_key} is not reachable from a public function",
                          candidate.location)
            return self.finding(candidate, Confidence.LIKELY)
        guidance = guidance_from_path(candidate.witness, self.ipdg, candidate.target or candidate.location)
        complete = True
        for selector in selectors:
            started = time.perf_counter()
            try:
                outcome = execute_path(
                    self.cfg, selector, guidance, source_map=self.artifact.source_map,
                    code=self.artifact.deployed_bytecode, unroll=self.settings.unroll,
                    max_steps=self.settings.max_steps, deadline=self.deadline,
                    use_guidance=self.mode == AnalysisMode.FULL, seeds=self.seeds(),
                    solver_timeout_s=self.settings.solver_timeout_s, contract=self.contract,
                    diagnostics=self.diagnostics)
            except BudgetExhausted as exc:
                timed_out = self.over_budget()
                self._event("contract-timeout" if timed_out else "symexec-budget", candidate,
                            f"{exc.states} states")
                return self.finding(candidate, Confidence.LIKELY, timed_out=timed_out)
            finally:
                self.timed("symexec", started)
            if isinstance(outcome, Divergence):
                complete = complete and outcome.complete
                continue
            started = time.perf_counter()
            try:
                verdict = verify(outcome, candidate.checks, self.settings.solver_timeout_s, self.settings.solver_path)
            finally:
                self.timed("solve", started)
            if verdict.status == VerdictStatus.UNKNOWN:
                self._event("solver-timeout", candidate)
                return self.finding(candidate, Confidence.LIKELY, VerdictStatus.UNKNOWN, verdict.checks)
            if verdict.status == VerdictStatus.UNREACHABLE:
                # only one state per selector is returned; other paths to the sink stay unexplored
                complete = False
                continue
            required = [verdict.checks.get(name) for name in candidate.required]
            if any(value is False for value in required):
                logger.info("%s at %s dropped: required check failed", candidate.smell.value, candidate.location)
                return None
            confidence = Confidence.CONFIRMED if all(value for value in required) else Confidence.LIKELY
            return self.finding(candidate, confidence, VerdictStatus.REACHABLE, verdict.checks)
        if complete:
            logger.info("%s at %s dropped: sink unreachable", candidate.smell.value, candidate.location)
            return None
        return self.finding(candidate, Confidence.LIKELY, VerdictStatus.UNKNOWN)

    def confirm_all(self, candidates: List[Candidate]) -> List[Finding]:
        return [f for f in (self.confirm(c) for c in candidates) if f is not None]


def run_detector(find: Callable[[DetectionContext], List[Candidate]], artifact: CompilationArtifact, ipdg: Ipdg,
                 cfg: Optional[Cfg], settings: Optional[AnalysisSettings] = None) -> List[Finding]:
    """Run one candidate finder on its own context and verify what it finds."""
    settings = settings or load_settings()
    deadline = time.monotonic() + settings.timeout_s if settings.mode.symbolic else None
    ctx = DetectionContext(artifact, ipdg, cfg, settings, deadline)
    return ctx.confirm_all(find(ctx))
