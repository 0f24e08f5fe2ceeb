"""
report.models - The machine-readable report and evaluation statistics.

Both are plain pydantic models so `model_dump_json` is the wire format and
`model_json_schema` is the shipped schema.
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field, computed_field

from equiv_guard import __version__
from equiv_guard.detectors.models import BudgetEvent, ContractAnalysis, Finding
from equiv_guard.ingest.corpus import EntryFailure
from equiv_guard.ingest.models import CompilerSettings
from equiv_guard.models import Diagnostic, Smell

SCHEMA_VERSION = "1.0"
TOOL_NAME = "equiv-guard"


class InputDescriptor(BaseModel):
    """What was analysed."""
    path: Optional[str] = Field(default=None, description="Local file or directory")
    chain: Optional[str] = None
    address: Optional[str] = None
    manifest: Optional[str] = None


class Report(BaseModel):
    """One analysis run over one input or one corpus."""
    schema_version: str = SCHEMA_VERSION
    tool: str = TOOL_NAME
    tool_version: str = __version__
    input: InputDescriptor = Field(default_factory=InputDescriptor)
    mode: str = "full"
    compiler: CompilerSettings = Field(default_factory=CompilerSettings)
    contracts: List[ContractAnalysis] = Field(default_factory=list)
    diagnostics: List[Diagnostic] = Field(default_factory=list, description="Run-level, not tied to one contract")
    timings_ms: Dict[str, float] = Field(default_factory=dict, description="Summed over contracts, per phase")
    failures: List[EntryFailure] = Field(default_factory=list)

    @property
    def findings(self) -> List[Finding]:
        return sorted((f for c in self.contracts for f in c.findings), key=lambda f: f.sort_key)

    @property
    def budget_events(self) -> List[BudgetEvent]:
        return [e for c in self.contracts for e in c.budget_events]

    def add(self, analysis: ContractAnalysis) -> None:
        self.contracts.append(analysis)
        self.contracts.sort(key=lambda c: (c.source_path, c.contract))
        for phase, ms in analysis.timings_ms.items():
            self.timings_ms[phase] = self.timings_ms.get(phase, 0.0) + ms


class SmellStats(BaseModel):
    """Confusion counts for one smell. Undefined ratios are None."""
    smell: Smell
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @computed_field
    @property
    def sample_count(self) -> int:
        return self.tp + self.fp

    @computed_field
    @property
    def precision(self) -> Optional[float]:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else None

    @computed_field
    @property
    def recall(self) -> Optional[float]:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else None


class EvalStats(BaseModel):
    """Per-smell and overall detection quality over a labelled corpus."""
    per_smell: List[SmellStats] = Field(default_factory=list)
    entries: int = Field(default=0, description="Entries analysed; failed entries are excluded")
    failures: List[EntryFailure] = Field(default_factory=list)
    budget_counts: Dict[str, int] = Field(default_factory=dict, description="Budget event kind -> count")

    @computed_field
    @property
    def weighted_precision(self) -> Optional[float]:
        """Per-smell precision weighted by the number of reports of that smell."""
        scored = [s for s in self.per_smell if s.precision is not None]
        total = sum(s.sample_count for s in scored)
        if not total:
            return None
        return sum(s.precision * s.sample_count for s in scored) / total

    @computed_field
    @property
    def recall(self) -> Optional[float]:
        tp = sum(s.tp for s in self.per_smell)
        fn = sum(s.fn for s in self.per_smell)
        return tp / (tp + fn) if tp + fn else None

    def of(self, smell: Smell) -> SmellStats:
        for stats in self.per_smell:
            if stats.smell == smell:
                return stats
        raise KeyError(smell)
