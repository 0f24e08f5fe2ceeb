"""
detectors.models - Findings and the intermediate candidates detectors produce.
"""

from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

from equiv_guard.models import Diagnostic, Smell, SourceRange
from equiv_guard.symexec.models import VerdictStatus
from equiv_guard.taint.models import TaintPath


class Confidence(str, Enum):
    CONFIRMED = "Confirmed"
    LIKELY = "Likely"
    STATIC = "Static"


class Finding(BaseModel):
    """One reported smell instance."""

    smell: Smell
    contract: str
    function: str
    primary_location: SourceRange
    file: str
    line: int = Field(ge=1)
    column: int = Field(ge=1)
    witness: Optional[TaintPath] = Field(default=None, description="Source-to-sink chain of I-PDG node ids")
    verification: Optional[VerdictStatus] = Field(default=None, description="None when symbolic execution was off")
    checks: Dict[str, Optional[bool]] = Field(default_factory=dict)
    confidence: Confidence
    message: str
    metadata: Dict[str, Any] = Field(default_factory=dict)
    timed_out: bool = False

    @property
    def sort_key(self) -> Tuple[str, str, int]:
        return (self.smell.value, self.file, self.primary_location.start)


class Candidate(BaseModel):
    """A statically detected instance awaiting verification."""

    smell: Smell
    function_key: str
    node: int = Field(description="Sink statement node")
    location: SourceRange = Field(description="The expression to point at")
    target: Optional[SourceRange] = Field(default=None,
                                          description="Range symbolic execution must reach; defaults to location")
    witness: Optional[TaintPath] = None
    message: str
    metadata: Dict[str, Any] = Field(default_factory=dict)
    checks: Tuple[str, ...] = Field(default=(), description="Named symbolic checks to evaluate")
    required: Tuple[str, ...] = Field(default=(), description="Checks that must hold for Confirmed; False drops")


class BudgetEvent(BaseModel):
    """A timeout or bound hit, counted per ablation group in corpus runs."""

    contract: str
    kind: str = Field(description="'contract-timeout', 'symexec-budget', 'solver-timeout' or 'depth-bound'")
    smell: Optional[Smell] = None
    detail: str = ""


class ContractAnalysis(BaseModel):
    """Everything `analyze_contract` learned about one contract."""

    contract: str
    source_path: str
    findings: List[Finding] = Field(default_factory=list)
    diagnostics: List[Diagnostic] = Field(default_factory=list)
    timings_ms: Dict[str, float] = Field(default_factory=dict)
    budget_events: List[BudgetEvent] = Field(default_factory=list)
    timed_out: bool = False
