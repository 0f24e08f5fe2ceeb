"""
taint.models - Pattern-parameterized taint specifications and their results.

Patterns are plain data; matching lives in `taint.patterns` so a spec can be
serialized into reports and compared across runs.
"""

from enum import Enum
from typing import FrozenSet, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from equiv_guard.models import Smell


class SourceKind(str, Enum):
    EXTERNAL_PARAMETER = "external-parameter"
    ENV_READ = "env-read"
    LITERAL = "literal"
    NODES = "nodes"


class LiteralClass(str, Enum):
    ADDRESS = "address"
    INTEGER = "integer"


class SinkKind(str, Enum):
    NAMED_CALL = "named-call"
    VALUE_TRANSFER = "value-transfer"
    EXTERNAL_CALL = "external-call"
    BRANCH_COMPARISON = "branch-comparison"
    NODES = "nodes"


class SanitizerKind(str, Enum):
    ENV_DEPENDENCE = "env-dependence"
    GUARDED_BY_ENV = "guarded-by-env"
    CODE_EXISTENCE_GUARD = "code-existence-guard"
    NODES = "nodes"


class SourcePattern(BaseModel):
    """Which nodes introduce taint."""
    model_config = ConfigDict(frozen=True)

    kind: SourceKind
    env: FrozenSet[str] = Field(default=frozenset(), description="For ENV_READ, e.g. {'block.number'}")
    literal: Optional[LiteralClass] = None
    min_value: int = Field(default=0, description="For LITERAL: smallest value that counts")
    nodes: FrozenSet[int] = frozenset()


class SinkPattern(BaseModel):
    """Which nodes are key instructions."""
    model_config = ConfigDict(frozen=True)

    kind: SinkKind
    names: FrozenSet[str] = Field(default=frozenset(), description="For NAMED_CALL, callee names")
    nodes: FrozenSet[int] = frozenset()


class SanitizerPattern(BaseModel):
    """A predicate over one path; when it holds the path is Sanitized."""
    model_config = ConfigDict(frozen=True)

    id: str
    kind: SanitizerKind
    env: FrozenSet[str] = frozenset()
    nodes: FrozenSet[int] = frozenset()


class TaintSpec(BaseModel):
    """Sources, sinks and sanitizers for one smell."""
    model_config = ConfigDict(frozen=True)

    smell: Smell
    sources: Tuple[SourcePattern, ...] = ()
    sinks: Tuple[SinkPattern, ...] = ()
    sanitizers: Tuple[SanitizerPattern, ...] = ()


class PathVerdict(str, Enum):
    SUSPICIOUS = "Suspicious"
    SANITIZED = "Sanitized"


class TaintPath(BaseModel):
    """A source-to-sink chain of I-PDG nodes."""
    model_config = ConfigDict(frozen=True)

    smell: Smell
    nodes: Tuple[int, ...] = Field(description="Node ids, source first, sink last")
    sanitizers_hit: Tuple[Tuple[str, int], ...] = Field(default=(), description="(sanitizer id, node id)")
    verdict: PathVerdict = PathVerdict.SUSPICIOUS
    low_confidence: bool = Field(default=False, description="Truncated by the depth bound")

    @property
    def source(self) -> int:
        return self.nodes[0]

    @property
    def sink(self) -> int:
        return self.nodes[-1]

    @property
    def suspicious(self) -> bool:
        return self.verdict == PathVerdict.SUSPICIOUS


class CeiViolation(BaseModel):
    """An interaction followed by a write to state it depended on."""
    model_config = ConfigDict(frozen=True)

    interaction: int
    effect: int
    variables: Tuple[str, ...]
