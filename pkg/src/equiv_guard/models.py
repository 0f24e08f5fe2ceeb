"""Shared value types used across phases."""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class Smell(str, Enum):
    """The six EVM-inequivalent code smells."""
    CCRA = "CCRA"
    TDT = "TDT"
    PCA = "PCA"
    GLI = "GLI"
    FGR = "FGR"
    BHM = "BHM"

    @classmethod
    def parse(cls, text: str) -> "Smell":
        try:
            return cls(text.strip().upper())
        except ValueError:
            raise ValueError(f"unknown smell '{text}'") from None


ALL_SMELLS = tuple(Smell)


class AnalysisMode(str, Enum):
    """Which of the two filtering stages are switched on."""
    FULL = "full"
    STATIC_ONLY = "static-only"
    NO_GUIDANCE = "no-guidance"
    NEITHER = "neither"

    @property
    def symbolic(self) -> bool:
        return self in (AnalysisMode.FULL, AnalysisMode.NO_GUIDANCE)

    @property
    def sanitizers(self) -> bool:
        return self in (AnalysisMode.FULL, AnalysisMode.STATIC_ONLY)


class SourceRange(BaseModel):
    """A byte range inside one source unit, as solc reports it (`start:length:file`)."""
    model_config = ConfigDict(frozen=True)

    start: int = Field(description="Byte offset of the first character")
    length: int = Field(description="Length in bytes")
    file_index: int = Field(description="Source unit index; -1 marks compiler-generated code")

    @classmethod
    def parse(cls, text: str) -> "SourceRange":
        start, length, index = (int(part) for part in text.split(":")[:3])
        return cls(start=start, length=length, file_index=index)

    @property
    def end(self) -> int:
        return self.start + self.length

    @property
    def generated(self) -> bool:
        return self.file_index < 0

    def contains(self, other: "SourceRange") -> bool:
        return (
            self.file_index == other.file_index
            and self.start <= other.start
            and other.end <= self.end
        )

    def overlaps(self, other: "SourceRange") -> bool:
        return (
            self.file_index == other.file_index
            and self.start < other.end
            and other.start < self.end
        )

    def __str__(self) -> str:
        return f"{self.start}:{self.length}:{self.file_index}"


class Diagnostic(BaseModel):
    """A non-fatal observation recorded during analysis."""
    model_config = ConfigDict(frozen=True)

    phase: str = Field(description="Pipeline phase that emitted it (ingest, cfg, ipdg, taint, symexec, detect)")
    code: str = Field(description="Stable machine-readable code, e.g. 'unresolved-jump'")
    message: str
    contract: Optional[str] = None
    location: Optional[SourceRange] = None
    offset: Optional[int] = Field(default=None, description="Bytecode offset when relevant")
