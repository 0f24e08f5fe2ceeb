"""
cfg.models - Instructions, SSA values, basic blocks and the recovered CFG.

Blocks are identified by the byte offset of their first instruction. SSA
values are numbered per program; a block's stack inputs are lazy entry phis
`Phi(block, slot)` whose incoming values are filled in once predecessor edges
are known.
"""

from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from equiv_guard.cfg.opcodes import Opcode
from equiv_guard.models import Diagnostic


class Instruction(BaseModel):
    """One decoded instruction."""
    model_config = ConfigDict(frozen=True)

    offset: int
    index: int = Field(description="Position in the instruction stream, the source map key")
    opcode: Opcode
    immediate: Optional[bytes] = None
    stack_in: int = 0
    stack_out: int = 0

    @property
    def value(self) -> Optional[int]:
        if self.opcode == Opcode.PUSH0:
            return 0
        return int.from_bytes(self.immediate, "big") if self.immediate is not None else None

    @property
    def size(self) -> int:
        return 1 + (len(self.immediate) if self.immediate else 0)

    def __str__(self) -> str:
        if self.immediate is not None:
            return f"{self.offset:#06x} {self.opcode.name} 0x{self.immediate.hex()}"
        return f"{self.offset:#06x} {self.opcode.name}"


class ValueKind(str, Enum):
    CONST = "Constant"
    OP = "OpResult"
    PHI = "Phi"
    ENV = "EnvInput"


class SsaValue(BaseModel):
    """A single-assignment stack value."""

    id: int
    kind: ValueKind
    block: int = Field(description="Block that defines the value")
    offset: Optional[int] = Field(default=None, description="Defining instruction offset; None for phis")
    opcode: Optional[Opcode] = None
    operands: Tuple[int, ...] = ()
    constant: Optional[int] = None
    slot: Optional[int] = Field(default=None, description="Entry stack slot for phis (0 = top)")
    incoming: Dict[int, int] = Field(default_factory=dict, description="Phi: predecessor block -> value id")

    def __str__(self) -> str:
        if self.kind == ValueKind.CONST:
            return f"v{self.id}=0x{self.constant:x}"
        if self.kind == ValueKind.PHI:
            inc = ", ".join(f"b{b}:v{v}" for b, v in sorted(self.incoming.items()))
            return f"v{self.id}=phi[{self.slot}]({inc})"
        args = ", ".join(f"v{o}" for o in self.operands)
        return f"v{self.id}={self.opcode.name}({args})"


class TerminatorKind(str, Enum):
    JUMP = "Jump"
    JUMPI = "JumpI"
    FALLTHROUGH = "Fallthrough"
    STOP = "Stop"
    RETURN = "Return"
    REVERT = "Revert"
    SELFDESTRUCT = "SelfDestruct"
    INVALID = "Invalid"


class Resolution(str, Enum):
    RESOLVED = "ResolvedConstant"
    UNRESOLVED = "Unresolved"


class SsaBlock(BaseModel):
    """Per-block SSA form before jump resolution."""

    id: int
    instructions: List[Instruction]
    terminator: TerminatorKind
    target: Optional[int] = Field(default=None, description="Jump target value id")
    cond: Optional[int] = Field(default=None, description="JUMPI condition value id")
    phis: Dict[int, int] = Field(default_factory=dict, description="Entry slot -> phi value id")
    exit_stack: List[int] = Field(default_factory=list, description="Values above the untouched entry part, top last")
    consumed: int = Field(default=0, description="Entry slots materialized as phis")
    operands: Dict[int, Tuple[int, ...]] = Field(default_factory=dict, description="Instruction offset -> operand ids")
    results: Dict[int, int] = Field(default_factory=dict, description="Instruction offset -> result id")
    invalid_reason: Optional[str] = None

    @property
    def start(self) -> int:
        return self.instructions[0].offset

    @property
    def end(self) -> int:
        return self.instructions[-1].offset

    @property
    def next_offset(self) -> int:
        last = self.instructions[-1]
        return last.offset + last.size


class SsaProgram(BaseModel):
    """Output of `to_ssa`: blocks in offset order plus the value table."""

    blocks: Dict[int, SsaBlock]
    values: Dict[int, SsaValue]
    jumpdests: FrozenSet[int] = frozenset()
    next_id: int = 0

    def new_value(self, **fields) -> SsaValue:
        value = SsaValue(id=self.next_id, **fields)
        self.values[value.id] = value
        self.next_id += 1
        return value


class BasicBlock(BaseModel):
    """A recovered basic block."""

    id: int
    instr_range: Tuple[int, int]
    terminator: TerminatorKind
    target: Optional[int] = None
    cond: Optional[int] = None
    successors: List[int] = Field(default_factory=list)
    resolution: Optional[Resolution] = Field(default=None, description="Set for Jump/JumpI terminators")


Lattice = Union[None, FrozenSet[int], str]
TOP = "TOP"


class Cfg(BaseModel):
    """The recovered control-flow graph."""

    blocks: Dict[int, BasicBlock]
    entry: int = 0
    function_entries: Dict[str, int] = Field(default_factory=dict, description="0x selector -> block id")
    program: SsaProgram
    constants: Dict[int, Lattice] = Field(default_factory=dict, description="Value id -> folded constants")
    diagnostics: List[Diagnostic] = Field(default_factory=list)

    def successors(self, block: int) -> List[int]:
        return self.blocks[block].successors

    def predecessors(self, block: int) -> List[int]:
        return sorted(b.id for b in self.blocks.values() if block in b.successors)

    def instructions(self, block: int) -> List[Instruction]:
        return self.program.blocks[block].instructions

    def block_of(self, offset: int) -> Optional[int]:
        for bid in self.blocks:
            lo, hi = self.blocks[bid].instr_range
            if lo <= offset <= hi:
                return bid
        return None

    def all_instructions(self) -> List[Instruction]:
        return [i for bid in sorted(self.program.blocks) for i in self.program.blocks[bid].instructions]

    def has_unresolved(self) -> bool:
        return any(b.resolution == Resolution.UNRESOLVED for b in self.blocks.values())

    def constant_of(self, value_id: Optional[int]) -> Optional[int]:
        """The single folded constant of a value, if there is exactly one."""
        if value_id is None:
            return None
        lat = self.constants.get(value_id)
        if isinstance(lat, frozenset) and len(lat) == 1:
            return next(iter(lat))
        return None

    def to_dot(self) -> str:
        """Graphviz text: one node per block, one edge per line."""
        lines = ["digraph cfg {", "  node [shape=box fontname=monospace];"]
        for bid in sorted(self.blocks):
            body = "\\l".join(str(i) for i in self.instructions(bid)) + "\\l"
            lines.append(f'  b{bid} [label="{body}"];')
        for bid in sorted(self.blocks):
            for succ in self.blocks[bid].successors:
                lines.append(f"  b{bid} -> b{succ};")
        lines.append("}")
        return "\n".join(lines) + "\n"
