"""
symexec.models - Symbolic words, memory, storage register, states and verdicts.

Words are 256-bit z3 bit-vector expressions. Environment inputs are named
constants (`CALLER`, `CHAINID`, ...). Calldata is one byte array, the
uninterpreted `calldata` function from offset to byte; keccak of non-constant
data is an uninterpreted function per input width, so equal arguments give
the identical application.
"""

from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field
from z3 import (
    BitVec,
    BitVecRef,
    BitVecSort,
    BitVecVal,
    BoolRef,
    Concat,
    Extract,
    Function,
    If,
    ULT,
    is_bv_value,
    simplify,
)

from equiv_guard.models import Diagnostic, SourceRange

WORD_BITS = 256
ENV_SYMBOLS = (
    "ADDRESS", "ORIGIN", "CALLER", "CALLVALUE", "CALLDATASIZE", "GASPRICE", "COINBASE", "TIMESTAMP",
    "NUMBER", "PREVRANDAO", "GASLIMIT", "CHAINID", "SELFBALANCE", "BASEFEE", "BLOBBASEFEE",
)


def word(value: int) -> BitVecRef:
    return BitVecVal(value % (1 << WORD_BITS), WORD_BITS)


def env_symbol(name: str) -> BitVecRef:
    return BitVec(name, WORD_BITS)


def concrete(expr: BitVecRef) -> Optional[int]:
    """The value of `expr` if it simplifies to a constant."""
    if is_bv_value(expr):
        return expr.as_long()
    reduced = simplify(expr)
    return reduced.as_long() if is_bv_value(reduced) else None


def keccak_function(bits: int) -> Function:
    return Function(f"keccak_{bits}", BitVecSort(bits), BitVecSort(WORD_BITS))


# --- Calldata ---

CALLDATA = Function("calldata", BitVecSort(WORD_BITS), BitVecSort(8))


def calldata_bytes(offset: BitVecRef, size: int) -> List[BitVecRef]:
    """`size` calldata bytes from `offset`; bytes past CALLDATASIZE read as zero."""
    size_symbol = env_symbol("CALLDATASIZE")
    out = []
    for i in range(size):
        at = simplify(offset + i)
        out.append(If(ULT(at, size_symbol), CALLDATA(at), BitVecVal(0, 8)))
    return out


def calldata_word(offset: BitVecRef) -> BitVecRef:
    return join_bytes(calldata_bytes(offset, 32))


# --- Memory ---

class Memory:
    """Byte-granular memory. Concrete offsets are exact; a symbolic store havocs everything."""

    def __init__(self, cells: Optional[Dict[int, BitVecRef]] = None, havocked: bool = False, fresh: int = 0):
        self.cells: Dict[int, BitVecRef] = dict(cells or {})
        self.havocked = havocked
        self._fresh = fresh

    def copy(self) -> "Memory":
        return Memory(self.cells, self.havocked, self._fresh)

    def _byte(self, offset: int) -> BitVecRef:
        if offset in self.cells:
            return self.cells[offset]
        if self.havocked:
            self._fresh += 1
            cell = BitVec(f"mem_havoc_{offset}_{self._fresh}", 8)
            self.cells[offset] = cell
            return cell
        return BitVecVal(0, 8)

    def havoc(self) -> None:
        self.cells.clear()
        self.havocked = True

    def store_bytes(self, offset: int, data: List[BitVecRef]) -> None:
        for i, b in enumerate(data):
            self.cells[offset + i] = b

    def store_word(self, offset: int, value: BitVecRef) -> None:
        self.store_bytes(offset, split_word(value))

    def load_bytes(self, offset: int, size: int) -> List[BitVecRef]:
        return [self._byte(offset + i) for i in range(size)]

    def load_word(self, offset: int) -> BitVecRef:
        return join_bytes(self.load_bytes(offset, 32))


def split_word(value: BitVecRef) -> List[BitVecRef]:
    known = concrete(value)
    if known is not None:
        return [BitVecVal(b, 8) for b in known.to_bytes(32, "big")]
    return [Extract(255 - 8 * i, 248 - 8 * i, value) for i in range(32)]


def join_bytes(data: List[BitVecRef]) -> BitVecRef:
    if all(is_bv_value(b) for b in data):
        return BitVecVal(int.from_bytes(bytes(b.as_long() for b in data), "big"), 8 * len(data))
    return simplify(Concat(*data)) if len(data) > 1 else data[0]


# --- Storage ---

class SymbolicRegister:
    """Storage as a journaled map from key expressions to value expressions.

    `checkpoint()` marks a fork point and `rollback()` undoes every write
    made after it. Reading a key never written yields a fresh symbol, the
    same one on every read, unless the slot was seeded with a known value.
    """

    def __init__(self, seeds: Optional[Dict[int, int]] = None):
        self.entries: Dict[str, Tuple[BitVecRef, BitVecRef]] = {}
        self.journal: List[Tuple[str, BitVecRef, BitVecRef, Optional[Tuple[BitVecRef, BitVecRef]]]] = []
        self.seeds: Dict[int, int] = dict(seeds or {})
        self._initial: Dict[str, BitVecRef] = {}

    @staticmethod
    def key_id(key: BitVecRef) -> str:
        return simplify(key).sexpr()

    def load(self, key: BitVecRef) -> BitVecRef:
        kid = self.key_id(key)
        if kid in self.entries:
            return self.entries[kid][1]
        if kid not in self._initial:
            slot = concrete(key)
            if slot is not None and slot in self.seeds:
                self._initial[kid] = word(self.seeds[slot])
            elif slot is not None:
                self._initial[kid] = BitVec(f"storage_{slot:#x}", WORD_BITS)
            else:
                self._initial[kid] = BitVec(f"storage_k{len(self._initial)}", WORD_BITS)
        return self._initial[kid]

    def store(self, key: BitVecRef, value: BitVecRef) -> None:
        kid = self.key_id(key)
        self.journal.append((kid, key, value, self.entries.get(kid)))
        self.entries[kid] = (key, value)

    def checkpoint(self) -> int:
        return len(self.journal)

    def rollback(self, mark: int) -> None:
        while len(self.journal) > mark:
            kid, _, _, previous = self.journal.pop()
            if previous is None:
                del self.entries[kid]
            else:
                self.entries[kid] = previous

    @classmethod
    def replay(cls, journal: List[tuple], seeds: Optional[Dict[int, int]] = None) -> "SymbolicRegister":
        register = cls(seeds)
        for _, key, value, _ in journal:
            register.store(key, value)
        return register

    def snapshot(self) -> Dict[str, str]:
        """Text image of the entries, for exact comparison."""
        return {kid: value.sexpr() for kid, (_, value) in sorted(self.entries.items())}


# --- States ---

class BranchRecord(BaseModel):
    """One symbolic JUMPI decision on the current path."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    offset: int
    condition: BoolRef = Field(description="The condition as taken on this path")
    prefix: int = Field(description="Path-condition length before this branch")


class SymbolicState(BaseModel):
    """Machine state at one point of one path."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    block: int = 0
    pc: int = Field(default=0, description="Offset of the next instruction")
    stack: List[BitVecRef] = Field(default_factory=list)
    memory: Memory = Field(default_factory=Memory)
    storage: SymbolicRegister = Field(default_factory=SymbolicRegister)
    transient: Dict[str, BitVecRef] = Field(default_factory=dict)
    path_condition: List[BoolRef] = Field(default_factory=list)
    call_depth: int = 0
    loop_counters: Dict[int, int] = Field(default_factory=dict)
    trace: List[int] = Field(default_factory=list, description="Blocks entered, in order")
    branches: List[BranchRecord] = Field(default_factory=list)
    fresh: int = Field(default=0, description="Counter for fresh symbol names")
    target_offset: Optional[int] = Field(default=None, description="Set once the guidance target is reached")
    target_condition: Optional[BoolRef] = Field(default=None, description="Branch condition when the target is a JUMPI")

    def fork(self) -> "SymbolicState":
        """Copy for a sibling path; storage stays shared and is rolled back by the executor."""
        return self.model_copy(update={
            "stack": list(self.stack),
            "memory": self.memory.copy(),
            "transient": dict(self.transient),
            "path_condition": list(self.path_condition),
            "loop_counters": dict(self.loop_counters),
            "trace": list(self.trace),
            "branches": list(self.branches),
        })

    def fresh_symbol(self, prefix: str) -> BitVecRef:
        self.fresh += 1
        return BitVec(f"{prefix}_{self.fresh}", WORD_BITS)


class Divergence(BaseModel):
    """No explored path reached the target."""

    reason: str
    complete: bool = Field(description="True when every feasible path was explored within bounds")
    states: int = 0
    diagnostics: List[Diagnostic] = Field(default_factory=list)


class Guidance(BaseModel):
    """Source ranges a taint path covers and the sink range to reach."""

    ranges: List[SourceRange] = Field(default_factory=list)
    target: SourceRange


# --- Verdicts ---

class VerdictStatus(str, Enum):
    REACHABLE = "Reachable"
    UNREACHABLE = "Unreachable"
    UNKNOWN = "Unknown"


class UfTable(BaseModel):
    """Interpretation of one uninterpreted function, restricted to the points used."""

    entries: Dict[int, int] = Field(default_factory=dict)
    default: int = 0


class Verdict(BaseModel):
    status: VerdictStatus
    reason: Optional[str] = Field(default=None, description="For Unknown: 'timeout' or 'budget'")
    model: Dict[str, int] = Field(default_factory=dict, description="Symbol -> value, when Reachable")
    functions: Dict[str, UfTable] = Field(default_factory=dict)
    checks: Dict[str, Optional[bool]] = Field(default_factory=dict)

    @property
    def reachable(self) -> bool:
        return self.status == VerdictStatus.REACHABLE
