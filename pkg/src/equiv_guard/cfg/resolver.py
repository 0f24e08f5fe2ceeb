"""
cfg.resolver - Constant propagation over SSA values and jump resolution.

The lattice per value is: None (no information yet), a frozenset of at most
`bound` constants, or TOP. Phis join their incoming values; pure operations
fold over the cartesian product of their operand sets. Resolution alternates
between wiring phis along the current edge set, folding to a fixpoint, and
adding the jump edges the folded targets imply, until no edge is added.
"""

import logging
from collections import defaultdict, deque
from itertools import product
from typing import Callable, Dict, Iterable, List, Optional, Set

from equiv_guard.cfg.disassembler import disassemble
from equiv_guard.cfg.models import (
    TOP,
    BasicBlock,
    Cfg,
    Lattice,
    Resolution,
    SsaProgram,
    TerminatorKind,
    ValueKind,
)
from equiv_guard.cfg.opcodes import Opcode
from equiv_guard.cfg.ssa import MAX_STACK, to_ssa
from equiv_guard.models import Diagnostic

logger = logging.getLogger(__name__)

WORD = 1 << 256
MASK = WORD - 1


def _signed(x: int) -> int:
    return x - WORD if x >> 255 else x


def _sdiv(a: int, b: int) -> int:
    if b == 0:
        return 0
    sa, sb = _signed(a), _signed(b)
    q = abs(sa) // abs(sb)
    return (-q if (sa < 0) != (sb < 0) else q) & MASK


def _smod(a: int, b: int) -> int:
    if b == 0:
        return 0
    sa, sb = _signed(a), _signed(b)
    r = abs(sa) % abs(sb)
    return (-r if sa < 0 else r) & MASK


def _signextend(b: int, x: int) -> int:
    if b >= 31:
        return x
    bit = b * 8 + 7
    mask = (1 << bit) - 1
    return (x | ~mask) & MASK if (x >> bit) & 1 else x & mask


def _byte(i: int, x: int) -> int:
    return (x >> (8 * (31 - i))) & 0xFF if i < 32 else 0


def _sar(shift: int, x: int) -> int:
    return (_signed(x) >> min(shift, 256)) & MASK


PURE_OPS: Dict[Opcode, Callable[..., int]] = {
    Opcode.ADD: lambda a, b: (a + b) & MASK,
    Opcode.MUL: lambda a, b: (a * b) & MASK,
    Opcode.SUB: lambda a, b: (a - b) & MASK,
    Opcode.DIV: lambda a, b: a // b if b else 0,
    Opcode.SDIV: _sdiv,
    Opcode.MOD: lambda a, b: a % b if b else 0,
    Opcode.SMOD: _smod,
    Opcode.ADDMOD: lambda a, b, n: (a + b) % n if n else 0,
    Opcode.MULMOD: lambda a, b, n: (a * b) % n if n else 0,
    Opcode.EXP: lambda a, b: pow(a, b, WORD),
    Opcode.SIGNEXTEND: _signextend,
    Opcode.LT: lambda a, b: int(a < b),
    Opcode.GT: lambda a, b: int(a > b),
    Opcode.SLT: lambda a, b: int(_signed(a) < _signed(b)),
    Opcode.SGT: lambda a, b: int(_signed(a) > _signed(b)),
    Opcode.EQ: lambda a, b: int(a == b),
    Opcode.ISZERO: lambda a: int(a == 0),
    Opcode.AND: lambda a, b: a & b,
    Opcode.OR: lambda a, b: a | b,
    Opcode.XOR: lambda a, b: a ^ b,
    Opcode.NOT: lambda a: ~a & MASK,
    Opcode.BYTE: _byte,
    Opcode.SHL: lambda s, x: (x << s) & MASK if s < 256 else 0,
    Opcode.SHR: lambda s, x: x >> s if s < 256 else 0,
    Opcode.SAR: _sar,
}


def _join(values: Iterable[Lattice], bound: int) -> Lattice:
    acc: Set[int] = set()
    seen = False
    for lat in values:
        if lat == TOP:
            return TOP
        if lat is None:
            continue
        seen = True
        acc |= lat
        if len(acc) > bound:
            return TOP
    return frozenset(acc) if seen else None


def _evaluate(program: SsaProgram, vid: int, lattice: Dict[int, Lattice], bound: int) -> Lattice:
    value = program.values[vid]
    if value.kind == ValueKind.CONST:
        return frozenset({value.constant})
    if value.kind == ValueKind.ENV:
        return TOP
    if value.kind == ValueKind.PHI:
        return _join((lattice.get(i) for i in value.incoming.values()), bound)
    fn = PURE_OPS.get(value.opcode)
    if fn is None:
        return TOP
    args = [lattice.get(o) for o in value.operands]
    if any(a == TOP for a in args):
        return TOP
    if any(a is None for a in args):
        return None
    results = set()
    for combo in product(*[sorted(a) for a in args]):
        results.add(fn(*combo))
        if len(results) > bound:
            return TOP
    return frozenset(results)


def fold_constants(program: SsaProgram, bound: int = 8,
                   lattice: Optional[Dict[int, Lattice]] = None) -> Dict[int, Lattice]:
    """Worklist fixpoint of the constant lattice over every SSA value."""
    lattice = dict(lattice or {})
    users: Dict[int, List[int]] = defaultdict(list)
    for value in program.values.values():
        for src in value.operands:
            users[src].append(value.id)
        for src in value.incoming.values():
            users[src].append(value.id)
    work = deque(sorted(program.values))
    queued = set(work)
    while work:
        vid = work.popleft()
        queued.discard(vid)
        new = _evaluate(program, vid, lattice, bound)
        if new != lattice.get(vid):
            lattice[vid] = new
            for user in users[vid]:
                if user not in queued:
                    queued.add(user)
                    work.append(user)
    return lattice


class _Resolver:
    def __init__(self, program: SsaProgram, bound: int, contract: Optional[str]):
        self.program = program
        self.bound = bound
        self.contract = contract
        self.order = sorted(program.blocks)
        self.edges: Dict[int, Set[int]] = defaultdict(set)
        self.unresolved: Set[int] = set()
        self.diagnostics: Dict[tuple, Diagnostic] = {}
        self.lattice: Dict[int, Lattice] = {}
        self._static_edges()

    def _static_edges(self) -> None:
        for i, bid in enumerate(self.order):
            block = self.program.blocks[bid]
            nxt = self.order[i + 1] if i + 1 < len(self.order) else None
            if nxt is not None and block.terminator in (TerminatorKind.FALLTHROUGH, TerminatorKind.JUMPI):
                self.edges[bid].add(nxt)

    def _diag(self, code: str, offset: int, message: str) -> None:
        key = (code, offset, message)
        if key not in self.diagnostics:
            self.diagnostics[key] = Diagnostic(phase="cfg", code=code, message=message,
                                               contract=self.contract, offset=offset)

    def reachable(self) -> List[int]:
        seen = {0} if 0 in self.program.blocks else set()
        stack = list(seen)
        while stack:
            bid = stack.pop()
            for succ in self.edges[bid]:
                if succ not in seen:
                    seen.add(succ)
                    stack.append(succ)
        return sorted(seen)

    def exit_slot(self, bid: int, slot: int) -> int:
        """Value at `slot` (0 = top) of block `bid`'s exit stack."""
        block = self.program.blocks[bid]
        if slot < len(block.exit_stack):
            return block.exit_stack[-1 - slot]
        entry_slot = slot - len(block.exit_stack) + block.consumed
        if entry_slot not in block.phis:
            phi = self.program.new_value(kind=ValueKind.PHI, block=bid, slot=entry_slot)
            block.phis[entry_slot] = phi.id
        return block.phis[entry_slot]

    def wire_phis(self, reachable: List[int]) -> None:
        live = set(reachable)
        changed = True
        while changed:
            changed = False
            for pred in reachable:
                for succ in sorted(self.edges[pred]):
                    if succ not in live:
                        continue
                    for slot, phi_id in sorted(self.program.blocks[succ].phis.items()):
                        phi = self.program.values[phi_id]
                        if pred not in phi.incoming:
                            phi.incoming[pred] = self.exit_slot(pred, slot)
                            changed = True

    def check_heights(self, reachable: List[int]) -> bool:
        """Propagate maximal entry stack heights; invalidate blocks that underflow on all paths."""
        heights: Dict[int, int] = {0: 0}
        work = deque([0])
        while work:
            bid = work.popleft()
            block = self.program.blocks[bid]
            if block.terminator == TerminatorKind.INVALID:
                continue
            out = min(heights[bid] - block.consumed + len(block.exit_stack), MAX_STACK)
            for succ in self.edges[bid]:
                if succ not in heights or out > heights[succ]:
                    heights[succ] = out
                    work.append(succ)
        killed = False
        for bid in reachable:
            block = self.program.blocks[bid]
            if bid in heights and block.terminator != TerminatorKind.INVALID and block.consumed > heights[bid]:
                block.terminator = TerminatorKind.INVALID
                block.invalid_reason = "stack underflow"
                block.target = block.cond = None
                self.edges[bid].clear()
                killed = True
        return killed

    def add_jump_edges(self, reachable: List[int]) -> bool:
        added = False
        for bid in reachable:
            block = self.program.blocks[bid]
            if block.terminator not in (TerminatorKind.JUMP, TerminatorKind.JUMPI) or block.target is None:
                continue
            lat = self.lattice.get(block.target)
            offset = block.instructions[-1].offset
            if lat == TOP:
                self.unresolved.add(bid)
                continue
            if lat is None:
                continue
            self.unresolved.discard(bid)
            for target in sorted(lat):
                if target in self.program.jumpdests:
                    if target not in self.edges[bid]:
                        self.edges[bid].add(target)
                        added = True
                else:
                    self._diag("jump-to-non-jumpdest", offset,
                               f"jump at {offset:#x} targets {target:#x}, which is not a JUMPDEST; edge dropped")
        return added

    def run(self) -> None:
        for _ in range(10_000):
            reachable = self.reachable()
            self.wire_phis(reachable)
            if self.check_heights(reachable):
                continue
            self.lattice = fold_constants(self.program, self.bound, self.lattice)
            if not self.add_jump_edges(reachable):
                break
        for bid in self.reachable():
            block = self.program.blocks[bid]
            if block.terminator in (TerminatorKind.JUMP, TerminatorKind.JUMPI):
                lat = self.lattice.get(block.target) if block.target is not None else None
                if lat == TOP or lat is None:
                    self.unresolved.add(bid)
        for bid in sorted(self.unresolved):
            offset = self.program.blocks[bid].instructions[-1].offset
            lat = self.lattice.get(self.program.blocks[bid].target)
            why = "more than %d candidate targets" % self.bound if lat == TOP else "target is not constant"
            self._diag("unresolved-jump", offset, f"jump at {offset:#x} unresolved: {why}")


def _from_selector_word(program: SsaProgram, vid: int, depth: int = 8) -> bool:
    """Whether a value derives from CALLDATALOAD(0), through shifts, masks and phis."""
    if depth == 0:
        return False
    value = program.values[vid]
    if value.kind == ValueKind.ENV and value.opcode == Opcode.CALLDATALOAD:
        arg = program.values[value.operands[0]]
        return arg.kind == ValueKind.CONST and arg.constant == 0
    if value.kind == ValueKind.OP and value.opcode in (Opcode.SHR, Opcode.DIV, Opcode.AND):
        return any(_from_selector_word(program, o, depth - 1) for o in value.operands)
    if value.kind == ValueKind.PHI:
        return any(_from_selector_word(program, i, depth - 1) for i in value.incoming.values())
    return False


def _function_entries(cfg: Cfg) -> Dict[str, int]:
    program = cfg.program
    entries: Dict[str, int] = {}
    for bid, block in sorted(cfg.blocks.items()):
        if block.terminator != TerminatorKind.JUMPI or block.cond is None:
            continue
        cond = program.values[block.cond]
        if cond.kind != ValueKind.OP or cond.opcode != Opcode.EQ:
            continue
        target = cfg.constant_of(block.target)
        if target is None or target not in cfg.blocks:
            continue
        a, b = cond.operands
        for sel_id, other in ((a, b), (b, a)):
            selector = cfg.constant_of(sel_id)
            if selector is not None and selector <= 0xFFFFFFFF and _from_selector_word(program, other):
                entries.setdefault(f"0x{selector:08x}", target)
                break
    return entries


def resolve_jumps(program: SsaProgram, bound: int = 8, contract: Optional[str] = None) -> Cfg:
    """Recover the CFG from an SSA program.

    Jumps whose target folds to at most `bound` constants get one edge per
    constant landing on a JUMPDEST; others are Unresolved. Edges to
    non-JUMPDEST offsets are dropped with a diagnostic.
    """
    resolver = _Resolver(program, bound, contract)
    resolver.run()
    blocks: Dict[int, BasicBlock] = {}
    for bid in resolver.order:
        ssa_block = program.blocks[bid]
        resolution = None
        if ssa_block.terminator in (TerminatorKind.JUMP, TerminatorKind.JUMPI):
            resolution = Resolution.UNRESOLVED if bid in resolver.unresolved else Resolution.RESOLVED
        blocks[bid] = BasicBlock(
            id=bid,
            instr_range=(ssa_block.start, ssa_block.end),
            terminator=ssa_block.terminator,
            target=ssa_block.target,
            cond=ssa_block.cond,
            successors=sorted(resolver.edges[bid]),
            resolution=resolution,
        )
    cfg = Cfg(blocks=blocks, entry=0, program=program, diagnostics=list(resolver.diagnostics.values()))
    cfg.constants = resolver.lattice
    cfg.function_entries = _function_entries(cfg)
    for diag in cfg.diagnostics:
        logger.debug("%s", diag.message)
    return cfg


def build_cfg(bytecode: bytes, bound: int = 8, contract: Optional[str] = None) -> Cfg:
    """disassemble, to_ssa and resolve_jumps in one call."""
    return resolve_jumps(to_ssa(disassemble(bytecode)), bound, contract)
