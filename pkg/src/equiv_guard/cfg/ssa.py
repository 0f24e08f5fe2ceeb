"""
cfg.ssa - Operand-stack simulation into single-assignment values.

Each block is simulated on its own. Stack slots the block reads from below
its own pushes become entry phis `Phi(block, slot)`; the untouched rest of the
entry stack passes through. A block can only be analysed this way if it
never looks more than 1024 slots deep, and the entry block, whose stack is
known to be empty, is marked Invalid on underflow.
"""

import logging
from typing import Dict, List

from equiv_guard.cfg.models import (
    Instruction,
    SsaBlock,
    SsaProgram,
    TerminatorKind,
    ValueKind,
)
from equiv_guard.cfg.opcodes import ENV_OPCODES, Opcode

logger = logging.getLogger(__name__)

MAX_STACK = 1024

_HALTS = {
    Opcode.STOP: TerminatorKind.STOP,
    Opcode.RETURN: TerminatorKind.RETURN,
    Opcode.REVERT: TerminatorKind.REVERT,
    Opcode.INVALID: TerminatorKind.INVALID,
    Opcode.SELFDESTRUCT: TerminatorKind.SELFDESTRUCT,
}
_ENDS_BLOCK = frozenset(_HALTS) | {Opcode.JUMP, Opcode.JUMPI}


class _StackBounds(Exception):
    pass


def split_blocks(instrs: List[Instruction]) -> List[List[Instruction]]:
    """Partition instructions into blocks.

    A block starts at offset 0, at every JUMPDEST, and after every
    terminator; so no block has an interior JUMPDEST.
    """
    blocks: List[List[Instruction]] = []
    current: List[Instruction] = []
    for ins in instrs:
        if ins.opcode == Opcode.JUMPDEST and current:
            blocks.append(current)
            current = []
        current.append(ins)
        if ins.opcode in _ENDS_BLOCK:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)
    return blocks


class _BlockSimulator:
    """Runs one block's instructions over a symbolic stack of value ids."""

    def __init__(self, program: SsaProgram, block_id: int, entry_known_empty: bool):
        self.program = program
        self.block_id = block_id
        self.entry_known_empty = entry_known_empty
        self.stack: List[int] = []
        self.phis: Dict[int, int] = {}
        self.consumed = 0

    def ensure(self, n: int) -> None:
        while len(self.stack) < n:
            if self.entry_known_empty or self.consumed >= MAX_STACK:
                raise _StackBounds()
            phi = self.program.new_value(kind=ValueKind.PHI, block=self.block_id, slot=self.consumed)
            self.phis[self.consumed] = phi.id
            self.stack.insert(0, phi.id)
            self.consumed += 1

    def pop(self, n: int) -> tuple:
        self.ensure(n)
        taken = tuple(reversed(self.stack[-n:])) if n else ()
        if n:
            del self.stack[-n:]
        return taken

    def push(self, value_id: int) -> None:
        self.stack.append(value_id)
        if len(self.stack) > MAX_STACK:
            raise _StackBounds()


def _simulate(program: SsaProgram, instrs: List[Instruction]) -> SsaBlock:
    block_id = instrs[0].offset
    sim = _BlockSimulator(program, block_id, entry_known_empty=(block_id == 0))
    block = SsaBlock(id=block_id, instructions=instrs, terminator=TerminatorKind.FALLTHROUGH)
    try:
        for ins in instrs:
            op = ins.opcode
            if op.is_push or op == Opcode.PUSH0:
                value = program.new_value(kind=ValueKind.CONST, block=block_id, offset=ins.offset,
                                          opcode=op, constant=ins.value)
                sim.push(value.id)
                block.results[ins.offset] = value.id
            elif op == Opcode.PC:
                value = program.new_value(kind=ValueKind.CONST, block=block_id, offset=ins.offset,
                                          opcode=op, constant=ins.offset)
                sim.push(value.id)
                block.results[ins.offset] = value.id
            elif op.is_dup:
                n = op - Opcode.DUP1 + 1
                sim.ensure(n)
                sim.push(sim.stack[-n])
            elif op.is_swap:
                n = op - Opcode.SWAP1 + 1
                sim.ensure(n + 1)
                sim.stack[-1], sim.stack[-1 - n] = sim.stack[-1 - n], sim.stack[-1]
            elif op == Opcode.JUMPDEST:
                continue
            elif op == Opcode.JUMP:
                (block.target,) = sim.pop(1)
                block.operands[ins.offset] = (block.target,)
                block.terminator = TerminatorKind.JUMP
            elif op == Opcode.JUMPI:
                block.target, block.cond = sim.pop(2)
                block.operands[ins.offset] = (block.target, block.cond)
                block.terminator = TerminatorKind.JUMPI
            else:
                operands = sim.pop(ins.stack_in)
                block.operands[ins.offset] = operands
                if ins.stack_out:
                    kind = ValueKind.ENV if op in ENV_OPCODES else ValueKind.OP
                    value = program.new_value(kind=kind, block=block_id, offset=ins.offset,
                                              opcode=op, operands=operands)
                    sim.push(value.id)
                    block.results[ins.offset] = value.id
                if op in _HALTS:
                    block.terminator = _HALTS[op]
    except _StackBounds:
        block.terminator = TerminatorKind.INVALID
        block.invalid_reason = "stack underflow or overflow"
        block.target = block.cond = None
        logger.debug("block %#x marked invalid: stack bounds", block_id)

    block.phis = sim.phis
    block.exit_stack = list(sim.stack)
    block.consumed = sim.consumed
    return block


def to_ssa(instrs: List[Instruction]) -> SsaProgram:
    """Convert a disassembled instruction list to per-block SSA form.

    Never raises for malformed code; bad regions become Invalid blocks.
    """
    program = SsaProgram(blocks={}, values={})
    jumpdests = set()
    for chunk in split_blocks(instrs):
        block = _simulate(program, chunk)
        program.blocks[block.id] = block
        if chunk[0].opcode == Opcode.JUMPDEST:
            jumpdests.add(chunk[0].offset)
    last = max(program.blocks) if program.blocks else None
    if last is not None and program.blocks[last].terminator == TerminatorKind.FALLTHROUGH:
        # running off the end of code is an implicit STOP
        program.blocks[last].terminator = TerminatorKind.STOP
    program.jumpdests = frozenset(jumpdests)
    return program
