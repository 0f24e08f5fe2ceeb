"""Bytecode disassembly, SSA conversion and CFG recovery."""

from equiv_guard.cfg.disassembler import disassemble, strip_metadata
from equiv_guard.cfg.models import BasicBlock, Cfg, Instruction, SsaProgram, SsaValue
from equiv_guard.cfg.opcodes import Opcode
from equiv_guard.cfg.resolver import build_cfg, fold_constants, resolve_jumps
from equiv_guard.cfg.ssa import to_ssa

__all__ = [
    "BasicBlock",
    "Cfg",
    "Instruction",
    "Opcode",
    "SsaProgram",
    "SsaValue",
    "build_cfg",
    "disassemble",
    "fold_constants",
    "resolve_jumps",
    "strip_metadata",
    "to_ssa",
]
