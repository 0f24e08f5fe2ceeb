"""Bytecode disassembly."""

import logging
from typing import List

from equiv_guard.cfg.models import Instruction
from equiv_guard.cfg.opcodes import Opcode, arity, decode
from equiv_guard.errors import TruncatedPush

logger = logging.getLogger(__name__)

CBOR_MAP_HEADERS = (0xA1, 0xA2, 0xA3, 0xA4, 0xA5)


def strip_metadata(code: bytes) -> bytes:
    """Drop the length-suffixed CBOR metadata trailer solc appends.

    The last two bytes give the CBOR payload length; the payload must start
    with a CBOR map header. Anything else is left untouched.
    """
    if len(code) < 2:
        return code
    meta_len = int.from_bytes(code[-2:], "big") + 2
    if meta_len > len(code) or meta_len < 3:
        return code
    if code[-meta_len] not in CBOR_MAP_HEADERS:
        return code
    logger.debug("stripped %d bytes of metadata", meta_len)
    return code[:-meta_len]


def disassemble(bytecode: bytes, strip: bool = True) -> List[Instruction]:
    """Decode `bytecode` into instructions.

    Undefined bytes decode as INVALID with width 1.

    Raises:
        TruncatedPush: A PUSH immediate runs past the end of the code.
    """
    code = strip_metadata(bytecode) if strip else bytecode
    instrs: List[Instruction] = []
    pc = 0
    while pc < len(code):
        op = decode(code[pc])
        width = op.push_width if op != Opcode.PUSH0 else 0
        immediate = None
        if op.is_push:
            if pc + 1 + width > len(code):
                raise TruncatedPush(pc)
            immediate = bytes(code[pc + 1: pc + 1 + width])
        stack_in, stack_out = arity(op)
        instrs.append(Instruction(
            offset=pc,
            index=len(instrs),
            opcode=op,
            immediate=immediate,
            stack_in=stack_in,
            stack_out=stack_out,
        ))
        pc += 1 + width
    return instrs
