"""
symexec.semantics - Single-instruction transfer functions over SymbolicState.

`step()` applies one non-terminating instruction in place. Control flow
(JUMP, JUMPI and halting opcodes) is left to the executor.
"""

import logging
from typing import Callable, Dict, List

from eth_hash.auto import keccak
from z3 import (
    UGE,
    UGT,
    ULE,
    ULT,
    BitVecRef,
    BitVecSort,
    BoolRef,
    Extract,
    Function,
    If,
    LShR,
    SignExt,
    SRem,
    URem,
    UDiv,
    ZeroExt,
    is_bv_value,
    simplify,
)

from equiv_guard.cfg.models import Instruction
from equiv_guard.cfg.opcodes import CALL_OPCODES, Opcode
from equiv_guard.symexec.models import (
    ENV_SYMBOLS,
    WORD_BITS,
    SymbolicState,
    calldata_bytes,
    calldata_word,
    concrete,
    env_symbol,
    join_bytes,
    keccak_function,
    word,
)

logger = logging.getLogger(__name__)

STACK_LIMIT = 1024
_ONE = word(1)
_ZERO = word(0)

_EXP = Function("evm_exp", BitVecSort(WORD_BITS), BitVecSort(WORD_BITS), BitVecSort(WORD_BITS))
_BALANCE = Function("evm_balance", BitVecSort(WORD_BITS), BitVecSort(WORD_BITS))
_EXTCODESIZE = Function("evm_extcodesize", BitVecSort(WORD_BITS), BitVecSort(WORD_BITS))
_EXTCODEHASH = Function("evm_extcodehash", BitVecSort(WORD_BITS), BitVecSort(WORD_BITS))
_BLOCKHASH = Function("evm_blockhash", BitVecSort(WORD_BITS), BitVecSort(WORD_BITS))


class StackError(Exception):
    """Underflow or overflow; the path is infeasible as an EVM execution."""


def as_bool(value: BitVecRef) -> BoolRef:
    return value != _ZERO


def from_bool(cond: BoolRef) -> BitVecRef:
    return If(cond, _ONE, _ZERO)


def sha3(data: List[BitVecRef]) -> BitVecRef:
    """keccak256 of a byte list: exact when concrete, else the per-width function."""
    if not data:
        return word(int.from_bytes(keccak(b""), "big"))
    if all(is_bv_value(b) for b in data):
        return word(int.from_bytes(keccak(bytes(b.as_long() for b in data)), "big"))
    arg = join_bytes(data)
    return keccak_function(arg.size())(arg)


def _pop(state: SymbolicState) -> BitVecRef:
    if not state.stack:
        raise StackError("stack underflow")
    return state.stack.pop()


def _push(state: SymbolicState, value: BitVecRef) -> None:
    if len(state.stack) >= STACK_LIMIT:
        raise StackError("stack overflow")
    state.stack.append(simplify(value) if not is_bv_value(value) else value)


def _offset(state: SymbolicState, value: BitVecRef):
    """Concrete memory offset, or None after havocking memory."""
    known = concrete(value)
    if known is None or known > 1 << 32:
        state.memory.havoc()
        return None
    return known


# --- Pure arithmetic ---

def _div(a, b):
    return If(b == _ZERO, _ZERO, UDiv(a, b))


def _sdiv(a, b):
    return If(b == _ZERO, _ZERO, a / b)


def _mod(a, b):
    return If(b == _ZERO, _ZERO, URem(a, b))


def _smod(a, b):
    return If(b == _ZERO, _ZERO, SRem(a, b))


def _exp(a, b):
    base, power = concrete(a), concrete(b)
    if base is not None and power is not None:
        return word(pow(base, power, 1 << WORD_BITS))
    if power is not None and power <= 4:
        result = _ONE
        for _ in range(power):
            result = result * a
        return result
    return _EXP(a, b)


def _signextend(b, x):
    index = concrete(b)
    if index is None:
        return x
    if index >= 31:
        return x
    bits = 8 * (index + 1)
    return SignExt(WORD_BITS - bits, Extract(bits - 1, 0, x))


def _byte(i, x):
    index = concrete(i)
    if index is None:
        return LShR(x, (word(31) - i) * 8) & word(0xFF)
    if index >= 32:
        return _ZERO
    return ZeroExt(248, Extract(255 - 8 * index, 248 - 8 * index, x))


def _addmod(a, b, n):
    wide = URem(ZeroExt(8, a) + ZeroExt(8, b), ZeroExt(8, n))
    return If(n == _ZERO, _ZERO, Extract(255, 0, wide))


def _mulmod(a, b, n):
    wide = URem(ZeroExt(256, a) * ZeroExt(256, b), ZeroExt(256, n))
    return If(n == _ZERO, _ZERO, Extract(255, 0, wide))


BINARY: Dict[Opcode, Callable[[BitVecRef, BitVecRef], BitVecRef]] = {
    Opcode.ADD: lambda a, b: a + b,
    Opcode.MUL: lambda a, b: a * b,
    Opcode.SUB: lambda a, b: a - b,
    Opcode.DIV: _div,
    Opcode.SDIV: _sdiv,
    Opcode.MOD: _mod,
    Opcode.SMOD: _smod,
    Opcode.EXP: _exp,
    Opcode.SIGNEXTEND: _signextend,
    Opcode.LT: lambda a, b: from_bool(ULT(a, b)),
    Opcode.GT: lambda a, b: from_bool(UGT(a, b)),
    Opcode.SLT: lambda a, b: from_bool(a < b),
    Opcode.SGT: lambda a, b: from_bool(a > b),
    Opcode.EQ: lambda a, b: from_bool(a == b),
    Opcode.AND: lambda a, b: a & b,
    Opcode.OR: lambda a, b: a | b,
    Opcode.XOR: lambda a, b: a ^ b,
    Opcode.BYTE: _byte,
    Opcode.SHL: lambda shift, value: If(UGE(shift, word(256)), _ZERO, value << shift),
    Opcode.SHR: lambda shift, value: If(UGE(shift, word(256)), _ZERO, LShR(value, shift)),
    Opcode.SAR: lambda shift, value: If(UGE(shift, word(256)), value >> word(255), value >> shift),
}

UNARY: Dict[Opcode, Callable[[BitVecRef], BitVecRef]] = {
    Opcode.ISZERO: lambda a: from_bool(a == _ZERO),
    Opcode.NOT: lambda a: ~a,
    Opcode.BALANCE: _BALANCE,
    Opcode.EXTCODESIZE: _EXTCODESIZE,
    Opcode.EXTCODEHASH: _EXTCODEHASH,
    Opcode.BLOCKHASH: _BLOCKHASH,
}

ENV_NAMED = {Opcode[name] for name in ENV_SYMBOLS}


# --- Calls ---

def _call(state: SymbolicState, inst: Instruction) -> None:
    """External calls: fresh success flag and fresh return bytes; storage untouched."""
    _pop(state)  # gas
    _pop(state)  # target
    if inst.opcode in (Opcode.CALL, Opcode.CALLCODE):
        _pop(state)  # value
    _pop(state)
    _pop(state)
    out_offset, out_size = _pop(state), _pop(state)
    success = state.fresh_symbol("call_success")
    state.path_condition.append(ULE(success, _ONE))
    start, size = _offset(state, out_offset), concrete(out_size)
    if start is not None and size is not None and size <= 4096:
        for i in range(size):
            state.memory.cells[start + i] = Extract(7, 0, state.fresh_symbol("returndata"))
    elif size is None:
        state.memory.havoc()
    _push(state, success)


def call_target(state: SymbolicState) -> BitVecRef:
    """Address operand of the CALL-family instruction about to execute."""
    return state.stack[-2]


# --- Step ---

def step(state: SymbolicState, inst: Instruction, code: bytes = b"") -> None:
    """Apply one instruction that does not transfer control.

    Raises:
        StackError: On underflow or overflow.
    """
    op = inst.opcode
    if op.is_push or op == Opcode.PUSH0:
        _push(state, word(inst.value or 0))
    elif op.is_dup:
        n = op - Opcode.DUP1 + 1
        if len(state.stack) < n:
            raise StackError("stack underflow")
        _push(state, state.stack[-n])
    elif op.is_swap:
        n = op - Opcode.SWAP1 + 1
        if len(state.stack) <= n:
            raise StackError("stack underflow")
        state.stack[-1], state.stack[-1 - n] = state.stack[-1 - n], state.stack[-1]
    elif op.is_log:
        for _ in range(op - Opcode.LOG0 + 2):
            _pop(state)
    elif op in BINARY:
        a, b = _pop(state), _pop(state)
        _push(state, BINARY[op](a, b))
    elif op in UNARY:
        _push(state, UNARY[op](_pop(state)))
    elif op in (Opcode.ADDMOD, Opcode.MULMOD):
        a, b, n = _pop(state), _pop(state), _pop(state)
        _push(state, _addmod(a, b, n) if op == Opcode.ADDMOD else _mulmod(a, b, n))
    elif op in ENV_NAMED:
        _push(state, env_symbol(op.name))
    elif op == Opcode.GAS:
        _push(state, state.fresh_symbol("GAS"))
    elif op in (Opcode.RETURNDATASIZE, Opcode.MSIZE):
        _push(state, state.fresh_symbol(op.name))
    elif op == Opcode.CODESIZE:
        _push(state, word(len(code)))
    elif op == Opcode.PC:
        _push(state, word(inst.offset))
    elif op == Opcode.BLOBHASH:
        _pop(state)
        _push(state, state.fresh_symbol("BLOBHASH"))
    elif op == Opcode.CALLDATALOAD:
        _push(state, calldata_word(_pop(state)))
    elif op == Opcode.SHA3:
        offset, size = _pop(state), _pop(state)
        start, length = _offset(state, offset), concrete(size)
        if start is None or length is None or length > 4096:
            _push(state, state.fresh_symbol("sha3_sym"))
        else:
            _push(state, sha3(state.memory.load_bytes(start, length)))
    elif op == Opcode.POP:
        _pop(state)
    elif op == Opcode.MLOAD:
        start = _offset(state, _pop(state))
        _push(state, state.fresh_symbol("mload") if start is None else state.memory.load_word(start))
    elif op == Opcode.MSTORE:
        start, value = _offset(state, _pop(state)), _pop(state)
        if start is not None:
            state.memory.store_word(start, value)
    elif op == Opcode.MSTORE8:
        start, value = _offset(state, _pop(state)), _pop(state)
        if start is not None:
            state.memory.cells[start] = Extract(7, 0, value)
    elif op in (Opcode.CALLDATACOPY, Opcode.CODECOPY, Opcode.RETURNDATACOPY, Opcode.MCOPY):
        _copy(state, op, code)
    elif op == Opcode.EXTCODECOPY:
        _pop(state)
        _pop(state)
        _pop(state)
        _pop(state)
        state.memory.havoc()
    elif op == Opcode.SLOAD:
        _push(state, state.storage.load(_pop(state)))
    elif op == Opcode.SSTORE:
        key, value = _pop(state), _pop(state)
        state.storage.store(key, value)
    elif op == Opcode.TLOAD:
        key = _pop(state)
        kid = simplify(key).sexpr()
        _push(state, state.transient.get(kid, _ZERO))
    elif op == Opcode.TSTORE:
        key, value = _pop(state), _pop(state)
        state.transient[simplify(key).sexpr()] = value
    elif op in CALL_OPCODES:
        _call(state, inst)
    elif op in (Opcode.CREATE, Opcode.CREATE2):
        for _ in range(3 if op == Opcode.CREATE else 4):
            _pop(state)
        _push(state, state.fresh_symbol("created"))
    elif op == Opcode.JUMPDEST:
        pass
    else:
        raise ValueError(f"{op.name} transfers control; the executor handles it")


def _copy(state: SymbolicState, op: Opcode, code: bytes) -> None:
    dest, src, size = _pop(state), _pop(state), _pop(state)
    start, length = _offset(state, dest), concrete(size)
    if start is None:
        return
    if length is None or length > 4096:
        state.memory.havoc()
        return
    origin = concrete(src)
    if op == Opcode.CALLDATACOPY:
        state.memory.store_bytes(start, calldata_bytes(src, length))
        return
    for i in range(length):
        if op == Opcode.CODECOPY and origin is not None:
            b = code[origin + i] if origin + i < len(code) else 0
            state.memory.cells[start + i] = Extract(7, 0, word(b))
        elif op == Opcode.MCOPY and origin is not None:
            state.memory.cells[start + i] = state.memory.load_bytes(origin + i, 1)[0]
        else:
            state.memory.cells[start + i] = Extract(7, 0, state.fresh_symbol("copied"))


