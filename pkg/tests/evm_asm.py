"""
evm_asm - A two-pass assembler for hand-written EVM test programs, plus a concrete runner.

One instruction per line. `name:` defines a label at the next offset;
`PUSH @name` pushes the label's offset with PUSH2. Anything after `;` is a
comment.

    code = assemble('''
        PUSH1 0x00
        CALLDATALOAD
        PUSH @done
        JUMP
    done:
        JUMPDEST
        STOP
    ''')
"""

from typing import Dict, List, Optional, Tuple

from equiv_guard.cfg import disassemble
from equiv_guard.cfg.opcodes import Opcode


def _parse(source: str) -> List[Tuple[str, str]]:
    items = []
    for raw in source.splitlines():
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        if line.endswith(":"):
            items.append(("label", line[:-1]))
            continue
        parts = line.split()
        items.append((parts[0].upper(), parts[1] if len(parts) > 1 else ""))
    return items


def _size(mnemonic: str, arg: str) -> int:
    if mnemonic == "PUSH" and arg.startswith("@"):
        return 3
    return 1 + Opcode[mnemonic].push_width if mnemonic != "PUSH0" else 1


def _layout(items: List[Tuple[str, str]]) -> Dict[str, int]:
    labels: Dict[str, int] = {}
    offset = 0
    for mnemonic, arg in items:
        if mnemonic == "label":
            labels[arg] = offset
        else:
            offset += _size(mnemonic, arg)
    return labels


def labels(source: str) -> Dict[str, int]:
    """Label name -> byte offset."""
    return _layout(_parse(source))


def assemble(source: str) -> bytes:
    items = _parse(source)
    offsets = _layout(items)
    out = bytearray()
    for mnemonic, arg in items:
        if mnemonic == "label":
            continue
        if mnemonic == "PUSH" and arg.startswith("@"):
            out.append(Opcode.PUSH2)
            out += offsets[arg[1:]].to_bytes(2, "big")
            continue
        op = Opcode[mnemonic]
        out.append(op)
        if op.is_push:
            out += int(arg, 0).to_bytes(op.push_width, "big")
    return bytes(out)


def dispatcher(*selectors: str) -> str:
    """Assembly for a solc-style selector dispatcher jumping to `fn_<selector>` labels."""
    lines = ["PUSH1 0x00", "CALLDATALOAD", "PUSH1 0xe0", "SHR"]
    for selector in selectors:
        lines += ["DUP1", f"PUSH4 {selector}", "EQ", f"PUSH @fn_{selector}", "JUMPI"]
    lines += ["PUSH1 0x00", "DUP1", "REVERT"]
    return "\n".join(lines) + "\n"


# --- Concrete execution ---

WORD = 1 << 256

_BINARY = {
    Opcode.ADD: lambda a, b: (a + b) % WORD,
    Opcode.SUB: lambda a, b: (a - b) % WORD,
    Opcode.MUL: lambda a, b: (a * b) % WORD,
    Opcode.AND: lambda a, b: a & b,
    Opcode.OR: lambda a, b: a | b,
    Opcode.XOR: lambda a, b: a ^ b,
    Opcode.EQ: lambda a, b: int(a == b),
    Opcode.LT: lambda a, b: int(a < b),
    Opcode.GT: lambda a, b: int(a > b),
    Opcode.SHL: lambda shift, x: (x << shift) % WORD if shift < 256 else 0,
    Opcode.SHR: lambda shift, x: x >> shift if shift < 256 else 0,
}
_ENV = {Opcode.CALLER: "CALLER", Opcode.CHAINID: "CHAINID", Opcode.NUMBER: "NUMBER", Opcode.TIMESTAMP: "TIMESTAMP"}
_HALT = {Opcode.STOP, Opcode.RETURN, Opcode.REVERT, Opcode.INVALID, Opcode.SELFDESTRUCT}


def run_jumps(code: bytes, calldata: bytes = b"", env: Optional[Dict[str, int]] = None,
              max_steps: int = 10_000) -> List[Tuple[int, int]]:
    """Execute `code` and return (jump offset, next pc) for every JUMP and JUMPI executed.

    Supports the stack, arithmetic, calldata and environment opcodes the test
    programs use. A jump to a byte that is not a JUMPDEST is recorded and
    halts, as the EVM would.
    """
    env = env or {}
    program = {i.offset: i for i in disassemble(code, strip=False)}
    jumpdests = {off for off, i in program.items() if i.opcode == Opcode.JUMPDEST}
    stack: List[int] = []
    transfers: List[Tuple[int, int]] = []
    pc = 0
    for _ in range(max_steps):
        inst = program.get(pc)
        if inst is None or inst.opcode in _HALT:
            return transfers
        op = inst.opcode
        nxt = pc + inst.size
        jumped = False
        if op.is_push or op == Opcode.PUSH0:
            stack.append(inst.value or 0)
        elif op.is_dup:
            stack.append(stack[-(op - Opcode.DUP1 + 1)])
        elif op.is_swap:
            n = op - Opcode.SWAP1 + 1
            stack[-1], stack[-1 - n] = stack[-1 - n], stack[-1]
        elif op == Opcode.POP:
            stack.pop()
        elif op in _BINARY:
            a = stack.pop()
            stack.append(_BINARY[op](a, stack.pop()))
        elif op == Opcode.ISZERO:
            stack.append(int(stack.pop() == 0))
        elif op == Opcode.NOT:
            stack.append(WORD - 1 - stack.pop())
        elif op == Opcode.CALLDATALOAD:
            start = stack.pop()
            stack.append(int.from_bytes(calldata[start:start + 32].ljust(32, b"\x00"), "big"))
        elif op == Opcode.CALLDATASIZE:
            stack.append(len(calldata))
        elif op in _ENV:
            stack.append(env.get(_ENV[op], 0))
        elif op == Opcode.JUMP:
            nxt, jumped = stack.pop(), True
        elif op == Opcode.JUMPI:
            target, cond = stack.pop(), stack.pop()
            if cond:
                nxt, jumped = target, True
        elif op != Opcode.JUMPDEST:
            raise ValueError(f"{op.name} is not supported by the concrete runner")
        if op in (Opcode.JUMP, Opcode.JUMPI):
            transfers.append((pc, nxt))
            if jumped and nxt not in jumpdests:
                return transfers
        pc = nxt
    raise RuntimeError(f"no halt within {max_steps} steps")


def guarded_function(selector: str, guard: str, after: str = "STOP") -> str:
    """One dispatched function whose `hit` block runs only when `guard` leaves a true word on the stack."""
    return dispatcher(selector) + f"""
fn_{selector}:
    JUMPDEST
    {guard}
    PUSH @hit
    JUMPI
    STOP
hit:
    JUMPDEST
    {after}
"""
