"""
symexec.executor - Guided depth-first symbolic execution toward a sink.

The executor starts at the dispatcher with the selector pinned, forks only
on symbolic JUMPI conditions, and explores the side closer to the target
first. Storage writes live in a shared journaled register that is rolled
back whenever a pending sibling path resumes.
"""

import logging
import time
from collections import deque
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple, Union

from z3 import UGE, BitVecVal, BoolRef, Not, is_false, is_true, simplify

from equiv_guard.cfg.models import Cfg, Instruction, TerminatorKind
from equiv_guard.cfg.opcodes import CALL_OPCODES, Opcode
from equiv_guard.errors import BudgetExhausted, UnresolvedJump
from equiv_guard.ingest.models import CompilationArtifact, SourceMapEntry
from equiv_guard.ipdg.models import Ipdg
from equiv_guard.models import Diagnostic, SourceRange
from equiv_guard.symexec.models import (
    BranchRecord,
    Divergence,
    Guidance,
    SymbolicRegister,
    SymbolicState,
    calldata_bytes,
    concrete,
    env_symbol,
    join_bytes,
    word,
)
from equiv_guard.symexec.semantics import StackError, as_bool, step
from equiv_guard.symexec.solver import is_satisfiable
from equiv_guard.taint.models import TaintPath

logger = logging.getLogger(__name__)

HALTING = frozenset({
    TerminatorKind.STOP, TerminatorKind.RETURN, TerminatorKind.REVERT,
    TerminatorKind.SELFDESTRUCT, TerminatorKind.INVALID,
})
INFINITY = float("inf")


def guidance_from_path(path: Optional[TaintPath], ipdg: Ipdg, target: Optional[SourceRange] = None) -> Guidance:
    """Source ranges of the path's nodes; `target` defaults to the sink's range."""
    ranges = [ipdg.nodes[n].src for n in path.nodes if ipdg.nodes[n].src is not None] if path is not None else []
    if target is None:
        if path is None:
            raise ValueError("guidance needs a path or an explicit target")
        target = ipdg.nodes[path.sink].src
    return Guidance(ranges=ranges, target=target)


def storage_seeds(artifact: CompilationArtifact, ipdg: Ipdg) -> Dict[int, int]:
    """Slot -> value for unpacked state variables whose value is fixed at deployment."""
    by_slot: Dict[int, List] = {}
    for entry in artifact.storage_layout:
        by_slot.setdefault(entry.slot, []).append(entry)
    seeds: Dict[int, int] = {}
    for slot, entries in by_slot.items():
        if len(entries) != 1:
            continue
        entry = entries[0]
        for qualified, info in ipdg.variables.items():
            if info.contract == entry.contract and info.name == entry.label and qualified in ipdg.constants:
                seeds[slot] = ipdg.constants[qualified]
                break
    return seeds


def target_offsets(cfg: Cfg, source_map: Sequence[SourceMapEntry], target: SourceRange) -> FrozenSet[int]:
    """Instructions that stand for the sink range.

    In order of preference: calls mapped inside `target`, JUMPIs mapped
    inside it, the innermost JUMPIs whose statement encloses it (an `if` or
    loop condition), and finally anything mapped inside it.
    """
    inside: List[Instruction] = []
    enclosing: List[Tuple[int, Instruction]] = []
    for inst in cfg.all_instructions():
        if inst.index >= len(source_map):
            continue
        rng = source_map[inst.index].range
        if rng.generated:
            continue
        if target.contains(rng):
            inside.append(inst)
        elif inst.opcode == Opcode.JUMPI and rng.contains(target):
            enclosing.append((rng.length, inst))
    calls = [i for i in inside if i.opcode in CALL_OPCODES]
    if calls:
        return frozenset(i.offset for i in calls)
    branches = [i for i in inside if i.opcode == Opcode.JUMPI]
    if branches:
        return frozenset(i.offset for i in branches)
    if enclosing:
        innermost = min(length for length, _ in enclosing)
        return frozenset(i.offset for length, i in enclosing if length == innermost)
    return frozenset(i.offset for i in inside)


def _guided_blocks(cfg: Cfg, source_map: Sequence[SourceMapEntry], ranges: Sequence[SourceRange]) -> Set[int]:
    blocks: Set[int] = set()
    for bid in cfg.blocks:
        for inst in cfg.instructions(bid):
            if inst.index < len(source_map):
                rng = source_map[inst.index].range
                if not rng.generated and any(r.overlaps(rng) for r in ranges):
                    blocks.add(bid)
                    break
    return blocks


def _distances(cfg: Cfg, targets: Set[int]) -> Dict[int, int]:
    """Shortest block distance from every block to any target block."""
    dist = {t: 0 for t in targets}
    queue = deque(targets)
    while queue:
        current = queue.popleft()
        for pred in cfg.predecessors(current):
            if pred not in dist:
                dist[pred] = dist[current] + 1
                queue.append(pred)
    return dist


def _cycle_repeats(trace: List[int]) -> int:
    """How many consecutive copies of the cycle closed by the last block end the trace."""
    last = trace[-1]
    try:
        previous = len(trace) - 2 - trace[-2::-1].index(last)
    except ValueError:
        return 0
    cycle = trace[previous + 1:]
    size = len(cycle)
    repeats = 0
    end = len(trace)
    while end - size >= 0 and trace[end - size:end] == cycle:
        repeats += 1
        end -= size
    return repeats


class _Executor:
    def __init__(self, cfg: Cfg, targets: FrozenSet[int], *, code: bytes, unroll: int, max_steps: int,
                 deadline: Optional[float], use_guidance: bool, guided: Set[int],
                 solver_timeout_s: float, contract: Optional[str]):
        self.cfg = cfg
        self.targets = targets
        self.code = code
        self.unroll = unroll
        self.max_steps = max_steps
        self.deadline = deadline
        self.use_guidance = use_guidance
        self.guided = guided
        self.solver_timeout_s = solver_timeout_s
        self.contract = contract
        self.diagnostics: List[Diagnostic] = []
        self.steps = 0
        self.states = 0
        self.complete = True
        target_blocks = {b for b in (cfg.block_of(t) for t in targets) if b is not None}
        self.distance = _distances(cfg, target_blocks)
        self.prune = use_guidance and not cfg.has_unresolved()

    def _diag(self, code: str, message: str, offset: Optional[int] = None) -> None:
        self.diagnostics.append(Diagnostic(phase="symexec", code=code, message=message,
                                           contract=self.contract, offset=offset))

    def _jump_target(self, state: SymbolicState, offset: int) -> int:
        target = concrete(state.stack.pop())
        if target is None or target not in self.cfg.program.jumpdests:
            raise UnresolvedJump(offset)
        return target

    def _rank(self, block: int) -> Tuple[float, int]:
        if not self.use_guidance:
            return (0, 0)
        return (self.distance.get(block, INFINITY), 0 if block in self.guided else 1)

    def _feasible(self, state: SymbolicState) -> bool:
        if is_false(simplify(state.path_condition[-1])):
            return False
        verdict = is_satisfiable(state.path_condition, self.solver_timeout_s)
        return verdict is not False

    def _tick(self) -> None:
        self.steps += 1
        over_time = self.deadline is not None and time.monotonic() > self.deadline
        if self.steps > self.max_steps or over_time:
            raise BudgetExhausted(self.states)

    def _enter(self, state: SymbolicState, block: int) -> bool:
        """Move to `block`; False when the loop bound or pruning drops the path."""
        if block not in self.cfg.blocks:
            self._diag("invalid-jump", f"jump to non-block offset {block:#x}", block)
            return False
        if self.prune and self.distance.get(block, INFINITY) == INFINITY:
            return False
        state.trace.append(block)
        repeats = _cycle_repeats(state.trace)
        state.loop_counters[block] = repeats
        if repeats > self.unroll:
            self.complete = False
            return False
        state.block = block
        state.pc = block
        return True

    def run(self, initial: SymbolicState) -> Union[SymbolicState, Divergence]:
        register = initial.storage
        pending: List[Tuple[SymbolicState, int]] = [(initial, register.checkpoint())]
        while pending:
            state, mark = pending.pop()
            register.rollback(mark)
            self.states += 1
            reached = self._run_block(state, pending, register)
            if reached is not None:
                return reached
        reason = "sink not reached" if self.complete else "sink not reached within bounds"
        return Divergence(reason=reason, complete=self.complete, states=self.states,
                          diagnostics=self.diagnostics)

    def _run_block(self, state: SymbolicState, pending, register: SymbolicRegister) -> Optional[SymbolicState]:
        """Execute `state` until it halts, forks or reaches the target."""
        while True:
            block = self.cfg.blocks[state.block]
            instructions = self.cfg.instructions(state.block)
            for inst in instructions:
                self._tick()
                if inst.offset in self.targets:
                    state.target_offset = inst.offset
                    if inst.opcode == Opcode.JUMPI and len(state.stack) >= 2:
                        state.target_condition = as_bool(state.stack[-2])
                    return state
                if inst.opcode in (Opcode.JUMP, Opcode.JUMPI) or block.terminator in HALTING and inst is instructions[-1]:
                    break
                try:
                    step(state, inst, self.code)
                except StackError as exc:
                    logger.debug("path dropped at %#x: %s", inst.offset, exc)
                    return None
            if block.terminator in HALTING:
                return None
            last = instructions[-1]
            fallthrough = last.offset + last.size
            if block.terminator == TerminatorKind.FALLTHROUGH:
                if not self._enter(state, fallthrough):
                    return None
                continue
            if len(state.stack) < (2 if block.terminator == TerminatorKind.JUMPI else 1):
                return None
            try:
                target = self._jump_target(state, last.offset)
            except UnresolvedJump as exc:
                self._diag("unresolved-jump", f"{exc}; branch abandoned", exc.offset)
                self.complete = False
                return None
            if block.terminator == TerminatorKind.JUMP:
                if not self._enter(state, target):
                    return None
                continue
            cond = simplify(as_bool(state.stack.pop()))
            if is_true(cond) or is_false(cond):
                if not self._enter(state, target if is_true(cond) else fallthrough):
                    return None
                continue
            self._fork(state, cond, target, fallthrough, last.offset, pending, register)
            return None

    def _fork(self, state: SymbolicState, cond: BoolRef, target: int, fallthrough: int, offset: int,
              pending, register: SymbolicRegister) -> None:
        children = []
        for dest, branch in ((target, cond), (fallthrough, Not(cond))):
            child = state.fork()
            child.branches.append(BranchRecord(offset=offset, condition=branch, prefix=len(child.path_condition)))
            child.path_condition.append(branch)
            if self._feasible(child) and self._enter(child, dest):
                children.append(child)
        # pending is LIFO: the better-ranked child goes on last
        children.sort(key=lambda c: self._rank(c.block), reverse=True)
        mark = register.checkpoint()
        for child in children:
            pending.append((child, mark))


def execute_path(cfg: Cfg, selector: str, guidance: Optional[Guidance], *,
                 source_map: Sequence[SourceMapEntry], code: bytes = b"", unroll: int = 2,
                 max_steps: int = 200_000, deadline: Optional[float] = None, use_guidance: bool = True,
                 seeds: Optional[Dict[int, int]] = None, solver_timeout_s: float = 5.0,
                 targets: Optional[FrozenSet[int]] = None, contract: Optional[str] = None,
                 diagnostics: Optional[List[Diagnostic]] = None) -> Union[SymbolicState, Divergence]:
    """Search for an execution of `selector` that reaches the guidance target.

    Args:
        cfg: Recovered control-flow graph of the deployed code.
        selector: 0x-prefixed 4-byte selector the call data starts with.
        guidance: Ranges of the taint path and its sink range.
        source_map: Per-instruction source ranges of the deployed code.
        code: Deployed bytecode, for CODECOPY and CODESIZE.
        unroll: Repetitions of one block cycle allowed per path.
        max_steps: Instruction budget over all paths.
        deadline: `time.monotonic()` value past which exploration stops.
        use_guidance: False explores in natural order without pruning.
        seeds: Known initial storage values by slot.
        solver_timeout_s: Limit for each branch feasibility query.
        targets: Explicit target offsets; overrides the guidance target.
        contract: Name used on diagnostics.
        diagnostics: Receives unresolved-jump diagnostics.

    Returns:
        The state just before the first target instruction executes, or a
        Divergence when no explored path reached it.

    Raises:
        BudgetExhausted: The step budget or the deadline ran out.
    """
    if targets is None:
        targets = target_offsets(cfg, source_map, guidance.target) if guidance is not None else frozenset()
    if not targets:
        return Divergence(reason="no instruction maps to the sink", complete=False)
    guided = _guided_blocks(cfg, source_map, guidance.ranges) if guidance is not None and use_guidance else set()
    executor = _Executor(cfg, targets, code=code, unroll=unroll, max_steps=max_steps, deadline=deadline,
                         use_guidance=use_guidance, guided=guided, solver_timeout_s=solver_timeout_s,
                         contract=contract)
    initial = SymbolicState(block=cfg.entry, pc=cfg.entry, storage=SymbolicRegister(seeds), trace=[cfg.entry])
    initial.path_condition.append(join_bytes(calldata_bytes(word(0), 4)) == BitVecVal(int(selector, 16), 32))
    initial.path_condition.append(UGE(env_symbol("CALLDATASIZE"), word(4)))
    try:
        result = executor.run(initial)
    finally:
        if diagnostics is not None:
            diagnostics.extend(executor.diagnostics)
    if isinstance(result, SymbolicState):
        logger.debug("target %#x reached after %d states", result.target_offset, executor.states)
    return result
