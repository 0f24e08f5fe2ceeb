import pytest
from z3 import BitVec, BitVecVal

import figures
from equiv_guard.cfg import build_cfg
from equiv_guard.errors import BudgetExhausted
from equiv_guard.ingest.models import StorageSlot
from equiv_guard.ipdg import build_ipdg
from equiv_guard.models import Smell, SourceRange
from equiv_guard.symexec import (
    Divergence,
    SymbolicRegister,
    SymbolicState,
    VerdictStatus,
    execute_path,
    replay_model,
    storage_seeds,
    verify,
)
from equiv_guard.symexec.executor import guidance_from_path
from equiv_guard.symexec.verifier import (
    BRANCH_BOTH_SIDES,
    CALL_TARGET_SYMBOLIC,
    CALLER_PERMISSION,
    CHAINID_SOLVABLE,
    TIMESTAMP_RESTRICTION,
)
from equiv_guard.taint.models import TaintPath
from evm_asm import assemble, guarded_function, labels

SELECTOR = "0x11111111"


def _guarded(guard: str, after: str = "STOP") -> str:
    return guarded_function(SELECTOR, guard, after)


CHAIN_GUARD = _guarded("CHAINID\nPUSH1 0x01\nEQ")
TIME_GUARD = _guarded("PUSH4 0x65000000\nTIMESTAMP\nGT")
OWNER_GUARD = _guarded("CALLER\nPUSH1 0x42\nEQ")
HEIGHT_GUARD = _guarded("PUSH3 0x1adb00\nNUMBER\nLT\nISZERO")
CONTRADICTION = _guarded("CHAINID\nPUSH1 0x01\nEQ", after="""CHAINID
    PUSH1 0x02
    EQ
    PUSH @never
    JUMPI
    STOP
never:
    JUMPDEST
    STOP""")
COPY_THEN_LOAD = "PUSH1 0x20\nPUSH1 0x04\nPUSH1 0x00\nCALLDATACOPY\nPUSH1 0x00\nMLOAD\nPUSH1 0x04\nCALLDATALOAD\nEQ"

LOOP = """
    PUSH1 0x03
loop:
    JUMPDEST
    PUSH1 0x01
    SWAP1
    SUB
    DUP1
    PUSH @loop
    JUMPI
    POP
    STOP
"""


def _run(source: str, label: str = "hit", **kwargs):
    code = assemble(source)
    target = labels(source)[label]
    return execute_path(build_cfg(code), SELECTOR, None, source_map=[], code=code,
                        targets=frozenset({target}), **kwargs)


# --- Exploration ---

def test_reaches_target_behind_symbolic_branch():
    state = _run(CHAIN_GUARD)

    assert isinstance(state, SymbolicState)
    assert state.target_offset == labels(CHAIN_GUARD)["hit"]
    assert len(state.branches) == 2
    assert state.trace[-1] == labels(CHAIN_GUARD)["hit"]


def test_infeasible_target_diverges_completely():
    result = _run(CONTRADICTION, label="never")

    assert isinstance(result, Divergence)
    assert result.complete
    assert result.reason == "sink not reached"


def test_loop_bound_limits_unrolling():
    code = assemble(LOOP)
    after_loop = labels(LOOP)["loop"] + 10
    cfg = build_cfg(code)

    def run(unroll):
        return execute_path(cfg, "0x00000000", None, source_map=[], code=code, unroll=unroll,
                            targets=frozenset({after_loop}))

    bounded = run(2)
    assert isinstance(bounded, Divergence)
    assert not bounded.complete
    assert bounded.reason == "sink not reached within bounds"
    reached = run(3)
    assert isinstance(reached, SymbolicState)
    assert reached.loop_counters[labels(LOOP)["loop"]] == 3


def test_step_budget_raises():
    with pytest.raises(BudgetExhausted):
        _run(CHAIN_GUARD, max_steps=3)


def test_symbolic_jump_abandons_the_branch():
    source = _guarded("PUSH1 0x04\nCALLDATALOAD\nJUMP")
    diagnostics = []

    result = _run(source, diagnostics=diagnostics)

    assert isinstance(result, Divergence)
    assert not result.complete
    (diag,) = [d for d in diagnostics if d.code == "unresolved-jump"]
    assert diag.phase == "symexec"
    assert diag.message.endswith("; branch abandoned")


def test_no_target_is_a_divergence():
    code = assemble(CHAIN_GUARD)

    result = execute_path(build_cfg(code), SELECTOR, None, source_map=[], code=code)

    assert isinstance(result, Divergence)
    assert result.reason == "no instruction maps to the sink"


def test_unguided_search_reaches_the_same_target():
    state = _run(CHAIN_GUARD, use_guidance=False)

    assert isinstance(state, SymbolicState)


# --- Verdicts and checks ---

def test_pinned_chain_id_is_not_solvable_elsewhere():
    verdict = verify(_run(CHAIN_GUARD), checks=[CHAINID_SOLVABLE, TIMESTAMP_RESTRICTION, CALLER_PERMISSION])

    assert verdict.status == VerdictStatus.REACHABLE
    assert verdict.model["CHAINID"] == 1
    assert verdict.checks == {CHAINID_SOLVABLE: False, TIMESTAMP_RESTRICTION: False, CALLER_PERMISSION: False}


def test_chain_free_path_is_solvable_on_any_chain():
    verdict = verify(_run(TIME_GUARD), checks=[CHAINID_SOLVABLE, TIMESTAMP_RESTRICTION])

    assert verdict.reachable
    assert verdict.checks == {CHAINID_SOLVABLE: True, TIMESTAMP_RESTRICTION: True}
    assert verdict.model["TIMESTAMP"] > 0x65000000


def test_caller_check_is_detected():
    verdict = verify(_run(OWNER_GUARD), checks=[CALLER_PERMISSION])

    assert verdict.checks[CALLER_PERMISSION] is True
    assert verdict.model["CALLER"] == 0x42


def test_height_branch_can_go_both_ways():
    verdict = verify(_run(HEIGHT_GUARD), checks=[BRANCH_BOTH_SIDES, CALL_TARGET_SYMBOLIC])

    assert verdict.checks[BRANCH_BOTH_SIDES] is True
    assert verdict.model["NUMBER"] >= 0x1adb00


def test_contradictory_conditions_are_unreachable():
    x = BitVec("CHAINID", 256)
    state = SymbolicState(path_condition=[x == BitVecVal(1, 256), x == BitVecVal(2, 256)])

    assert verify(state).status == VerdictStatus.UNREACHABLE


def test_unknown_check_name_raises():
    with pytest.raises(ValueError, match="unknown check 'nope'"):
        verify(_run(CHAIN_GUARD), checks=["nope"])


def test_model_replays_on_its_own_path():
    state = _run(OWNER_GUARD)
    verdict = verify(state)

    assert replay_model(state, verdict.model, verdict.functions)
    assert not replay_model(state, {**verdict.model, "CALLER": 0x43}, verdict.functions)
    assert not replay_model(state, {})


# --- Storage ---

def test_register_rolls_back_to_checkpoint():
    register = SymbolicRegister(seeds={0: 7})
    slot0, slot1 = BitVecVal(0, 256), BitVecVal(1, 256)

    assert register.load(slot0).as_long() == 7
    assert str(register.load(slot1)) == "storage_0x1"
    mark = register.checkpoint()
    register.store(slot1, BitVecVal(9, 256))
    assert register.load(slot1).as_long() == 9
    register.rollback(mark)
    assert str(register.load(slot1)) == "storage_0x1"
    assert register.snapshot() == {}


def test_storage_seeds_skip_packed_slots():
    artifact = figures.pca_hardcoded_router().model_copy(update={"storage_layout": [
        StorageSlot(label="RouterAddr", contract="SwapToken", slot=0, type_label="address"),
        StorageSlot(label="uniswapRouter", contract="SwapToken", slot=1, type_label="contract RouterV2"),
        StorageSlot(label="paused", contract="SwapToken", slot=1, offset=20, type_label="bool"),
    ]})

    seeds = storage_seeds(artifact, build_ipdg([artifact]))

    assert seeds == {0: int(figures.ROUTER, 16)}


# --- Guidance ---

def test_guidance_follows_the_path_and_its_sink():
    artifact = figures.tdt_weekly_lock()
    ipdg = build_ipdg([artifact])
    sink, source = sorted(ipdg.nodes)[-1], sorted(ipdg.nodes)[0]
    path = TaintPath(smell=Smell.TDT, nodes=(source, sink))

    guidance = guidance_from_path(path, ipdg)

    assert guidance.ranges == [ipdg.nodes[source].src, ipdg.nodes[sink].src]
    assert guidance.target == ipdg.nodes[sink].src


def test_explicit_guidance_target_wins_over_the_sink():
    artifact = figures.tdt_weekly_lock()
    ipdg = build_ipdg([artifact])
    target = SourceRange(start=1, length=2, file_index=0)

    assert guidance_from_path(None, ipdg, target).model_dump() == {"ranges": [], "target": target.model_dump()}
    with pytest.raises(ValueError, match="needs a path or an explicit target"):
        guidance_from_path(None, ipdg)


# --- Calldata ---

def test_copied_and_loaded_calldata_are_the_same_bytes():
    assert isinstance(_run(_guarded(COPY_THEN_LOAD)), SymbolicState)

    result = _run(_guarded(COPY_THEN_LOAD + "\nISZERO"))

    assert isinstance(result, Divergence)
    assert result.complete


def test_calldata_argument_model_replays():
    state = _run(_guarded("PUSH1 0x04\nCALLDATALOAD\nPUSH2 0xbeef\nEQ"))
    verdict = verify(state)

    assert verdict.reachable
    assert verdict.model["CALLDATASIZE"] >= 36
    assert verdict.functions["calldata"].entries[35] == 0xef
    assert replay_model(state, verdict.model, verdict.functions)
