"""
symexec.verifier - Reachability verdicts, named checks and model replay.
"""

import logging
from typing import Dict, List, Optional, Sequence

from z3 import (
    BitVec,
    BitVecVal,
    BoolRef,
    Not,
    is_bv_value,
    is_true,
    simplify,
    substitute,
)

from equiv_guard.errors import SolverTimeout
from equiv_guard.symexec.models import SymbolicState, UfTable, Verdict, VerdictStatus, concrete
from equiv_guard.symexec.solver import SolverSession, collect_terms

logger = logging.getLogger(__name__)

CHAINID_SOLVABLE = "chainid-constraint-solvable"
TIMESTAMP_RESTRICTION = "timestamp-restriction-present"
CALLER_PERMISSION = "caller-permission-check-present"
CALL_TARGET_SYMBOLIC = "call-target-symbolic"
BRANCH_BOTH_SIDES = "branch-both-sides"
ALL_CHECKS = (CHAINID_SOLVABLE, TIMESTAMP_RESTRICTION, CALLER_PERMISSION, CALL_TARGET_SYMBOLIC, BRANCH_BOTH_SIDES)


def _mentions(constraints: Sequence[BoolRef], name: str) -> bool:
    constants, _ = collect_terms(constraints)
    return any(str(c) == name for c in constants)


class _Checks:
    """Named properties over one reachable state, each answered with a solver query."""

    def __init__(self, state: SymbolicState, model: Dict[str, int], session: SolverSession):
        self.state = state
        self.model = model
        self.session = session

    def _sat(self, constraints: List[BoolRef], query: str) -> Optional[bool]:
        try:
            return self.session.check(constraints, query)[0]
        except SolverTimeout:
            return None

    def chainid_solvable(self) -> Optional[bool]:
        """The path stays feasible for some chain id other than the model's."""
        if "CHAINID" not in self.model:
            return True
        other = BitVec("CHAINID", 256) != BitVecVal(self.model["CHAINID"], 256)
        return self._sat(self.state.path_condition + [other], CHAINID_SOLVABLE)

    def timestamp_restriction(self) -> bool:
        return _mentions(self.state.path_condition, "TIMESTAMP")

    def caller_permission(self) -> bool:
        return _mentions(self.state.path_condition, "CALLER")

    def call_target_symbolic(self) -> Optional[bool]:
        if len(self.state.stack) < 2:
            return None
        return concrete(self.state.stack[-2]) is None

    def branch_both_sides(self) -> Optional[bool]:
        if self.state.target_condition is not None:
            prefix, cond = self.state.path_condition, self.state.target_condition
        else:
            mentioning = [b for b in self.state.branches if _mentions([b.condition], "NUMBER")]
            if not mentioning:
                return None
            branch = mentioning[-1]
            prefix, cond = self.state.path_condition[: branch.prefix], branch.condition
        taken = self._sat(list(prefix) + [cond], BRANCH_BOTH_SIDES)
        other = self._sat(list(prefix) + [Not(cond)], BRANCH_BOTH_SIDES)
        if taken is None or other is None:
            return None
        return taken and other

    def evaluate(self, names: Sequence[str]) -> Dict[str, Optional[bool]]:
        table = {
            CHAINID_SOLVABLE: self.chainid_solvable,
            TIMESTAMP_RESTRICTION: self.timestamp_restriction,
            CALLER_PERMISSION: self.caller_permission,
            CALL_TARGET_SYMBOLIC: self.call_target_symbolic,
            BRANCH_BOTH_SIDES: self.branch_both_sides,
        }
        results = {}
        for name in names:
            if name not in table:
                raise ValueError(f"unknown check '{name}'")
            results[name] = table[name]()
        return results


def verify(state: SymbolicState, checks: Sequence[str] = (), timeout_s: float = 5.0,
           solver_path: Optional[str] = None) -> Verdict:
    """Decide whether the state's path condition is satisfiable, then run the named checks.

    Args:
        state: A state returned by `execute_path`.
        checks: Names from `ALL_CHECKS`.
        timeout_s: Per-query solver limit.
        solver_path: External SMT-LIB2 solver binary; None uses z3 in process.

    Returns:
        Reachable with a model, Unreachable, or Unknown("timeout"). Checks
        are evaluated only for Reachable verdicts; an undecided check is None.

    Raises:
        SolverUnavailable: The external solver could not be started.
    """
    session = SolverSession(timeout_s, solver_path)
    try:
        satisfiable, values, points = session.check(state.path_condition, "reachability")
    except SolverTimeout:
        logger.info("reachability query timed out after %.1fs", timeout_s)
        return Verdict(status=VerdictStatus.UNKNOWN, reason="timeout")
    if not satisfiable:
        return Verdict(status=VerdictStatus.UNREACHABLE)
    functions = {name: UfTable(entries=entries) for name, entries in points.items()}
    results = _Checks(state, values, session).evaluate(checks)
    return Verdict(status=VerdictStatus.REACHABLE, model=values, functions=functions, checks=results)


def _apply_functions(expr, functions: Dict[str, UfTable]):
    _, applications = collect_terms([expr])
    pairs = []
    for app in applications:
        table = functions.get(app.decl().name())
        if table is None or app.num_args() != 1:
            continue
        arg = simplify(app.arg(0))
        if is_bv_value(arg):
            value = table.entries.get(arg.as_long(), table.default)
            pairs.append((app, BitVecVal(value, app.sort().size())))
    return substitute(expr, *pairs) if pairs else expr


def replay_model(state: SymbolicState, model: Dict[str, int],
                 functions: Optional[Dict[str, UfTable]] = None) -> bool:
    """Evaluate every path-condition conjunct concretely under `model`.

    Uninterpreted applications are replaced from `functions` once their
    arguments become concrete; a symbol missing from `model` keeps the
    conjunct symbolic, which counts as not satisfied.
    """
    functions = functions or {}
    constants, _ = collect_terms(state.path_condition)
    pairs = [(c, BitVecVal(model[str(c)], c.sort().size())) for c in constants if str(c) in model]
    for conjunct in state.path_condition:
        expr = substitute(conjunct, *pairs) if pairs else conjunct
        for _ in range(8):
            reduced = simplify(_apply_functions(simplify(expr), functions))
            if reduced.eq(expr):
                break
            expr = reduced
        if not is_true(simplify(expr)):
            return False
    return True
