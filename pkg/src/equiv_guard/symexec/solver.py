"""
symexec.solver - Satisfiability queries, in process or through an external SMT-LIB2 binary.

Every query runs in its own solver session. A process-wide semaphore caps
how many sessions are open at once.
"""

import logging
import os
import re
import shutil
import subprocess
import threading
from typing import Dict, List, Optional, Sequence, Tuple

from z3 import BoolRef, Solver, is_app, is_bv_value, is_const, sat, unknown, unsat
from z3 import Z3_OP_UNINTERPRETED

from equiv_guard.errors import SolverTimeout, SolverUnavailable

logger = logging.getLogger(__name__)

MAX_SESSIONS = 8
_sessions = threading.BoundedSemaphore(MAX_SESSIONS)
_VALUE_LINE = re.compile(r"\(\(\s*(\S+)\s+(#x[0-9a-fA-F]+|#b[01]+|\(_ bv(\d+) \d+\))\s*\)\)")

SymbolValues = Dict[str, int]
FunctionPoints = Dict[str, Dict[int, int]]


def _uninterpreted(expr) -> bool:
    return is_app(expr) and expr.decl().kind() == Z3_OP_UNINTERPRETED


def collect_terms(constraints: Sequence[BoolRef]) -> Tuple[List, List]:
    """(free constants, uninterpreted applications with arguments) in the constraints."""
    constants, applications, seen = {}, {}, set()
    stack = list(constraints)
    while stack:
        expr = stack.pop()
        eid = expr.get_id()
        if eid in seen:
            continue
        seen.add(eid)
        if is_const(expr) and _uninterpreted(expr):
            constants[str(expr)] = expr
        elif _uninterpreted(expr) and expr.num_args() > 0:
            applications[eid] = expr
        stack.extend(expr.children())
    return [constants[k] for k in sorted(constants)], [applications[k] for k in sorted(applications)]


def resolve_solver_path(configured: Optional[str]) -> Optional[str]:
    """External solver binary, or None for the in-process z3."""
    if not configured:
        return None
    found = shutil.which(configured) or (configured if os.path.isfile(configured) else None)
    if found is None:
        raise SolverUnavailable(f"solver binary not found: {configured}")
    return found


class SolverSession:
    """One satisfiability query.

    Args:
        timeout_s: Per-query limit; exceeding it raises SolverTimeout.
        solver_path: External SMT-LIB2 binary, or None for z3 in process.
    """

    def __init__(self, timeout_s: float = 5.0, solver_path: Optional[str] = None):
        self.timeout_s = timeout_s
        self.solver_path = solver_path

    def check(self, constraints: Sequence[BoolRef], query: str = "reachability"
              ) -> Tuple[bool, SymbolValues, FunctionPoints]:
        """Decide satisfiability.

        Returns:
            (satisfiable, symbol values, uninterpreted-function points). The
            value maps are empty when unsatisfiable.

        Raises:
            SolverTimeout: The solver gave up or ran past the timeout.
            SolverUnavailable: The external binary could not be started.
        """
        with _sessions:
            if self.solver_path:
                return self._external(constraints, query)
            return self._in_process(constraints, query)

    def _in_process(self, constraints, query):
        solver = Solver()
        solver.set("timeout", max(1, int(self.timeout_s * 1000)))
        solver.add(*constraints)
        result = solver.check()
        if result == unsat:
            return False, {}, {}
        if result == unknown:
            raise SolverTimeout(query)
        model = solver.model()
        constants, applications = collect_terms(constraints)
        values = {str(c): model.eval(c, model_completion=True).as_long() for c in constants}
        points: FunctionPoints = {}
        for app in applications:
            if app.num_args() != 1:
                continue
            arg = model.eval(app.arg(0), model_completion=True)
            if is_bv_value(arg):
                points.setdefault(app.decl().name(), {})[arg.as_long()] = \
                    model.eval(app, model_completion=True).as_long()
        return True, values, points

    def _external(self, constraints, query):
        solver = Solver()
        solver.add(*constraints)
        constants, applications = collect_terms(constraints)
        script = [solver.sexpr(), "(check-sat)"]
        script.extend(f"(get-value (|{c}|))" for c in constants)
        try:
            completed = subprocess.run(
                [self.solver_path, "-in"] if os.path.basename(self.solver_path).startswith("z3")
                else [self.solver_path],
                input="(set-option :produce-models true)\n" + "\n".join(script) + "\n",
                capture_output=True, text=True, timeout=self.timeout_s + 1,
            )
        except subprocess.TimeoutExpired:
            raise SolverTimeout(query)
        except OSError as exc:
            raise SolverUnavailable(str(exc))
        lines = [ln.strip() for ln in completed.stdout.splitlines() if ln.strip()]
        if not lines or lines[0] not in ("sat", "unsat"):
            raise SolverTimeout(query)
        if lines[0] == "unsat":
            return False, {}, {}
        values: SymbolValues = {}
        for line in lines[1:]:
            match = _VALUE_LINE.match(line)
            if match:
                name, literal, decimal = match.groups()
                values[name.strip("|")] = _parse_literal(literal, decimal)
        logger.debug("external solver: sat, %d values, %d applications", len(values), len(applications))
        return True, values, {}


def _parse_literal(literal: str, decimal: Optional[str]) -> int:
    if decimal is not None:
        return int(decimal)
    if literal.startswith("#x"):
        return int(literal[2:], 16)
    return int(literal[2:], 2)


def is_satisfiable(constraints: Sequence[BoolRef], timeout_s: float = 5.0,
                   solver_path: Optional[str] = None, query: str = "feasibility") -> Optional[bool]:
    """True, False, or None when the solver could not decide in time."""
    try:
        return SolverSession(timeout_s, solver_path).check(constraints, query)[0]
    except SolverTimeout:
        return None
