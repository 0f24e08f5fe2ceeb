"""Guided symbolic execution over the recovered CFG and SMT verification of the reached state."""

from equiv_guard.symexec.executor import execute_path, guidance_from_path, storage_seeds, target_offsets
from equiv_guard.symexec.models import (
    Divergence,
    Guidance,
    SymbolicRegister,
    SymbolicState,
    UfTable,
    Verdict,
    VerdictStatus,
)
from equiv_guard.symexec.solver import SolverSession, is_satisfiable, resolve_solver_path
from equiv_guard.symexec.verifier import ALL_CHECKS, replay_model, verify

__all__ = [
    "ALL_CHECKS",
    "Divergence",
    "Guidance",
    "SymbolicRegister",
    "SymbolicState",
    "SolverSession",
    "UfTable",
    "Verdict",
    "VerdictStatus",
    "execute_path",
    "guidance_from_path",
    "is_satisfiable",
    "replay_model",
    "resolve_solver_path",
    "storage_seeds",
    "target_offsets",
    "verify",
]
