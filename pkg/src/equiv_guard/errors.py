"""
errors - Exception hierarchy shared by every equiv_guard phase.

Every error raised by the package derives from `EquivGuardError`, so callers
(the CLI in particular) can catch one type and map it to exit code 2. Errors
carry their payload as attributes; the message is built from the payload.
"""

from typing import List, Optional


class EquivGuardError(Exception):
    """Base exception for all equiv_guard errors."""
    pass


# --- Artifact ingest ---

class CompilerNotFound(EquivGuardError):
    """Raised when no solc binary matching a version can be located."""

    def __init__(self, version: str):
        self.version = version
        super().__init__(f"no solc binary found for version {version}")


class CompileError(EquivGuardError):
    """Raised when solc reports errors. Diagnostics are passed through verbatim."""

    def __init__(self, diagnostics: List[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("solc failed:\n" + "\n".join(self.diagnostics))


class ImportUnresolved(EquivGuardError):
    """Raised when an import does not resolve inside the given source set."""

    def __init__(self, path: str):
        self.path = path
        super().__init__(f"unresolved import: {path}")


class NotVerified(EquivGuardError):
    """Raised when an explorer has no verified source for an address."""

    def __init__(self, address: str):
        self.address = address
        super().__init__(f"no verified source published for {address}")


class RateLimited(EquivGuardError):
    """Raised when an explorer rejects a request for exceeding its rate limit."""

    def __init__(self, retry_after: Optional[float] = None):
        self.retry_after = retry_after
        super().__init__(f"explorer rate limit hit (retry after {retry_after}s)")


class NetworkError(EquivGuardError):
    """Raised for transport failures talking to an explorer."""
    pass


class UnsafeSourcePath(EquivGuardError):
    """Raised when a verified-source file name would escape its source directory."""

    def __init__(self, path: str):
        self.path = path
        super().__init__(f"unsafe source path: {path}")


class ManifestParseError(EquivGuardError):
    """Raised when a corpus manifest is not valid JSON or fails validation."""
    pass


# --- Bytecode and graphs ---

class TruncatedPush(EquivGuardError):
    """Raised when a PUSH immediate runs past the end of the code."""

    def __init__(self, offset: int):
        self.offset = offset
        super().__init__(f"truncated PUSH immediate at offset {offset}")


class PathBudgetExceeded(EquivGuardError):
    """Raised when path enumeration passes the configured cap."""

    def __init__(self, count: int):
        self.count = count
        super().__init__(f"path enumeration exceeded cap ({count} paths)")


# --- Symbolic execution ---

class BudgetExhausted(EquivGuardError):
    """Raised when symbolic execution runs out of steps or wall time."""

    def __init__(self, states: int):
        self.states = states
        super().__init__(f"symbolic budget exhausted after {states} states")


class UnresolvedJump(EquivGuardError):
    """Raised when a symbolic jump target cannot be concretized."""

    def __init__(self, offset: int):
        self.offset = offset
        super().__init__(f"unresolved jump at offset {offset}")


class SolverUnavailable(EquivGuardError):
    """Raised when the configured SMT solver cannot be started."""
    pass


class SolverTimeout(EquivGuardError):
    """Raised when a solver query exceeds its time limit."""

    def __init__(self, query: str):
        self.query = query
        super().__init__(f"solver timed out on query {query}")


# --- Detector runner ---

class PerContractTimeout(EquivGuardError):
    """Raised when a contract exceeds its analysis budget."""

    def __init__(self, contract: str, seconds: float):
        self.contract = contract
        self.seconds = seconds
        super().__init__(f"{contract}: analysis exceeded {seconds:g}s")
