"""
ingest.compiler - Driving solc through its standard JSON interface.

Version selection honors the minimum release that satisfies every pragma in
the source set (a manifest or the CLI may pin a version instead). Binary
lookup goes: explicit path, solc-select artifact, `solc-<version>` on PATH,
py-solc-x installs, `solc` on PATH with a matching `--version`, and finally a
py-solc-x install.
"""

import hashlib
import json
import logging
import posixpath
import re
import shutil
import subprocess
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import solcx
from eth_utils import abi_to_signature, function_abi_to_4byte_selector
from semantic_version import NpmSpec, Version
from solcx.exceptions import SolcError, SolcInstallationError, SolcNotInstalled

from equiv_guard.errors import CompileError, CompilerNotFound, ImportUnresolved
from equiv_guard.ingest.ast import normalize_ast
from equiv_guard.ingest.models import (
    AbiFunction,
    AstKind,
    AstNode,
    CompilationArtifact,
    CompilerSettings,
    SourceUnit,
    StorageSlot,
)
from equiv_guard.ingest.sourcemap import decompress_source_map
from equiv_guard.settings import AnalysisSettings

logger = logging.getLogger(__name__)

PRAGMA_RE = re.compile(r"pragma\s+solidity\s+([^;]+);")
IMPORT_RE = re.compile(r"""import\s+(?:[^'";]*?\s+from\s+)?["']([^"']+)["']""")
VERSION_RE = re.compile(r"(\d+\.\d+\.\d+)")

_RELEASE_SERIES = {(0, 4): range(11, 27), (0, 5): range(0, 18), (0, 6): range(0, 13),
                   (0, 7): range(0, 7), (0, 8): range(0, 29)}
KNOWN_RELEASES = sorted(
    Version(major=major, minor=minor, patch=patch)
    for (major, minor), patches in _RELEASE_SERIES.items()
    for patch in patches
)

OUTPUT_SELECTION = {
    "*": {
        "*": [
            "abi",
            "metadata",
            "storageLayout",
            "evm.deployedBytecode.object",
            "evm.deployedBytecode.sourceMap",
        ],
        "": ["ast"],
    }
}


# --- Sources and versions ---

def parse_pragma(content: str) -> Optional[str]:
    """Return the `pragma solidity` range of a file, or None."""
    match = PRAGMA_RE.search(content)
    if not match:
        return None
    return " ".join(match.group(1).split())


def make_source_unit(path: str, content: str) -> SourceUnit:
    """Build a `SourceUnit`, deriving its id and pragma from the content."""
    return SourceUnit(
        id=hashlib.sha256(content.encode("utf-8")).hexdigest(),
        path=path,
        content=content,
        declared_pragma=parse_pragma(content),
    )


def _spec(pragma: str) -> NpmSpec:
    # solc accepts `>=0.6.0<0.9.0`; npm needs the space
    return NpmSpec(re.sub(r"(\d)([<>=^~])", r"\1 \2", pragma))


def select_version(sources: Iterable[SourceUnit], pinned: Optional[str] = None) -> str:
    """Pick the compiler version for a source set.

    Args:
        sources: The units to be compiled together.
        pinned: Version forced by the caller; returned unchanged when given.

    Returns:
        The minimum known release satisfying every declared pragma.

    Raises:
        CompilerNotFound: When no known release satisfies all pragmas.
    """
    if pinned:
        return pinned.lstrip("v").split("+")[0]
    pragmas = [s.declared_pragma for s in sources if s.declared_pragma]
    specs = [_spec(p) for p in pragmas]
    for release in KNOWN_RELEASES:
        if all(release in spec for spec in specs):
            return str(release)
    raise CompilerNotFound(" && ".join(pragmas) or "<none>")


def check_imports(sources: Iterable[SourceUnit]) -> None:
    """Raise ImportUnresolved if any import escapes the source set."""
    units = list(sources)
    paths = {posixpath.normpath(s.path) for s in units}
    for unit in units:
        for target in IMPORT_RE.findall(unit.content):
            if target.startswith("."):
                resolved = posixpath.normpath(posixpath.join(posixpath.dirname(unit.path), target))
            else:
                resolved = posixpath.normpath(target)
            if resolved not in paths:
                raise ImportUnresolved(target)


# --- Binary lookup ---

def _binary_version(binary: str) -> Optional[str]:
    try:
        out = subprocess.run([binary, "--version"], capture_output=True, text=True, timeout=10).stdout
    except (OSError, subprocess.SubprocessError):
        return None
    match = VERSION_RE.search(out.split("Version:")[-1])
    return match.group(1) if match else None


def locate_solc(version: str, settings: Optional[AnalysisSettings] = None, install: bool = True) -> str:
    """Find (or install) a solc binary for `version`.

    Raises:
        CompilerNotFound: When nothing matching can be found or installed.
    """
    if settings is not None and settings.solc_path:
        return settings.solc_path

    artifact = Path.home() / ".solc-select" / "artifacts" / f"solc-{version}" / f"solc-{version}"
    if artifact.is_file():
        return str(artifact)

    versioned = shutil.which(f"solc-{version}")
    if versioned:
        return versioned

    try:
        return str(solcx.get_executable(version))
    except (SolcNotInstalled, ValueError):
        pass

    on_path = shutil.which("solc")
    if on_path and _binary_version(on_path) == version:
        return on_path

    if install:
        try:
            logger.info("installing solc %s", version)
            solcx.install_solc(version)
            return str(solcx.get_executable(version))
        except (SolcInstallationError, SolcNotInstalled, OSError, ValueError) as exc:
            logger.warning("solc %s install failed: %s", version, exc)
    raise CompilerNotFound(version)


# --- Compilation ---

def standard_input(sources: Iterable[SourceUnit], settings: Optional[AnalysisSettings] = None) -> Dict[str, Any]:
    """Build the solc standard JSON input for a source set."""
    optimizer = settings.optimizer if settings else False
    runs = settings.optimizer_runs if settings else 200
    return {
        "language": "Solidity",
        "sources": {s.path: {"content": s.content} for s in sorted(sources, key=lambda s: s.path)},
        "settings": {
            "optimizer": {"enabled": optimizer, "runs": runs},
            "outputSelection": OUTPUT_SELECTION,
        },
    }


def compile_sources(sources: Iterable[SourceUnit], version: str,
                    settings: Optional[AnalysisSettings] = None) -> List[CompilationArtifact]:
    """Compile a closed source set with solc `version`.

    Args:
        sources: Units forming a closed import set.
        version: Compiler version to run.
        settings: Optimizer settings and explicit binary; defaults when None.

    Returns:
        One artifact per concrete contract, ordered by (path, name).

    Raises:
        CompilerNotFound: No matching binary.
        ImportUnresolved: An import points outside the source set.
        CompileError: solc reported errors; its messages are passed through.
    """
    units = list(sources)
    if not units:
        return []
    check_imports(units)
    binary = locate_solc(version, settings)
    payload = standard_input(units, settings)
    logger.debug("compiling %d sources with %s", len(units), binary)
    try:
        output = solcx.compile_standard(payload, solc_binary=binary, allow_empty=True)
    except SolcError as exc:
        errors = getattr(exc, "error_dict", None) or []
        for err in errors:
            message = err.get("message", "")
            if "not found" in message and err.get("type") in ("ParserError", "DeclarationError"):
                found = re.search(r'"([^"]+)"', message)
                raise ImportUnresolved(found.group(1) if found else message) from exc
        diagnostics = [e.get("formattedMessage") or e.get("message", "") for e in errors] or [str(exc)]
        raise CompileError(diagnostics) from exc

    compiler = CompilerSettings(
        version=version,
        optimizer=payload["settings"]["optimizer"]["enabled"],
        runs=payload["settings"]["optimizer"]["runs"],
    )
    return artifacts_from_output(output, units, compiler)


def _abi_functions(abi: List[Dict[str, Any]]) -> List[AbiFunction]:
    functions = []
    for item in abi:
        if item.get("type") != "function":
            continue
        functions.append(AbiFunction(
            name=item["name"],
            signature=abi_to_signature(item),
            selector="0x" + function_abi_to_4byte_selector(item).hex(),
            state_mutability=item.get("stateMutability", "nonpayable"),
        ))
    return sorted(functions, key=lambda f: f.selector)


def _storage(layout: Optional[Dict[str, Any]]) -> List[StorageSlot]:
    if not layout:
        return []
    types = layout.get("types") or {}
    return [
        StorageSlot(
            label=entry["label"],
            contract=entry.get("contract", ""),
            slot=int(entry["slot"]),
            offset=int(entry.get("offset", 0)),
            type_label=(types.get(entry.get("type"), {}) or {}).get("label", entry.get("type", "")),
        )
        for entry in layout.get("storage", [])
    ]


def artifacts_from_output(output: Dict[str, Any], sources: Iterable[SourceUnit],
                          compiler: CompilerSettings) -> List[CompilationArtifact]:
    """Turn a solc standard JSON output into artifacts.

    Interfaces, abstract contracts and libraries are skipped; so is anything
    with empty deployed bytecode.
    """
    by_path = {s.path: s for s in sources}
    units: Dict[int, AstNode] = {}
    indexed: Dict[int, SourceUnit] = {}
    unknown: set = set()
    for path, info in (output.get("sources") or {}).items():
        index = int(info["id"])
        units[index] = normalize_ast(info["ast"], on_unknown=unknown.add)
        if path in by_path:
            indexed[index] = by_path[path]
    if unknown:
        logger.debug("unmapped AST node types: %s", sorted(unknown))
    ast_units = [units[i] for i in sorted(units)]

    definitions: Dict[tuple, AstNode] = {}
    for index, unit in units.items():
        path = indexed[index].path if index in indexed else unit.attr("absolute_path")
        for node in unit.children:
            if node.kind == AstKind.CONTRACT:
                definitions[(path, node.name)] = node

    artifacts: List[CompilationArtifact] = []
    for path in sorted(output.get("contracts") or {}):
        for name in sorted(output["contracts"][path]):
            data = output["contracts"][path][name]
            node = definitions.get((path, name))
            if node is None:
                continue
            if node.attr("contract_kind") in ("interface", "library") or node.attr("abstract"):
                continue
            deployed = (data.get("evm") or {}).get("deployedBytecode") or {}
            code_hex = deployed.get("object") or ""
            if not code_hex:
                continue
            version = compiler.version
            metadata = data.get("metadata")
            if metadata:
                meta = json.loads(metadata) if isinstance(metadata, str) else metadata
                version = (meta.get("compiler") or {}).get("version", version)
            artifacts.append(CompilationArtifact(
                contract_name=name,
                source_path=path,
                ast_root=node,
                ast_units=ast_units,
                sources=indexed,
                deployed_bytecode=bytes.fromhex(code_hex.removeprefix("0x")),
                source_map=decompress_source_map(deployed.get("sourceMap") or ""),
                abi=_abi_functions(data.get("abi") or []),
                storage_layout=_storage(data.get("storageLayout")),
                compiler_version=version,
                settings=compiler,
            ))
    logger.info("compiled %d artifact(s)", len(artifacts))
    return artifacts
