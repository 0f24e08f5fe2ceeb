"""
ingest.corpus - Corpus manifests.

A manifest is one JSON document:

    {"entries": [
        {"name": "fig4", "source_dir": "contracts/fig4.sol", "labels": ["CCRA"]},
        {"name": "multichain", "chain": "ethereum", "address": "0x...", "solc_version": "0.8.2"}
    ]}

`source_dir` may name a directory (every *.sol below it) or a single file,
relative to the manifest. Entries that fail are collected, not raised.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, List, Optional

from pydantic import BaseModel, Field, ValidationError, model_validator

from equiv_guard.errors import EquivGuardError, ManifestParseError
from equiv_guard.ingest.compiler import compile_sources, make_source_unit, select_version
from equiv_guard.ingest.explorer import ExplorerClient
from equiv_guard.ingest.models import Chain, CompilationArtifact, ExplorerQuery, SourceUnit
from equiv_guard.models import Smell
from equiv_guard.settings import AnalysisSettings

logger = logging.getLogger(__name__)


class ManifestEntry(BaseModel):
    """One corpus entry: local sources or an explorer address."""
    name: str
    source_dir: Optional[str] = Field(default=None, description="Directory or .sol file, relative to the manifest")
    chain: Optional[Chain] = None
    address: Optional[str] = None
    base_url: Optional[str] = Field(default=None, description="Explorer endpoint for chain=custom")
    contract: Optional[str] = Field(default=None, description="Keep only this contract's artifact")
    solc_version: Optional[str] = None
    labels: List[Smell] = Field(default_factory=list)

    @model_validator(mode="after")
    def _one_origin(self) -> "ManifestEntry":
        local = self.source_dir is not None
        remote = self.chain is not None and self.address is not None
        if local == remote:
            raise ValueError(f"entry '{self.name}' needs exactly one of source_dir or (chain, address)")
        return self


class Manifest(BaseModel):
    entries: List[ManifestEntry] = Field(default_factory=list)


class CorpusItem(BaseModel):
    """Artifacts compiled from one manifest entry, with its labels."""
    name: str
    artifacts: List[CompilationArtifact]
    labels: List[Smell] = Field(default_factory=list)


class EntryFailure(BaseModel):
    name: str
    reason: str


class CorpusLoad(BaseModel):
    items: List[CorpusItem] = Field(default_factory=list)
    failures: List[EntryFailure] = Field(default_factory=list)


def load_manifest(path: Path) -> Manifest:
    """Read and validate a manifest file.

    Raises:
        ManifestParseError: Unreadable JSON or an invalid entry.
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ManifestParseError(f"{path}: {exc}") from exc
    try:
        return Manifest.model_validate(raw)
    except ValidationError as exc:
        raise ManifestParseError(f"{path}: {exc}") from exc


def read_local_sources(root: Path) -> List[SourceUnit]:
    """Load a .sol file, or every .sol file under a directory."""
    if root.is_file():
        return [make_source_unit(root.name, root.read_text(encoding="utf-8"))]
    if not root.is_dir():
        raise ManifestParseError(f"source path does not exist: {root}")
    return [
        make_source_unit(p.relative_to(root).as_posix(), p.read_text(encoding="utf-8"))
        for p in sorted(root.rglob("*.sol"))
    ]


Compiler = Callable[[List[SourceUnit], str, AnalysisSettings], List[CompilationArtifact]]


def _load_entry(entry: ManifestEntry, base: Path, settings: AnalysisSettings,
                client: Optional[ExplorerClient], compiler: Compiler) -> CorpusItem:
    if entry.source_dir is not None:
        sources = read_local_sources(base / entry.source_dir)
        version = select_version(sources, entry.solc_version)
        run_settings = settings
    else:
        if client is None:
            raise ManifestParseError(f"entry '{entry.name}' needs an explorer client")
        query = ExplorerQuery(chain=entry.chain, address=entry.address,
                              api_key=settings.explorer_key, base_url=entry.base_url)
        verified = client.fetch_verified(query)
        sources = verified.sources
        version = entry.solc_version or verified.compiler_version or select_version(sources)
        run_settings = settings.model_copy(update={
            "optimizer": verified.settings.optimizer,
            "optimizer_runs": verified.settings.runs,
        })
    artifacts = compiler(sources, version, run_settings)
    if entry.contract:
        artifacts = [a for a in artifacts if a.contract_name == entry.contract]
    return CorpusItem(name=entry.name, artifacts=artifacts, labels=entry.labels)


def normalize_corpus(manifest_path: Path, settings: AnalysisSettings,
                     client: Optional[ExplorerClient] = None,
                     compiler: Compiler = compile_sources) -> CorpusLoad:
    """Compile every manifest entry.

    Args:
        manifest_path: The manifest JSON file.
        settings: Analysis settings (compiler options, worker count).
        client: Explorer client for address entries.
        compiler: Compilation function; swapped out by tests.

    Returns:
        Compiled items in manifest order plus per-entry failures.

    Raises:
        ManifestParseError: The manifest itself is invalid.
    """
    manifest_path = Path(manifest_path)
    manifest = load_manifest(manifest_path)
    base = manifest_path.parent

    def job(entry: ManifestEntry):
        try:
            return _load_entry(entry, base, settings, client, compiler)
        except (EquivGuardError, ValueError, OSError) as exc:
            logger.warning("corpus entry %s failed: %s", entry.name, exc)
            return EntryFailure(name=entry.name, reason=f"{type(exc).__name__}: {exc}")

    load = CorpusLoad()
    with ThreadPoolExecutor(max_workers=max(1, settings.workers)) as pool:
        for outcome in pool.map(job, manifest.entries):
            if isinstance(outcome, EntryFailure):
                load.failures.append(outcome)
            else:
                load.items.append(outcome)
    return load
