#!/usr/bin/env python
"""
main - The `equiv-guard` command line.

    equiv-guard analyze contracts/fig4.sol --format json
    equiv-guard analyze --chain bsc --address 0x... --detectors ccra,pca
    equiv-guard corpus tests/fixtures/manifest.json
    equiv-guard schema

Exit codes: 0 no findings, 1 findings, 2 analysis or usage error.
"""

import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from equiv_guard import __version__
from equiv_guard.cfg.models import Cfg
from equiv_guard.detectors.runner import analyze_contract, recover_cfg
from equiv_guard.errors import EquivGuardError
from equiv_guard.ingest.cache import SourceCache
from equiv_guard.ingest.compiler import compile_sources, select_version
from equiv_guard.ingest.corpus import read_local_sources
from equiv_guard.ingest.explorer import ExplorerClient
from equiv_guard.ingest.models import Chain, CompilationArtifact, ExplorerQuery
from equiv_guard.ipdg.builder import build_ipdg
from equiv_guard.models import AnalysisMode
from equiv_guard.report.batch import run_corpus
from equiv_guard.report.metrics import format_ratio
from equiv_guard.report.models import InputDescriptor, Report
from equiv_guard.report.sarif import emit_sarif
from equiv_guard.report.text import render_stats, render_text
from equiv_guard.settings import AnalysisSettings, load_settings

logger = logging.getLogger("equiv_guard")

EXIT_CLEAN = 0
EXIT_FINDINGS = 1
EXIT_ERROR = 2

console = Console()
err_console = Console(stderr=True)


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


def _write(text: str, out: Optional[Path]) -> None:
    if out is None:
        click.echo(text, nl=False)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        err_console.print(f"[bold blue]Report written to {out}[/bold blue]")


def _render(report: Report, fmt: str, verbose: bool) -> str:
    if fmt == "json":
        return report.model_dump_json(indent=2) + "\n"
    if fmt == "sarif":
        return json.dumps(emit_sarif(report), indent=2) + "\n"
    return render_text(report, with_diagnostics=verbose)


def _artifacts(path: Optional[Path], chain: Optional[str], address: Optional[str], base_url: Optional[str],
               solc: Optional[str], settings: AnalysisSettings) -> List[CompilationArtifact]:
    if path is not None:
        sources = read_local_sources(path)
        return compile_sources(sources, select_version(sources, solc), settings)
    query = ExplorerQuery(chain=Chain(chain), address=address, api_key=settings.explorer_key, base_url=base_url)
    client = ExplorerClient(cache=SourceCache(settings.cache_dir))
    verified = client.fetch_verified(query)
    settings = settings.model_copy(update={"optimizer": verified.settings.optimizer,
                                           "optimizer_runs": verified.settings.runs})
    version = solc or verified.compiler_version or select_version(verified.sources)
    return compile_sources(verified.sources, version, settings)


def _dump(artifact: CompilationArtifact, settings: AnalysisSettings,
          cfg_dir: Optional[Path], ipdg_dir: Optional[Path]) -> None:
    if cfg_dir is not None:
        cfg: Optional[Cfg] = recover_cfg(artifact, settings, [])
        if cfg is not None:
            cfg_dir.mkdir(parents=True, exist_ok=True)
            (cfg_dir / f"{artifact.contract_name}.dot").write_text(cfg.to_dot(), encoding="utf-8")
    if ipdg_dir is not None:
        ipdg_dir.mkdir(parents=True, exist_ok=True)
        (ipdg_dir / f"{artifact.contract_name}.ipdg").write_text(build_ipdg([artifact]).canonical(), encoding="utf-8")


# --- Commands ---

@click.group()
@click.version_option(__version__, prog_name="equiv-guard")
def cli():
    """Detect EVM-inequivalent code smells in Solidity contracts."""
    pass


@cli.command()
@click.argument("path", required=False, type=click.Path(exists=True, path_type=Path))
@click.option("--chain", type=click.Choice([c.value for c in Chain]), help="Fetch verified source from this chain.")
@click.option("--address", help="Contract address to fetch.")
@click.option("--base-url", help="Explorer API endpoint for --chain custom.")
@click.option("--solc", help="Compiler version, e.g. 0.8.19.")
@click.option("--detectors", help="Comma-separated subset of ccra,tdt,pca,gli,fgr,bhm.")
@click.option("--timeout", "timeout_s", type=float, help="Per-contract budget in seconds (default 60).")
@click.option("--solver-timeout", "solver_timeout_s", type=float, help="Per solver query in seconds (default 5).")
@click.option("--mode", type=click.Choice([m.value for m in AnalysisMode]), help="Which filtering stages run.")
@click.option("--unroll", type=int, help="Loop unrolling bound (default 2).")
@click.option("--optimizer/--no-optimizer", default=None, help="Compile with the optimizer.")
@click.option("--format", "fmt", type=click.Choice(["text", "json", "sarif"]), default="text", show_default=True)
@click.option("--out", type=click.Path(path_type=Path), help="Write the report here instead of standard output.")
@click.option("--cfg-dump", type=click.Path(file_okay=False, path_type=Path), help="Write one DOT file per contract.")
@click.option("--ipdg-dump", type=click.Path(file_okay=False, path_type=Path), help="Write the canonical I-PDG text.")
@click.option("--verbose", is_flag=True, help="Debug logging and diagnostics in text output.")
def analyze(path, chain, address, base_url, solc, detectors, timeout_s, solver_timeout_s, mode, unroll,
            optimizer, fmt, out, cfg_dump, ipdg_dump, verbose):
    """Analyse a local file or directory, or a verified contract fetched by address."""
    _configure_logging(verbose)
    if (path is None) == (chain is None or address is None):
        raise click.UsageError("give either PATH or both --chain and --address")
    if chain == Chain.CUSTOM.value and not base_url:
        raise click.UsageError("--chain custom needs --base-url")
    try:
        settings = load_settings(detectors=detectors, timeout_s=timeout_s, solver_timeout_s=solver_timeout_s,
                                 mode=mode, unroll=unroll, optimizer=optimizer)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc

    try:
        artifacts = _artifacts(path, chain, address, base_url, solc, settings)
        report = Report(
            input=InputDescriptor(path=str(path) if path else None, chain=chain, address=address),
            mode=settings.mode.value,
        )
        for artifact in artifacts:
            _dump(artifact, settings, cfg_dump, ipdg_dump)
            report.add(analyze_contract(artifact, settings))
            report.compiler = artifact.settings
    except EquivGuardError as exc:
        err_console.print(f"[bold red]error:[/bold red] {exc}")
        sys.exit(EXIT_ERROR)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc

    _write(_render(report, fmt, verbose), out)
    sys.exit(EXIT_FINDINGS if report.findings else EXIT_CLEAN)


@cli.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--detectors", help="Comma-separated subset of ccra,tdt,pca,gli,fgr,bhm.")
@click.option("--mode", type=click.Choice([m.value for m in AnalysisMode]), help="Which filtering stages run.")
@click.option("--timeout", "timeout_s", type=float, help="Per-contract budget in seconds.")
@click.option("--workers", type=int, help="Worker processes (default: logical cores).")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text", show_default=True)
@click.option("--out", type=click.Path(path_type=Path), help="Write statistics JSON here.")
@click.option("--verbose", is_flag=True)
def corpus(manifest, detectors, mode, timeout_s, workers, fmt, out, verbose):
    """Run every manifest entry and score the findings against its labels."""
    _configure_logging(verbose)
    try:
        settings = load_settings(detectors=detectors, mode=mode, timeout_s=timeout_s, workers=workers)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    try:
        run = run_corpus(manifest, settings, client=ExplorerClient(cache=SourceCache(settings.cache_dir)))
    except EquivGuardError as exc:
        err_console.print(f"[bold red]error:[/bold red] {exc}")
        sys.exit(EXIT_ERROR)

    stats = run.stats
    if fmt == "json":
        payload: Dict[str, Any] = {"stats": stats.model_dump(mode="json"),
                                   "entries": [e.model_dump(mode="json") for e in run.entries]}
        _write(json.dumps(payload, indent=2) + "\n", out)
        return

    table = Table(title=f"{manifest.name}: {stats.entries} entries, {len(stats.failures)} failed")
    for column in ("Smell", "TP", "FP", "FN", "Precision", "Recall"):
        table.add_column(column, justify="left" if column == "Smell" else "right")
    for s in stats.per_smell:
        table.add_row(s.smell.value, str(s.tp), str(s.fp), str(s.fn), format_ratio(s.precision), format_ratio(s.recall))
    table.add_row("Overall", "", "", "", format_ratio(stats.weighted_precision), format_ratio(stats.recall))
    if console.is_terminal:
        console.print(table)
    else:
        click.echo(render_stats(stats), nl=False)
    if out is not None:
        out.write_text(stats.model_dump_json(indent=2) + "\n", encoding="utf-8")


@cli.command()
def schema():
    """Print the JSON schema of the analysis report."""
    click.echo(json.dumps(Report.model_json_schema(), indent=2))


if __name__ == "__main__":
    cli()
