"""Whole pipeline on real compiler output. Skipped when no solc is installed."""

from pathlib import Path

import pytest

from equiv_guard.detectors import Confidence, analyze_contract
from equiv_guard.ingest.compiler import compile_sources, select_version
from equiv_guard.ingest.corpus import read_local_sources
from equiv_guard.models import Smell
from equiv_guard.report import run_corpus

pytestmark = pytest.mark.requires_solc

FIXTURES = Path(__file__).parent / "fixtures"

POSITIVES = [
    ("Fig4.sol", "Fig4", Smell.CCRA),
    ("Fig5.sol", "Fig5", Smell.TDT),
    ("Fig6.sol", "SwapToken", Smell.PCA),
    ("Fig7.sol", "Fig7", Smell.GLI),
    ("Fig8.sol", "Fig8", Smell.FGR),
    ("Fig9.sol", "Fig9", Smell.BHM),
]


def _compile(file_name, contract, settings):
    sources = read_local_sources(FIXTURES / file_name)
    artifacts = compile_sources(sources, select_version(sources), settings)
    return next(a for a in artifacts if a.contract_name == contract)


@pytest.mark.parametrize("file_name, contract, smell", POSITIVES, ids=[p[0] for p in POSITIVES])
def test_static_detection_on_compiled_examples(file_name, contract, smell, static_settings):
    analysis = analyze_contract(_compile(file_name, contract, static_settings), static_settings)

    assert [f.smell for f in analysis.findings] == [smell]
    assert analysis.findings[0].file == file_name


@pytest.mark.parametrize("file_name, contract, smell", POSITIVES, ids=[p[0] for p in POSITIVES])
def test_symbolic_verification_keeps_true_positives(file_name, contract, smell, full_settings):
    artifact = _compile(file_name, contract, full_settings)

    analysis = analyze_contract(artifact, full_settings)

    assert artifact.deployed_bytecode
    (finding,) = [f for f in analysis.findings if f.smell == smell]
    assert finding.confidence in (Confidence.CONFIRMED, Confidence.LIKELY)


@pytest.mark.parametrize("file_name, contract", [("Fig4Fixed.sol", "Fig4Fixed"), ("Fig8Fixed.sol", "Fig8Fixed")])
def test_fixed_versions_stay_clean(file_name, contract, full_settings):
    analysis = analyze_contract(_compile(file_name, contract, full_settings), full_settings)

    assert analysis.findings == []


def test_fixture_corpus_scores_perfectly(static_settings):
    run = run_corpus(FIXTURES / "manifest.json", static_settings)

    assert run.stats.failures == []
    assert run.stats.entries == 8
    assert run.stats.weighted_precision == 1.0
    assert run.stats.recall == 1.0
