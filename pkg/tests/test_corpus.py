import json

import pytest

from equiv_guard.errors import CompileError, ManifestParseError
from equiv_guard.ingest.corpus import load_manifest, normalize_corpus, read_local_sources
from equiv_guard.models import Smell
from solidity_dsl import SolAst


class FakeCompiler:
    """Stands in for solc: one empty contract per source file, named after the file."""

    def __init__(self, fail_on=()):
        self.fail_on = set(fail_on)
        self.calls = []

    def __call__(self, sources, version, settings):
        self.calls.append(([s.path for s in sources], version))
        artifacts = []
        for unit in sources:
            if unit.path in self.fail_on:
                raise CompileError([f"{unit.path}: ParserError: Expected ';'"])
            ast = SolAst(path=unit.path)
            artifacts.append(ast.artifact(ast.contract(unit.path.split("/")[-1][:-4], [])))
        return artifacts


def _write_manifest(tmp_path, entries):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"entries": entries}))
    return path


@pytest.fixture
def corpus_dir(tmp_path):
    (tmp_path / "fig4").mkdir()
    (tmp_path / "fig4" / "Fig4.sol").write_text("pragma solidity ^0.8.0;\ncontract Fig4 {}\n")
    (tmp_path / "fig4" / "lib").mkdir()
    (tmp_path / "fig4" / "lib" / "Sig.sol").write_text("pragma solidity >=0.8.4;\nlibrary Sig {}\n")
    (tmp_path / "Broken.sol").write_text("pragma solidity ^0.8.0;\ncontract Broken {\n")
    return tmp_path


def test_read_local_sources_walks_directories(corpus_dir):
    units = read_local_sources(corpus_dir / "fig4")

    assert [u.path for u in units] == ["Fig4.sol", "lib/Sig.sol"]
    (single,) = read_local_sources(corpus_dir / "Broken.sol")
    assert single.path == "Broken.sol"


def test_missing_source_path_raises(tmp_path):
    with pytest.raises(ManifestParseError):
        read_local_sources(tmp_path / "nowhere")


def test_manifest_entries_need_exactly_one_origin(tmp_path):
    both = _write_manifest(tmp_path, [{"name": "x", "source_dir": "a", "chain": "bsc", "address": "0x" + "11" * 20}])
    with pytest.raises(ManifestParseError, match="exactly one of"):
        load_manifest(both)

    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json")
    with pytest.raises(ManifestParseError):
        load_manifest(bad_json)


def test_normalize_corpus_collects_items_and_failures(corpus_dir, static_settings):
    manifest = _write_manifest(corpus_dir, [
        {"name": "fig4", "source_dir": "fig4", "labels": ["CCRA"]},
        {"name": "broken", "source_dir": "Broken.sol"},
        {"name": "only-sig", "source_dir": "fig4", "contract": "Sig", "solc_version": "0.8.19"},
        {"name": "remote", "chain": "ethereum", "address": "0x" + "11" * 20},
    ])
    compiler = FakeCompiler(fail_on={"Broken.sol"})

    load = normalize_corpus(manifest, static_settings, compiler=compiler)

    assert [i.name for i in load.items] == ["fig4", "only-sig"]
    fig4, only_sig = load.items
    assert fig4.labels == [Smell.CCRA]
    assert [a.contract_name for a in fig4.artifacts] == ["Fig4", "Sig"]
    assert [a.contract_name for a in only_sig.artifacts] == ["Sig"]
    assert {f.name: f.reason.split(":")[0] for f in load.failures} == {
        "broken": "CompileError",
        "remote": "ManifestParseError",
    }
    fig4_versions = sorted(v for paths, v in compiler.calls if paths == ["Fig4.sol", "lib/Sig.sol"])
    assert fig4_versions == ["0.8.19", "0.8.4"]
