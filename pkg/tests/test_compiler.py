import json

import pytest

from equiv_guard.errors import CompilerNotFound, ImportUnresolved
from equiv_guard.ingest.compiler import (
    artifacts_from_output,
    check_imports,
    locate_solc,
    make_source_unit,
    parse_pragma,
    select_version,
    standard_input,
)
from equiv_guard.ingest.models import CompilerSettings
from equiv_guard.settings import load_settings
from solidity_dsl import SolAst

TRANSFER_ABI = {
    "type": "function",
    "name": "transfer",
    "inputs": [{"name": "to", "type": "address"}, {"name": "amount", "type": "uint256"}],
    "outputs": [{"name": "", "type": "bool"}],
    "stateMutability": "nonpayable",
}


def _unit(path, pragma="^0.8.0", body=""):
    return make_source_unit(path, f"pragma solidity {pragma};\n{body}\ncontract X {{}}\n")


# --- Versions ---

def test_parse_pragma_normalizes_whitespace():
    assert parse_pragma("pragma solidity  >=0.6.0   <0.9.0;") == ">=0.6.0 <0.9.0"
    assert parse_pragma("contract A {}") is None


def test_select_version_takes_minimum_satisfying_release():
    assert select_version([_unit("A.sol", "^0.8.0")]) == "0.8.0"
    assert select_version([_unit("A.sol", ">=0.6.0<0.9.0"), _unit("B.sol", "^0.7.2")]) == "0.7.2"


def test_select_version_pinned_wins():
    assert select_version([_unit("A.sol", "^0.8.0")], "v0.8.19+commit.7dd6d404") == "0.8.19"


def test_select_version_unsatisfiable():
    with pytest.raises(CompilerNotFound):
        select_version([_unit("A.sol", "^0.8.0"), _unit("B.sol", "^0.6.0")])


# --- Imports ---

def test_relative_and_absolute_imports_resolve_inside_the_set():
    units = [
        _unit("contracts/Token.sol", body='import "./lib/Math.sol";\nimport {Ownable} from "access/Ownable.sol";'),
        _unit("contracts/lib/Math.sol"),
        _unit("access/Ownable.sol"),
    ]
    check_imports(units)


def test_import_outside_the_set_raises():
    units = [_unit("Token.sol", body='import "@openzeppelin/contracts/token/ERC20/ERC20.sol";')]

    with pytest.raises(ImportUnresolved) as exc:
        check_imports(units)
    assert exc.value.path == "@openzeppelin/contracts/token/ERC20/ERC20.sol"


# --- Binary lookup and input ---

def test_explicit_solc_path_short_circuits_lookup():
    settings = load_settings(solc_path="/opt/solc/solc-0.8.19")

    assert locate_solc("0.8.19", settings, install=False) == "/opt/solc/solc-0.8.19"


def test_standard_input_carries_optimizer_settings():
    settings = load_settings(optimizer=True, optimizer_runs=999)
    payload = standard_input([_unit("B.sol"), _unit("A.sol")], settings)

    assert list(payload["sources"]) == ["A.sol", "B.sol"]
    assert payload["settings"]["optimizer"] == {"enabled": True, "runs": 999}
    assert "evm.deployedBytecode.sourceMap" in payload["settings"]["outputSelection"]["*"]["*"]


# --- Output conversion ---

def _solc_output():
    ast = SolAst(path="Token.sol")
    owner = ast.var("owner", "address")
    token = ast.contract("Token", [owner])
    iface = ast.contract("IToken", [], kind="interface")
    unit = ast.unit(iface, token)
    output = {
        "sources": {"Token.sol": {"id": 0, "ast": unit}},
        "contracts": {"Token.sol": {
            "Token": {
                "abi": [TRANSFER_ABI, {"type": "event", "name": "Transfer", "inputs": []}],
                "metadata": json.dumps({"compiler": {"version": "0.8.19+commit.7dd6d404"}}),
                "storageLayout": {
                    "storage": [{"label": "owner", "contract": "Token.sol:Token", "slot": "0",
                                 "offset": 0, "type": "t_address"}],
                    "types": {"t_address": {"label": "address"}},
                },
                "evm": {"deployedBytecode": {"object": "6080604052", "sourceMap": "0:10:0:-;;"}},
            },
            "IToken": {"abi": [], "evm": {"deployedBytecode": {"object": ""}}},
        }},
    }
    return ast, output


def test_artifacts_from_output_builds_one_artifact_per_concrete_contract():
    ast, output = _solc_output()
    source = make_source_unit("Token.sol", ast.text)

    (artifact,) = artifacts_from_output(output, [source], CompilerSettings(version="0.8.19"))

    assert artifact.contract_name == "Token"
    assert artifact.source_path == "Token.sol"
    assert artifact.deployed_bytecode == bytes.fromhex("6080604052")
    assert len(artifact.source_map) == 3
    assert artifact.compiler_version == "0.8.19+commit.7dd6d404"
    (fn,) = artifact.abi
    assert fn.signature == "transfer(address,uint256)"
    assert fn.selector == "0xa9059cbb"
    assert artifact.selectors == ["0xa9059cbb"]
    (slot,) = artifact.storage_layout
    assert (slot.label, slot.slot, slot.type_label) == ("owner", 0, "address")
    assert artifact.sources[0].path == "Token.sol"
