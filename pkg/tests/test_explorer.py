import json

import pytest
import requests
from eth_utils import to_checksum_address

from equiv_guard.errors import NetworkError, NotVerified, RateLimited, UnsafeSourcePath
from equiv_guard.ingest import explorer
from equiv_guard.ingest.cache import SourceCache
from equiv_guard.ingest.explorer import ExplorerClient, cache_namespace, endpoint_for, parse_payload
from equiv_guard.ingest.models import Chain, ExplorerQuery

ADDRESS = "0x6b7a87899490ece95443e979ca9485cbe7e71522"
CHECKSUMMED = to_checksum_address(ADDRESS)

SINGLE_FILE = {
    "status": "1",
    "message": "OK",
    "result": [{
        "SourceCode": "pragma solidity ^0.8.2;\ncontract AnyswapV5ERC20 {}\n",
        "ContractName": "AnyswapV5ERC20",
        "CompilerVersion": "v0.8.2+commit.661d1103",
        "OptimizationUsed": "1",
        "Runs": "999999",
        "EVMVersion": "Default",
    }],
}

STANDARD_JSON = {
    "language": "Solidity",
    "sources": {
        "contracts/B.sol": {"content": "pragma solidity ^0.8.0;\ncontract B {}\n"},
        "contracts/A.sol": {"content": "pragma solidity ^0.8.0;\nimport \"./B.sol\";\ncontract A is B {}\n"},
    },
    "settings": {"optimizer": {"enabled": False, "runs": 200}},
}

RATE_LIMITED = {"status": "0", "message": "NOTOK", "result": "Max rate limit reached"}


class FakeResponse:
    def __init__(self, body, status_code=200, headers=None):
        self.content = json.dumps(body).encode() if not isinstance(body, bytes) else body
        self.status_code = status_code
        self.headers = headers or {}


class FakeSession:
    """Replays canned responses and records every request."""

    def __init__(self, *responses):
        self.responses = list(responses)
        self.calls = []

    def get(self, url, params=None, timeout=None):
        self.calls.append((url, dict(params or {})))
        response = self.responses.pop(0)
        if isinstance(response, Exception):
            raise response
        return response


@pytest.fixture
def query():
    return ExplorerQuery(chain=Chain.BSC, address=ADDRESS, api_key="KEY")


@pytest.fixture(autouse=True)
def no_sleep(monkeypatch):
    monkeypatch.setattr(explorer.time, "sleep", lambda seconds: None)


# --- Queries ---

def test_query_checksums_address(query):
    assert query.address == CHECKSUMMED
    assert query.address != ADDRESS


def test_query_rejects_malformed_address():
    with pytest.raises(ValueError):
        ExplorerQuery(chain=Chain.ETHEREUM, address="0x1234")


def test_custom_chain_endpoint_and_namespace():
    custom = ExplorerQuery(chain=Chain.CUSTOM, address=ADDRESS, base_url="https://explorer.example/api")

    assert endpoint_for(custom) == "https://explorer.example/api"
    assert cache_namespace(custom).startswith("custom-")
    with pytest.raises(ValueError):
        endpoint_for(ExplorerQuery(chain=Chain.CUSTOM, address=ADDRESS))


# --- Payload parsing ---

def test_single_file_payload(query):
    verified = parse_payload(query, json.dumps(SINGLE_FILE).encode())

    assert verified.contract_name == "AnyswapV5ERC20"
    assert verified.compiler_version == "0.8.2"
    assert verified.settings.optimizer is True
    assert verified.settings.runs == 999999
    (unit,) = verified.sources
    assert unit.path == "AnyswapV5ERC20.sol"
    assert unit.declared_pragma == "^0.8.2"


def test_double_braced_standard_json_payload(query):
    body = json.loads(json.dumps(SINGLE_FILE))
    body["result"][0]["SourceCode"] = "{" + json.dumps(STANDARD_JSON) + "}"

    verified = parse_payload(query, json.dumps(body).encode())

    assert [u.path for u in verified.sources] == ["contracts/A.sol", "contracts/B.sol"]
    assert verified.settings.optimizer is False
    assert verified.settings.runs == 200


@pytest.mark.parametrize("path", ["../../escaped.sol", "contracts/../../x.sol", "..\\win.sol"])
def test_parent_segments_in_file_names_are_rejected(query, path):
    body = json.loads(json.dumps(SINGLE_FILE))
    body["result"][0]["SourceCode"] = json.dumps({"sources": {path: {"content": "contract X {}"}}})

    with pytest.raises(UnsafeSourcePath):
        parse_payload(query, json.dumps(body).encode())


def test_unverified_and_error_payloads(query):
    unverified = {"status": "0", "message": "NOTOK", "result": "Contract source code not verified"}
    empty = {"status": "1", "message": "OK", "result": [{"SourceCode": "", "ContractName": ""}]}

    with pytest.raises(NotVerified):
        parse_payload(query, json.dumps(unverified).encode())
    with pytest.raises(NotVerified):
        parse_payload(query, json.dumps(empty).encode())
    with pytest.raises(RateLimited):
        parse_payload(query, json.dumps(RATE_LIMITED).encode())
    with pytest.raises(NetworkError):
        parse_payload(query, b"<html>")


# --- Client ---

def test_fetch_caches_and_replays(tmp_path, query):
    session = FakeSession(FakeResponse(SINGLE_FILE))
    client = ExplorerClient(cache=SourceCache(tmp_path), session=session)

    first = client.fetch_verified(query)
    second = ExplorerClient(cache=SourceCache(tmp_path), session=FakeSession()).fetch_verified(query)

    assert first == second
    ((url, params),) = session.calls
    assert url == "https://api.bscscan.com/api"
    assert params == {"module": "contract", "action": "getsourcecode", "address": CHECKSUMMED, "apikey": "KEY"}
    assert (tmp_path / "sources" / "bsc" / ADDRESS / "AnyswapV5ERC20.sol").is_file()


def test_rate_limit_is_retried(query):
    session = FakeSession(
        FakeResponse({}, status_code=429, headers={"Retry-After": "1"}),
        FakeResponse(RATE_LIMITED),
        FakeResponse(SINGLE_FILE),
    )

    verified = ExplorerClient(session=session).fetch_verified(query)

    assert verified.contract_name == "AnyswapV5ERC20"
    assert len(session.calls) == 3


def test_rate_limit_gives_up_after_retries(query):
    session = FakeSession(*[FakeResponse({}, status_code=429, headers={"Retry-After": "2.5"})] * 3)

    with pytest.raises(RateLimited) as exc:
        ExplorerClient(session=session, max_retries=2).fetch_verified(query)
    assert exc.value.retry_after == 2.5


def test_transport_failure_and_http_error(query):
    broken = FakeSession(requests.exceptions.ConnectionError("connection refused"))
    with pytest.raises(NetworkError):
        ExplorerClient(session=broken).fetch_verified(query)

    failing = FakeSession(FakeResponse({}, status_code=502))
    with pytest.raises(NetworkError, match="HTTP 502"):
        ExplorerClient(session=failing).fetch_verified(query)
