import hashlib
import json

import pytest

from equiv_guard.errors import UnsafeSourcePath
from equiv_guard.ingest.cache import SourceCache
from equiv_guard.ingest.compiler import make_source_unit


def test_miss_then_hit(tmp_path):
    cache = SourceCache(tmp_path)

    assert cache.get("ethereum", "0xAbC") is None
    digest = cache.put("ethereum", "0xAbC", b'{"status": "1"}')

    assert digest == hashlib.sha256(b'{"status": "1"}').hexdigest()
    assert cache.get("ethereum", "0xabc") == b'{"status": "1"}'
    assert cache.get("bsc", "0xabc") is None


def test_layout_on_disk(tmp_path):
    cache = SourceCache(tmp_path)
    unit = make_source_unit("contracts/Token.sol", "contract Token {}\n")

    digest = cache.put("bsc", "0xDEAD", b"payload", [unit])

    assert (tmp_path / "blobs" / digest).read_bytes() == b"payload"
    index = json.loads((tmp_path / "index" / "bsc" / "0xdead.json").read_text())
    assert index["blob"] == digest
    assert (tmp_path / "sources" / "bsc" / "0xdead" / "contracts" / "Token.sol").read_text() == "contract Token {}\n"


def test_index_pointing_at_missing_blob_is_a_miss(tmp_path):
    cache = SourceCache(tmp_path)
    digest = cache.put("ethereum", "0x01", b"payload")
    (tmp_path / "blobs" / digest).unlink()

    assert cache.get("ethereum", "0x01") is None


def test_rewrite_repoints_index(tmp_path):
    cache = SourceCache(tmp_path)
    cache.put("ethereum", "0x01", b"old")
    cache.put("ethereum", "0x01", b"new")

    assert cache.get("ethereum", "0x01") == b"new"
    assert not list((tmp_path / "index" / "ethereum").glob(".tmp-*"))


def test_source_path_cannot_leave_the_cache(tmp_path):
    cache = SourceCache(tmp_path / "cache")
    escaping = make_source_unit("../../../../escaped.sol", "contract Escaped {}\n")

    with pytest.raises(UnsafeSourcePath):
        cache.put("ethereum", "0x01", b"payload", [escaping])

    assert not (tmp_path / "escaped.sol").exists()
    assert cache.get("ethereum", "0x01") is None
