"""
ingest.cache - On-disk cache of explorer payloads.

Layout under the cache root:

    blobs/<sha256>                       raw payload bytes, content addressed
    index/<chain>/<address>.json         {"blob": <sha256>, "fetched_at": <epoch>}
    sources/<chain>/<address>/<path>     normalized source files, for inspection

Readers never lock. Writers hold a per-key lock and publish with an atomic
rename, so a reader sees either the previous index entry or the new one.
"""

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from pathlib import Path
from typing import Dict, Iterable, Optional

from equiv_guard.errors import UnsafeSourcePath
from equiv_guard.ingest.models import SourceUnit

logger = logging.getLogger(__name__)


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class SourceCache:
    """Content-addressed cache keyed by (chain, address)."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self._locks: Dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _lock(self, key: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(key, threading.Lock())

    @staticmethod
    def _key(chain: str, address: str) -> str:
        return f"{chain}/{address.lower()}"

    def _index_path(self, chain: str, address: str) -> Path:
        return self.root / "index" / chain / f"{address.lower()}.json"

    def _source_path(self, chain: str, address: str, path: str) -> Path:
        base = (self.root / "sources" / chain / address.lower()).resolve()
        target = (base / path.lstrip("/")).resolve()
        if not target.is_relative_to(base):
            raise UnsafeSourcePath(path)
        return target

    def get(self, chain: str, address: str) -> Optional[bytes]:
        """Return the cached raw payload, or None on a miss."""
        index = self._index_path(chain, address)
        if not index.is_file():
            return None
        entry = json.loads(index.read_text(encoding="utf-8"))
        blob = self.root / "blobs" / entry["blob"]
        if not blob.is_file():
            logger.warning("cache index %s points at missing blob", index)
            return None
        return blob.read_bytes()

    def put(self, chain: str, address: str, payload: bytes,
            sources: Optional[Iterable[SourceUnit]] = None) -> str:
        """Store `payload` and point the (chain, address) index at it.

        Returns:
            The payload's sha256 digest.

        Raises:
            UnsafeSourcePath: A source path resolves outside its source directory;
                nothing is written.
        """
        digest = hashlib.sha256(payload).hexdigest()
        files = [(self._source_path(chain, address, unit.path), unit.content) for unit in sources or ()]
        with self._lock(self._key(chain, address)):
            blob = self.root / "blobs" / digest
            if not blob.exists():
                _atomic_write(blob, payload)
            for target, content in files:
                _atomic_write(target, content.encode("utf-8"))
            entry = {"blob": digest, "fetched_at": int(time.time())}
            _atomic_write(self._index_path(chain, address), json.dumps(entry).encode("utf-8"))
        logger.debug("cached %s/%s as %s", chain, address, digest[:12])
        return digest
