"""
ingest.explorer - Verified-source client for Etherscan-family explorers.

The client is cache first: a hit never touches the network. Raw response
bodies are cached verbatim, so a replay parses the exact bytes the explorer
returned.
"""

import hashlib
import json
import logging
import random
import time
from pathlib import PurePosixPath
from typing import Any, Dict, List, Optional, Tuple

import requests

from equiv_guard.errors import NetworkError, NotVerified, RateLimited, UnsafeSourcePath
from equiv_guard.ingest.cache import SourceCache
from equiv_guard.ingest.compiler import make_source_unit
from equiv_guard.ingest.models import Chain, CompilerSettings, ExplorerQuery, SourceUnit, VerifiedSource

logger = logging.getLogger(__name__)

BASE_URLS: Dict[Chain, str] = {
    Chain.ETHEREUM: "https://api.etherscan.io/api",
    Chain.BSC: "https://api.bscscan.com/api",
    Chain.POLYGON: "https://api.polygonscan.com/api",
    Chain.ARBITRUM: "https://api.arbiscan.io/api",
    Chain.OPTIMISM: "https://api-optimistic.etherscan.io/api",
    Chain.AVALANCHE: "https://api.routescan.io/v2/network/mainnet/evm/43114/etherscan/api",
}


def endpoint_for(query: ExplorerQuery) -> str:
    if query.chain == Chain.CUSTOM:
        if not query.base_url:
            raise ValueError("custom chain needs a base_url")
        return query.base_url
    return BASE_URLS[query.chain]


def cache_namespace(query: ExplorerQuery) -> str:
    """Cache directory name for a query's chain."""
    if query.chain == Chain.CUSTOM:
        return "custom-" + hashlib.sha256(endpoint_for(query).encode()).hexdigest()[:12]
    return query.chain.value


def _bare_version(text: str) -> str:
    return text.strip().lstrip("v").split("+")[0]


def _unit(path: str, content: str) -> SourceUnit:
    if ".." in PurePosixPath(path.replace("\\", "/")).parts:
        raise UnsafeSourcePath(path)
    return make_source_unit(path, content)


def _split_sources(name: str, raw: str) -> Tuple[List[SourceUnit], Optional[Dict[str, Any]]]:
    """Decode the three SourceCode encodings explorers use."""
    text = raw.strip()
    if text.startswith("{{") and text.endswith("}}"):
        doc = json.loads(text[1:-1])
        files = doc.get("sources", {})
        return [_unit(p, v["content"]) for p, v in sorted(files.items())], doc.get("settings")
    if text.startswith("{"):
        doc = json.loads(text)
        files = doc.get("sources", doc)
        return [_unit(p, v["content"]) for p, v in sorted(files.items())], doc.get("settings")
    return [_unit(f"{name}.sol", raw)], None


def parse_payload(query: ExplorerQuery, payload: bytes) -> VerifiedSource:
    """Parse an explorer `getsourcecode` response body.

    Raises:
        NotVerified: The address has no published source.
        RateLimited: The body is a rate-limit rejection.
        NetworkError: Any other explorer-side error or malformed body.
        UnsafeSourcePath: A file name climbs out of the source tree.
    """
    try:
        body = json.loads(payload)
    except ValueError as exc:
        raise NetworkError(f"malformed explorer response: {exc}") from exc

    result = body.get("result")
    if str(body.get("status")) != "1":
        message = result if isinstance(result, str) else body.get("message", "")
        if "rate limit" in message.lower():
            raise RateLimited()
        if "not verified" in message.lower():
            raise NotVerified(query.address)
        raise NetworkError(f"explorer error: {message}")
    if not result or not isinstance(result, list):
        raise NotVerified(query.address)

    record = result[0]
    source = record.get("SourceCode") or ""
    if not source.strip():
        raise NotVerified(query.address)

    name = record.get("ContractName") or "Contract"
    units, embedded = _split_sources(name, source)
    settings = CompilerSettings(
        version=_bare_version(record.get("CompilerVersion", "")),
        optimizer=str(record.get("OptimizationUsed", "0")) == "1",
        runs=int(record.get("Runs") or 200),
        evm_version=(record.get("EVMVersion") or None),
    )
    if embedded and "optimizer" in embedded:
        settings = settings.model_copy(update={
            "optimizer": bool(embedded["optimizer"].get("enabled", settings.optimizer)),
            "runs": int(embedded["optimizer"].get("runs", settings.runs)),
        })
    return VerifiedSource(
        contract_name=name,
        sources=units,
        compiler_version=settings.version,
        settings=settings,
    )


class ExplorerClient:
    """Fetches verified sources, consulting the cache first."""

    def __init__(self, cache: Optional[SourceCache] = None, session: Optional[requests.Session] = None,
                 timeout: float = 30.0, max_retries: int = 3, maximum_backoff: float = 16.0):
        self.cache = cache
        self.session = session or requests.Session()
        self.timeout = timeout
        self.max_retries = max_retries
        self.maximum_backoff = maximum_backoff

    def _request(self, query: ExplorerQuery) -> bytes:
        params = {"module": "contract", "action": "getsourcecode", "address": query.address}
        if query.api_key:
            params["apikey"] = query.api_key
        url = endpoint_for(query)

        retry_after: Optional[float] = None
        for attempt in range(self.max_retries + 1):
            try:
                response = self.session.get(url, params=params, timeout=self.timeout)
            except requests.exceptions.RequestException as exc:
                raise NetworkError(f"{url}: {exc}") from exc

            limited = response.status_code == 429
            if not limited and response.status_code >= 400:
                raise NetworkError(f"{url}: HTTP {response.status_code}")
            if not limited:
                try:
                    parse_payload(query, response.content)
                except RateLimited:
                    limited = True
            if not limited:
                return response.content

            header = response.headers.get("Retry-After")
            retry_after = float(header) if header and header.replace(".", "", 1).isdigit() else None
            if attempt == self.max_retries:
                break
            wait = retry_after if retry_after is not None else min(2 ** (attempt + 1) + random.random(), self.maximum_backoff)
            logger.info("rate limited by %s, sleeping %.1fs", url, wait)
            time.sleep(wait)
        raise RateLimited(retry_after)

    def fetch_verified(self, query: ExplorerQuery) -> VerifiedSource:
        """Return the verified sources and settings published for `query`.

        Raises:
            NotVerified: No verified source at that address.
            RateLimited: The explorer kept rejecting requests.
            NetworkError: Transport or explorer failure.
        """
        namespace = cache_namespace(query)
        if self.cache is not None:
            cached = self.cache.get(namespace, query.address)
            if cached is not None:
                logger.debug("cache hit for %s/%s", namespace, query.address)
                return parse_payload(query, cached)

        payload = self._request(query)
        verified = parse_payload(query, payload)
        if self.cache is not None:
            self.cache.put(namespace, query.address, payload, verified.sources)
        return verified
