#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Typed HTTP Clients for the Cloud and Edge Services
雲端與邊緣服務的 HTTP 用戶端
"""

import json
import logging
import threading
import time
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import httpx

from .cloud_index_core import RankedResult
from .corpus_core import TermToken, UploadBatch
from .exceptions import (
    CloudUnavailableError, PayloadTooLargeError, RemoteHTTPError, RemoteTimeoutError, TransportError,
)
from .models import ClustersResponse, QueryResponse, SearchResponse, UploadResponse

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 10.0
MAX_BODY_BYTES = 64 * 1024 * 1024


class WireLog:
    """Append-only JSON-lines capture of outgoing request bodies."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def record(self, method: str, url: str, body: bytes) -> None:
        line = json.dumps({
            "ts": time.time(),
            "method": method,
            "url": url,
            "body": body.decode("utf-8", errors="replace"),
        })
        with self._lock, self.path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")


class _JsonClient:
    """共用的 HTTP 呼叫與錯誤對應"""

    def __init__(self, base_url: str, timeout_s: float = DEFAULT_TIMEOUT_S,
                 wire_log_path: Optional[Path] = None, client: Optional[httpx.Client] = None):
        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.Client(base_url=self.base_url, timeout=timeout_s)
        self._owns_client = client is None
        self.wire_log = WireLog(wire_log_path) if wire_log_path else None

    def close(self) -> None:
        if self._owns_client:
            self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _request(self, method: str, path: str, body: Optional[bytes] = None,
                 content_type: str = "application/json", retries: int = 0,
                 params: Optional[Dict[str, Any]] = None,
                 extra_headers: Optional[Dict[str, str]] = None) -> Dict[str, Any]:
        if body is not None and len(body) > MAX_BODY_BYTES:
            raise PayloadTooLargeError(
                f"request body of {len(body)} bytes exceeds the 64 MiB limit",
                {"size": len(body), "limit": MAX_BODY_BYTES},
            )
        if self.wire_log is not None and body is not None:
            self.wire_log.record(method, path, body)
        headers = dict(extra_headers or {})
        if body is not None:
            headers["content-type"] = content_type

        attempt = 0
        while True:
            try:
                response = self._client.request(method, path, content=body, headers=headers, params=params)
                break
            except httpx.TimeoutException as e:
                raise RemoteTimeoutError(f"{method} {path} timed out", {"url": self.base_url}) from e
            except httpx.TransportError as e:
                if attempt < retries:
                    attempt += 1
                    logger.warning(f"{method} {path} failed ({e}); retrying")
                    continue
                raise CloudUnavailableError(f"cannot reach {self.base_url}: {e}", {"url": self.base_url}) from e

        if response.status_code >= 400:
            try:
                payload = response.json()
            except ValueError:
                payload = {"message": response.text}
            message = payload.get("message") if isinstance(payload, dict) else None
            raise RemoteHTTPError(
                response.status_code,
                message or f"{method} {path} returned {response.status_code}",
                payload.get("details", {}) if isinstance(payload, dict) else {},
            )
        try:
            return response.json()
        except ValueError as e:
            raise TransportError(f"{method} {path} returned a non-JSON body") from e

    def health(self) -> Dict[str, Any]:
        return self._request("GET", "/health", retries=1)


class CloudClient(_JsonClient):
    """雲端層用戶端；只送出權杖、叢集編號與密文"""

    def upload_batch(self, batch: UploadBatch, request_id: str = "") -> UploadResponse:
        body = batch.to_jsonl().encode("utf-8")
        # no retries on upload
        data = self._request("POST", "/v1/upload", body, content_type="application/x-ndjson",
                             retries=0, extra_headers={"x-request-id": request_id})
        return UploadResponse.model_validate(data)

    def remote_search(self, tokens: Iterable[TermToken], cluster_ids: Iterable[int],
                      request_id: str = "") -> RankedResult:
        body = json.dumps({
            "tokens": [t.hex for t in tokens],
            "clusters": list(cluster_ids),
            "request_id": request_id,
        }).encode("utf-8")
        data = self._request("POST", "/v1/search", body, retries=1)
        response = SearchResponse.model_validate(data)
        return RankedResult(
            entries=[(e.doc_id, e.score) for e in response.entries],
            matched_clusters=response.matched_clusters,
        )

    def cluster_info(self, request_id: str = "") -> ClustersResponse:
        data = self._request("GET", "/v1/clusters", retries=1, params={"request_id": request_id})
        return ClustersResponse.model_validate(data)

    def recluster(self, k: int, kmeans_iters: int = 0, request_id: str = "") -> ClustersResponse:
        body = json.dumps({"k": k, "kmeans_iters": kmeans_iters, "request_id": request_id}).encode("utf-8")
        return ClustersResponse.model_validate(self._request("POST", "/v1/cluster", body))


class EdgeClient(_JsonClient):
    """邊緣層用戶端"""

    def remote_query(self, query: str, session_id: str = "", request_id: str = "") -> QueryResponse:
        body = json.dumps({"query": query, "session_id": session_id, "request_id": request_id}).encode("utf-8")
        return QueryResponse.model_validate(self._request("POST", "/v1/query", body, retries=0))


def read_wire_log(path: Path) -> List[Dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
