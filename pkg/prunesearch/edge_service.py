#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Edge Search Service: query path, history recording and periodic maintenance
邊緣搜尋服務 - 查詢流程、歷史紀錄與週期性摘要維護
"""

import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Protocol

from .abstract_manager import AbstractManager, AbstractSnapshot, AbstractStore, HistoryLog
from .analytics_core import (
    CoverageRow, MaintenancePolicy, MaintenanceResult, SearchRecord, init_abstracts,
)
from .client import CloudClient
from .cloud_index_core import RankedResult
from .cloud_service import CloudIndexService, cluster_doc_assoc
from .config import EdgeConfig
from .corpus_core import Document, TermToken, UploadBatch, ingest_documents, load_key, tokenize_term
from .edge_search_core import ProcessedQuery, PruneDecision, process_query, prune
from .exceptions import CloudUnavailableError, PruneSearchException, TransportError
from .models import ClustersResponse, QueryResponse, RankedEntry, UploadResponse
from .semantics_core import SimilarityProvider, load_provider

logger = logging.getLogger(__name__)

HISTORY_FILE = "history.jsonl"
ABSTRACTS_FILE = "abstracts.json"
SEED_TERMS_FILE = "seed_terms.json"
TOKEN_CACHE_SIZE = 4096


class CloudBackend(Protocol):
    """雲端層呼叫介面（HTTP 或同程序）"""

    def upload_batch(self, batch: UploadBatch, request_id: str = "") -> UploadResponse: ...

    def remote_search(self, tokens: Iterable[TermToken], cluster_ids: Iterable[int],
                      request_id: str = "") -> RankedResult: ...

    def cluster_info(self, request_id: str = "") -> ClustersResponse: ...

    def recluster(self, k: int, kmeans_iters: int = 0, request_id: str = "") -> ClustersResponse: ...

    def health(self) -> Dict: ...


class LocalCloudBackend:
    """Drives a CloudIndexService in the same process."""

    def __init__(self, service: CloudIndexService):
        self.service = service

    def upload_batch(self, batch: UploadBatch, request_id: str = "") -> UploadResponse:
        return self.service.upload(batch, request_id)

    def remote_search(self, tokens: Iterable[TermToken], cluster_ids: Iterable[int],
                      request_id: str = "") -> RankedResult:
        return self.service.search(tokens, cluster_ids)

    def cluster_info(self, request_id: str = "") -> ClustersResponse:
        return self.service.cluster_info(request_id)

    def recluster(self, k: int, kmeans_iters: int = 0, request_id: str = "") -> ClustersResponse:
        self.service.cluster(k, kmeans_iters)
        return self.service.cluster_info(request_id)

    def health(self) -> Dict:
        return self.service.health()


@dataclass
class SearchOutcome:
    """一次邊緣搜尋的完整結果"""
    processed: ProcessedQuery
    decision: PruneDecision
    result: RankedResult
    record: SearchRecord
    edge_ms: float
    cloud_ms: float

    def to_response(self, request_id: str = "") -> QueryResponse:
        return QueryResponse(
            request_id=request_id,
            entries=[RankedEntry(doc_id=d, score=s) for d, s in self.result.entries],
            chosen_clusters=self.decision.chosen,
            matched_clusters=self.result.matched_clusters,
            terms=self.processed.terms,
            edge_ms=self.edge_ms,
            cloud_ms=self.cloud_ms,
        )


class EdgeSearchService:
    """
    邊緣搜尋服務

    Holds the user key, plaintext seed terms and abstracts; only tokens and
    cluster ids are handed to the cloud backend.
    """

    def __init__(self, key: bytes, provider: SimilarityProvider, backend: CloudBackend,
                 config: Optional[EdgeConfig] = None, persist_state: bool = True,
                 auto_maintain: bool = True):
        self.config = config or EdgeConfig()
        self.key = key
        self.provider = provider
        self.backend = backend
        self.policy = MaintenancePolicy.parse(self.config.policy)
        self.auto_maintain = auto_maintain
        self.persist_state = persist_state
        self._cached_token = lru_cache(maxsize=TOKEN_CACHE_SIZE)(lambda term: tokenize_term(term, self.key))
        self._seed_lock = threading.Lock()
        self.seed_terms: Dict[TermToken, str] = {}
        self.cluster_summaries: Dict[int, int] = {}

        state_dir = Path(self.config.state_dir)
        if persist_state:
            state_dir.mkdir(parents=True, exist_ok=True)
            self._load_seed_terms(state_dir / SEED_TERMS_FILE)
        self.manager = AbstractManager(
            provider,
            {},
            history=HistoryLog(state_dir / HISTORY_FILE if persist_state else None),
            store=AbstractStore(state_dir / ABSTRACTS_FILE) if persist_state else None,
            policy=self.policy,
            config=self.config.analytics,
        )

    @classmethod
    def from_config(cls, config: EdgeConfig, backend: Optional[CloudBackend] = None) -> "EdgeSearchService":
        if config.key_path is None:
            raise PruneSearchException("edge config needs key_path")
        provider = load_provider(config.taxonomy_path, config.embedding_path)
        backend = backend or CloudClient(
            config.cloud_addr, timeout_s=config.timeout_s, wire_log_path=config.wire_log_path,
        )
        return cls(load_key(config.key_path), provider, backend, config)

    # -- state -------------------------------------------------------------

    def _load_seed_terms(self, path: Path) -> None:
        if path.exists():
            data = json.loads(path.read_text(encoding="utf-8"))
            self.seed_terms = {TermToken.from_hex(h): t for h, t in data.items()}
            logger.info(f"Loaded {len(self.seed_terms)} seed terms from {path}")

    def _save_seed_terms(self) -> None:
        if not self.persist_state:
            return
        path = Path(self.config.state_dir) / SEED_TERMS_FILE
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps({t.hex: term for t, term in sorted(self.seed_terms.items())}), encoding="utf-8")
        os.replace(tmp, path)

    def token_for(self, term: str) -> TermToken:
        return self._cached_token(term)

    # -- setup ---------------------------------------------------------------

    def ingest(self, docs: List[Document], k_per_doc: Optional[int] = None) -> UploadResponse:
        """Extract, tokenize and encrypt locally, then upload tokens and ciphertext."""
        result = ingest_documents(docs, k_per_doc or self.config.keywords_per_doc, self.key)
        response = self.backend.upload_batch(result.batch)
        with self._seed_lock:
            self.seed_terms.update(result.seed_terms)
            self._save_seed_terms()
        return response

    def refresh_clusters(self) -> ClustersResponse:
        info = self.backend.cluster_info()
        self.cluster_summaries = {c.cluster_id: max(1, c.size) for c in info.clusters}
        self.manager.cluster_summaries = dict(self.cluster_summaries)
        return info

    def cluster(self, k: int, kmeans_iters: int = 0) -> ClustersResponse:
        self.backend.recluster(k, kmeans_iters)
        return self.refresh_clusters()

    def initialize_abstracts(self, n: Optional[int] = None) -> AbstractSnapshot:
        info = self.refresh_clusters()
        size = n or self.config.analytics.init_abstract_size
        abstracts = init_abstracts(cluster_doc_assoc(info), size, self.seed_terms)
        snapshot = self.manager.initialize(abstracts)
        logger.info(f"Initialized {len(abstracts)} abstracts with up to {size} terms each")
        return snapshot

    def cluster_terms(self, info: Optional[ClustersResponse] = None) -> Dict[int, List[str]]:
        """cluster_id -> plaintext seed terms known to the edge"""
        info = info or self.backend.cluster_info()
        terms: Dict[int, List[str]] = {}
        for c in info.clusters:
            plain = [self.seed_terms.get(TermToken.from_hex(h)) for h in c.doc_counts]
            terms[c.cluster_id] = sorted(t for t in plain if t)
        return terms

    # -- query path ----------------------------------------------------------

    def execute_search(self, raw: str, session_id: str = "", request_id: str = "") -> SearchOutcome:
        started = time.perf_counter()
        snapshot = self.manager.snapshot()
        if not snapshot.abstracts:
            raise PruneSearchException("abstracts are not initialized; run ingest and cluster first")

        processed = process_query(raw, session_id, self.provider, self.config.expansion_n)
        decision = prune(processed, snapshot.abstracts, self.config.prune_k, self.provider)
        tokens = [self.token_for(t) for t in processed.expanded]

        cloud_started = time.perf_counter()
        result = self.backend.remote_search(tokens, decision.chosen, request_id)
        cloud_ms = (time.perf_counter() - cloud_started) * 1000.0

        record = SearchRecord(
            session_id=session_id,
            timestamp=time.time(),
            raw_query=raw,
            terms=processed.terms,
            hit_clusters=list(result.matched_clusters),
            result_count=len(result.entries),
        )
        due = self.manager.record(record)
        edge_ms = (time.perf_counter() - started) * 1000.0 - cloud_ms

        if due and self.auto_maintain and self.policy is not MaintenancePolicy.STATIC_S3BD:
            self.maintain()
        return SearchOutcome(processed, decision, result, record, max(0.0, edge_ms), cloud_ms)

    def maintain(self) -> MaintenanceResult:
        if not self.cluster_summaries:
            self.refresh_clusters()
        return self.manager.maintain()

    def coverage(self) -> List[CoverageRow]:
        return self.manager.coverage(self.cluster_terms())

    def health(self) -> Dict:
        snapshot = self.manager.snapshot()
        return {
            "abstracts": len(snapshot.abstracts),
            "abstract_terms": snapshot.total_terms(),
            "history": len(self.manager.history),
            "policy": self.policy.value,
        }

    def check_cloud(self) -> Dict:
        """Fail fast when the cloud tier does not answer its health check."""
        try:
            status = self.backend.health()
        except TransportError as e:
            raise CloudUnavailableError(f"cloud health check failed: {e.message}", e.details) from e
        logger.info(f"Cloud reachable: {status}")
        return status
