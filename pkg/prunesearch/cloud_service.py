#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Cloud Index Service: snapshot-isolated search over the encrypted index
雲端索引服務 - 快照隔離的加密索引搜尋
"""

import logging
import threading
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from .cloud_index_core import (
    ClusterSet, EncryptedIndex, RankedResult, assign_token, build_clusters, search_clusters,
)
from .config import CloudConfig
from .corpus_core import TermToken, UploadBatch
from .exceptions import IndexStoreError
from .index_store import META_FILE, load, persist
from .models import ClusterInfo, ClustersResponse, UploadResponse

logger = logging.getLogger(__name__)


class CloudIndexService:
    """
    雲端索引服務

    Readers take the current (ClusterSet, EncryptedIndex) pair without locking;
    writers build a new pair under the writer lock and swap it in whole.
    """

    def __init__(self, config: Optional[CloudConfig] = None, persist_changes: bool = False):
        self.config = config or CloudConfig()
        self.persist_changes = persist_changes
        self._write_lock = threading.Lock()
        self._snapshot: Tuple[ClusterSet, EncryptedIndex] = (ClusterSet(), EncryptedIndex())

    @classmethod
    def open(cls, config: CloudConfig) -> "CloudIndexService":
        """Load the index directory when present, otherwise start empty and persist on write."""
        service = cls(config, persist_changes=True)
        index_dir = Path(config.index_dir)
        if (index_dir / META_FILE).exists():
            service._snapshot = load(index_dir)
        else:
            index_dir.mkdir(parents=True, exist_ok=True)
            logger.info(f"Starting with an empty index at {index_dir}")
        return service

    def snapshot(self) -> Tuple[ClusterSet, EncryptedIndex]:
        return self._snapshot

    def _swap(self, cs: ClusterSet, idx: EncryptedIndex) -> None:
        if self.persist_changes:
            try:
                persist(cs, idx, self.config.index_dir)
            except OSError as e:
                raise IndexStoreError(f"failed to persist index: {e}", str(self.config.index_dir)) from e
        self._snapshot = (cs, idx)

    def upload(self, batch: UploadBatch, request_id: str = "") -> UploadResponse:
        """Merge a batch; when already clustered, new tokens join their argmax centroid."""
        with self._write_lock:
            cs, idx = self._snapshot
            new_idx, new_tokens = idx.merged(batch)
            if cs.k and new_tokens:
                centroids = [c.centroid for c in cs.clusters]
                assignment = {}
                orphans = 0
                for token in new_tokens:
                    cluster_id, relatedness = assign_token(token, centroids, new_idx)
                    assignment[token] = cluster_id
                    orphans += relatedness == 0
                cs = cs.with_tokens_assigned(assignment)
                cs.orphan_count += orphans
            self._swap(cs, new_idx)
        logger.info(
            f"Upload: {len(batch.encrypted_docs)} docs, {len(batch.postings)} tokens "
            f"({len(new_tokens)} new); index holds {len(new_idx.doc_store)} docs"
        )
        return UploadResponse(
            request_id=request_id,
            documents=len(batch.encrypted_docs),
            tokens=len(batch.postings),
            new_tokens=len(new_tokens),
            total_documents=len(new_idx.doc_store),
            total_tokens=len(new_idx.postings),
        )

    def upload_jsonl(self, body: str, request_id: str = "") -> UploadResponse:
        return self.upload(UploadBatch.from_jsonl(body), request_id)

    def cluster(self, k: Optional[int] = None, kmeans_iters: Optional[int] = None) -> ClusterSet:
        k = k if k is not None else self.config.k
        iters = kmeans_iters if kmeans_iters is not None else self.config.kmeans_iters
        with self._write_lock:
            _, idx = self._snapshot
            cs = build_clusters(idx, k, iters)
            self._swap(cs, idx)
        return cs

    def search(self, tokens: Iterable[TermToken], cluster_ids: Iterable[int]) -> RankedResult:
        cs, idx = self._snapshot
        return search_clusters(tokens, cluster_ids, cs, idx)

    def search_hex(self, tokens_hex: Iterable[str], cluster_ids: Iterable[int]) -> RankedResult:
        return self.search([TermToken.from_hex(h) for h in tokens_hex], cluster_ids)

    def cluster_info(self, request_id: str = "") -> ClustersResponse:
        """Metadata only: sizes and per-token document counts."""
        cs, idx = self._snapshot
        clusters = [
            ClusterInfo(
                cluster_id=c.cluster_id,
                size=len(c.members),
                centroid=c.centroid.hex,
                doc_counts={t.hex: len(idx.postings[t]) for t in sorted(c.members)},
            )
            for c in cs.clusters
        ]
        return ClustersResponse(request_id=request_id, k=cs.k, orphan_count=cs.orphan_count, clusters=clusters)

    def health(self) -> Dict:
        cs, idx = self._snapshot
        return {
            "documents": len(idx.doc_store),
            "tokens": len(idx.postings),
            "clusters": cs.k,
        }


def cluster_doc_assoc(info: ClustersResponse) -> Dict[int, List[Tuple[TermToken, int]]]:
    """cluster_id -> [(token, doc_count)] from cluster metadata."""
    return {
        c.cluster_id: [(TermToken.from_hex(h), n) for h, n in c.doc_counts.items()]
        for c in info.clusters
    }


def token_owner_map(info: ClustersResponse) -> Dict[TermToken, int]:
    owners = {}
    for c in info.clusters:
        for h in c.doc_counts:
            owners[TermToken.from_hex(h)] = c.cluster_id
    return owners
