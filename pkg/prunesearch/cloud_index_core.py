#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Core Cloud Index Logic: co-occurrence clustering and pruned ranked search
雲端索引核心邏輯 - 共現叢集與剪枝排序搜尋
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

from .corpus_core import TermToken, UploadBatch
from .exceptions import ClusteringError, EmptyQueryError, UnknownClusterError, UnknownTokenError

logger = logging.getLogger(__name__)


@dataclass
class EncryptedIndex:
    """加密索引：權杖倒排表與密文文件"""
    postings: Dict[TermToken, Set[str]] = field(default_factory=dict)
    doc_store: Dict[str, bytes] = field(default_factory=dict)

    def copy(self) -> "EncryptedIndex":
        return EncryptedIndex(
            postings={t: set(ids) for t, ids in self.postings.items()},
            doc_store=dict(self.doc_store),
        )

    def merged(self, batch: UploadBatch) -> Tuple["EncryptedIndex", List[TermToken]]:
        """New index with the batch applied, plus tokens seen for the first time."""
        index = self.copy()
        for doc_id, ciphertext in batch.encrypted_docs:
            index.doc_store[doc_id] = ciphertext
        new_tokens = []
        for token, doc_ids in batch.postings.items():
            if token not in index.postings:
                index.postings[token] = set()
                new_tokens.append(token)
            index.postings[token].update(doc_ids)
        return index, sorted(new_tokens)

    def tokens(self) -> List[TermToken]:
        return sorted(self.postings)

    def doc_token_counts(self) -> Counter:
        counts: Counter = Counter()
        for doc_ids in self.postings.values():
            counts.update(doc_ids)
        return counts


@dataclass
class Cluster:
    """叢集：中心權杖與成員權杖"""
    cluster_id: int
    centroid: TermToken
    members: Set[TermToken]


@dataclass
class ClusterSet:
    """叢集集合，編號為 0..k-1"""
    clusters: List[Cluster] = field(default_factory=list)
    orphan_count: int = 0

    def __post_init__(self):
        self._owner: Dict[TermToken, int] = {}
        for cluster in self.clusters:
            for token in cluster.members:
                self._owner[token] = cluster.cluster_id

    @property
    def k(self) -> int:
        return len(self.clusters)

    def cluster_of(self, token: TermToken) -> Optional[int]:
        return self._owner.get(token)

    def has_cluster(self, cluster_id: int) -> bool:
        return 0 <= cluster_id < len(self.clusters)

    def with_tokens_assigned(self, assignment: Dict[TermToken, int]) -> "ClusterSet":
        clusters = [Cluster(c.cluster_id, c.centroid, set(c.members)) for c in self.clusters]
        for token, cluster_id in assignment.items():
            clusters[cluster_id].members.add(token)
        return ClusterSet(clusters=clusters, orphan_count=self.orphan_count)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ClusterSet):
            return NotImplemented
        return self.clusters == other.clusters and self.orphan_count == other.orphan_count


@dataclass
class RankedResult:
    """排序後的搜尋結果"""
    entries: List[Tuple[str, float]] = field(default_factory=list)
    matched_clusters: List[int] = field(default_factory=list)

    def doc_ids(self) -> List[str]:
        return [doc_id for doc_id, _ in self.entries]

    def to_dict(self) -> Dict:
        return {
            "entries": [{"doc_id": d, "score": s} for d, s in self.entries],
            "matched_clusters": list(self.matched_clusters),
        }


def semantic_relatedness(t1: TermToken, t2: TermToken, idx: EncryptedIndex) -> int:
    """Number of documents both tokens appear in."""
    for token in (t1, t2):
        if token not in idx.postings:
            raise UnknownTokenError(token.hex)
    return len(idx.postings[t1] & idx.postings[t2])


def centroid_margins(idx: EncryptedIndex) -> Dict[TermToken, Tuple[int, int]]:
    """token -> (unique, shared) document counts"""
    per_doc = idx.doc_token_counts()
    margins = {}
    for token, doc_ids in idx.postings.items():
        unique = sum(1 for d in doc_ids if per_doc[d] == 1)
        margins[token] = (unique, len(doc_ids) - unique)
    return margins


def select_centroids(idx: EncryptedIndex, k: int) -> List[TermToken]:
    """
    中心權杖挑選

    A token is eligible when it is the only token of more documents than it
    shares. Eligible tokens rank by unique-shared margin, ties by hex; the
    shortfall is filled from the best ineligible tokens.
    """
    if k < 1:
        raise ClusteringError("k must be >= 1")
    if k > len(idx.postings):
        raise ClusteringError(f"k={k} exceeds the number of tokens ({len(idx.postings)})")

    margins = centroid_margins(idx)

    def rank(token: TermToken):
        unique, shared = margins[token]
        return (-(unique - shared), token.hex)

    eligible = sorted((t for t, (u, s) in margins.items() if u > s), key=rank)
    chosen = eligible[:k]
    if len(chosen) < k:
        ineligible = sorted((t for t, (u, s) in margins.items() if u <= s), key=rank)
        logger.warning(f"Only {len(eligible)} eligible centroids for k={k}; filling from ineligible tokens")
        chosen.extend(ineligible[:k - len(chosen)])
    return chosen


def assign_token(token: TermToken, centroids: List[TermToken], idx: EncryptedIndex) -> Tuple[int, int]:
    """(cluster_id, best relatedness); ties and all-zero go to the lowest id."""
    postings = idx.postings[token]
    best_id, best = 0, -1
    for cluster_id, centroid in enumerate(centroids):
        relatedness = len(postings & idx.postings[centroid])
        if relatedness > best:
            best_id, best = cluster_id, relatedness
    return best_id, best


def cluster_terms(idx: EncryptedIndex, centroids: List[TermToken]) -> ClusterSet:
    """Single-pass argmax assignment of every token to a centroid."""
    if not centroids:
        raise ClusteringError("at least one centroid is required")
    if len(set(centroids)) != len(centroids):
        raise ClusteringError("centroids must be distinct")
    for centroid in centroids:
        if centroid not in idx.postings:
            raise UnknownTokenError(centroid.hex)

    clusters = [Cluster(i, c, {c}) for i, c in enumerate(centroids)]
    centroid_set = set(centroids)
    orphans = 0
    for token in idx.tokens():
        if token in centroid_set:
            continue
        cluster_id, relatedness = assign_token(token, centroids, idx)
        if relatedness == 0:
            orphans += 1
        clusters[cluster_id].members.add(token)

    cs = ClusterSet(clusters=clusters, orphan_count=orphans)
    logger.info(f"Clustered {len(idx.postings)} tokens into {cs.k} clusters ({orphans} orphans)")
    return cs


def refine_centroids(idx: EncryptedIndex, cs: ClusterSet) -> List[TermToken]:
    """Per cluster, the member with the largest summed relatedness to the other members."""
    centroids = []
    for cluster in cs.clusters:
        per_doc: Counter = Counter()
        for token in cluster.members:
            per_doc.update(idx.postings[token])

        def summed(token: TermToken) -> int:
            postings = idx.postings[token]
            return sum(per_doc[d] for d in postings) - len(postings)

        best = min(cluster.members, key=lambda t: (-summed(t), t.hex))
        centroids.append(best)
    return centroids


def build_clusters(idx: EncryptedIndex, k: int, kmeans_iters: int = 0) -> ClusterSet:
    """select_centroids + cluster_terms, optionally followed by k-means style refinement."""
    cs = cluster_terms(idx, select_centroids(idx, k))
    for iteration in range(kmeans_iters):
        centroids = refine_centroids(idx, cs)
        if centroids == [c.centroid for c in cs.clusters]:
            logger.info(f"Centroid refinement stable after {iteration} iteration(s)")
            break
        cs = cluster_terms(idx, centroids)
    return cs


def search_clusters(query_tokens: Iterable[TermToken], cluster_ids: Iterable[int],
                    cs: ClusterSet, idx: EncryptedIndex) -> RankedResult:
    """
    剪枝搜尋

    Only tokens owned by the named clusters match; each matched token adds
    1/|postings| to every document in its posting list.
    """
    tokens = list(dict.fromkeys(query_tokens))
    if not tokens:
        raise EmptyQueryError()
    wanted = list(dict.fromkeys(cluster_ids))
    unknown = [c for c in wanted if not cs.has_cluster(c)]
    if unknown:
        raise UnknownClusterError(unknown)
    allowed = set(wanted)

    scores: Dict[str, float] = {}
    matched: Set[int] = set()
    for token in tokens:
        owner = cs.cluster_of(token)
        if owner is None or owner not in allowed:
            continue
        postings = idx.postings.get(token)
        if not postings:
            continue
        matched.add(owner)
        weight = 1.0 / len(postings)
        for doc_id in postings:
            scores[doc_id] = scores.get(doc_id, 0.0) + weight

    entries = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return RankedResult(entries=entries, matched_clusters=sorted(matched))
