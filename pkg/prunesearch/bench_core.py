#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Benchmark Harness: query synthesis, 70/30 replay and policy comparison
基準測試 - 查詢合成、訓練/測試重播與維護策略比較
"""

import json
import logging
import random
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from Cryptodome.Hash import SHA256
from fastapi.testclient import TestClient

from .analytics_core import MaintenancePolicy
from .client import CloudClient
from .cloud_app import create_cloud_app
from .cloud_service import CloudIndexService, token_owner_map
from .config import AnalyticsConfig, CloudConfig, EdgeConfig
from .corpus_core import Document, extract_keywords
from .edge_service import CloudBackend, EdgeSearchService, LocalCloudBackend
from .exceptions import BenchmarkError
from .semantics_core import SimilarityProvider
from .text_processing import analyze

logger = logging.getLogger(__name__)

BackendFactory = Callable[[CloudIndexService], CloudBackend]


@dataclass(frozen=True)
class BenchmarkQuery:
    """三個關鍵字組成的基準查詢"""
    text: str
    source_doc: str
    position: int
    relevant_clusters: FrozenSet[int] = frozenset()

    @property
    def keywords(self) -> List[str]:
        return self.text.split()

    def with_relevant(self, clusters: Iterable[int]) -> "BenchmarkQuery":
        return BenchmarkQuery(self.text, self.source_doc, self.position, frozenset(clusters))

    def to_dict(self) -> Dict:
        return {
            "text": self.text,
            "source_doc": self.source_doc,
            "position": self.position,
            "relevant_clusters": sorted(self.relevant_clusters),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "BenchmarkQuery":
        return cls(
            text=data["text"],
            source_doc=data["source_doc"],
            position=int(data.get("position", 0)),
            relevant_clusters=frozenset(int(c) for c in data.get("relevant_clusters", [])),
        )


@dataclass
class TimingRow:
    terms: int
    count: int
    mean_edge_ms: float
    mean_cloud_ms: float


@dataclass
class BenchReport:
    """基準測試報告"""
    policy: str
    seed: int
    k: int
    prune_k: int
    train_queries: int
    test_queries: int
    hits: int
    pruning_accuracy: float
    abstract_terms: int
    distinct_terms: int
    abstract_overhead: float
    edge_space_overhead: float
    mean_coverage: float
    maintenance_runs: int
    decisions: Dict[str, int] = field(default_factory=dict)
    mean_search_ms: float = 0.0
    mean_edge_ms: float = 0.0
    mean_cloud_ms: float = 0.0
    timing: List[TimingRow] = field(default_factory=list)

    # wall-clock and timestamp dependent
    VOLATILE_FIELDS = ("edge_space_overhead", "mean_search_ms", "mean_edge_ms", "mean_cloud_ms", "timing")

    def to_dict(self, include_volatile: bool = True) -> Dict:
        data = asdict(self)
        if not include_volatile:
            for name in self.VOLATILE_FIELDS:
                data.pop(name, None)
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# ---------------------------------------------------------------------------
# query synthesis

def synthesize_queries(docs: Sequence[Document], per_doc_keywords: int = 15,
                       per_query: int = 3) -> List[BenchmarkQuery]:
    """
    Per document: extract the keywords and cut them, in extraction order,
    into consecutive groups of per_query. A trailing partial
    group is dropped; documents with fewer than per_query keywords are skipped.
    """
    if per_query < 1 or per_doc_keywords < 1:
        raise BenchmarkError("per_query and per_doc_keywords must be >= 1")
    queries: List[BenchmarkQuery] = []
    for doc in sorted(docs, key=lambda d: d.doc_id):
        terms = [r.term for r in extract_keywords(doc, per_doc_keywords)]
        if len(terms) < per_query:
            logger.warning(f"Skipping {doc.doc_id}: {len(terms)} keywords, {per_query} needed")
            continue
        for position, start in enumerate(range(0, len(terms) - per_query + 1, per_query)):
            queries.append(BenchmarkQuery(" ".join(terms[start:start + per_query]), doc.doc_id, position))
    logger.info(f"Synthesized {len(queries)} queries from {len(docs)} documents")
    return queries


def _replay_order(q: BenchmarkQuery) -> Tuple[str, int]:
    return q.source_doc, q.position


def split_benchmark(queries: Sequence[BenchmarkQuery], train_fraction: float = 0.7,
                    seed: int = 42) -> Tuple[List[BenchmarkQuery], List[BenchmarkQuery]]:
    """Seeded shuffle then cut; both halves come back in (document, position) replay order."""
    if not 0.0 < train_fraction < 1.0:
        raise BenchmarkError(f"train_fraction must be in (0, 1), got {train_fraction}")
    shuffled = list(queries)
    random.Random(seed).shuffle(shuffled)
    cut = int(round(len(shuffled) * train_fraction))
    return sorted(shuffled[:cut], key=_replay_order), sorted(shuffled[cut:], key=_replay_order)


def timing_queries(queries: Sequence[BenchmarkQuery], seed: int = 42, max_terms: int = 3) -> List[str]:
    """One query per source query, keeping a seeded 1..max_terms prefix of its keywords."""
    rng = random.Random(seed)
    out = []
    for q in queries:
        words = q.keywords
        out.append(" ".join(words[:rng.randint(1, min(max_terms, len(words)))]))
    return out


def bench_key(seed: int) -> bytes:
    return SHA256.new(f"prunesearch-bench-{seed}".encode("utf-8")).digest()


def distinct_terms(docs: Iterable[Document]) -> int:
    vocabulary = set()
    for doc in docs:
        vocabulary.update(analyze(doc.text))
    return len(vocabulary)


def abstract_overhead(abstract_terms: int, distinct: int) -> float:
    return abstract_terms / distinct if distinct else 0.0


def edge_space_overhead(history_bytes: int, abstract_bytes: int, corpus_bytes: int) -> float:
    """(history log + abstract store) / plaintext corpus size"""
    if corpus_bytes <= 0:
        raise BenchmarkError("corpus size must be positive")
    return (history_bytes + abstract_bytes) / corpus_bytes


# ---------------------------------------------------------------------------
# replay

def http_backend_factory(wire_log_path: Optional[Path] = None) -> BackendFactory:
    """Cloud app behind a CloudClient over an in-process transport; no sockets."""
    def factory(service: CloudIndexService) -> CloudBackend:
        app_client = TestClient(create_cloud_app(service), base_url="http://cloud.local")
        return CloudClient("http://cloud.local", wire_log_path=wire_log_path, client=app_client)
    return factory


@dataclass
class BenchSetup:
    """重播環境參數"""
    docs: List[Document]
    provider: SimilarityProvider
    seed: int = 42
    k: int = 10
    kmeans_iters: int = 0
    prune_k: int = 3
    expansion_n: int = 2
    keywords_per_doc: int = 15
    analytics: AnalyticsConfig = field(default_factory=AnalyticsConfig)
    backend_factory: Optional[BackendFactory] = None


def build_system(setup: BenchSetup, policy: MaintenancePolicy) -> EdgeSearchService:
    """Fresh in-memory cloud + edge pair: ingest, cluster and initialize abstracts."""
    cloud = CloudIndexService(CloudConfig(k=setup.k, kmeans_iters=setup.kmeans_iters), persist_changes=False)
    factory = setup.backend_factory or LocalCloudBackend
    config = EdgeConfig(
        policy=policy.value,
        prune_k=setup.prune_k,
        expansion_n=setup.expansion_n,
        keywords_per_doc=setup.keywords_per_doc,
        analytics=setup.analytics,
    )
    edge = EdgeSearchService(bench_key(setup.seed), setup.provider, factory(cloud), config,
                             persist_state=False, auto_maintain=True)
    edge.ingest(setup.docs)
    edge.cluster(setup.k, setup.kmeans_iters)
    edge.initialize_abstracts()
    return edge


def label_relevant(queries: Sequence[BenchmarkQuery], edge: EdgeSearchService) -> List[BenchmarkQuery]:
    """Relevant clusters are the owners of the query's own keyword tokens."""
    owners = token_owner_map(edge.backend.cluster_info())
    labelled = []
    for q in queries:
        clusters = {owners[t] for t in (edge.token_for(w) for w in q.keywords) if t in owners}
        labelled.append(q.with_relevant(clusters))
    return labelled


def _abstract_bytes(edge: EdgeSearchService) -> int:
    snapshot = edge.manager.snapshot()
    document = {"clusters": [a.to_dict() for a in snapshot.abstracts],
                "stats": {str(c): s.to_dict() for c, s in snapshot.stats.items()}}
    return len(json.dumps(document, indent=2).encode("utf-8"))


def run_benchmark(train: Sequence[BenchmarkQuery], test: Sequence[BenchmarkQuery], policy,
                  setup: BenchSetup) -> BenchReport:
    """
    Replay train (history + maintenance under the policy's radius rule), then
    freeze the abstracts and replay test; a test query is a hit when a chosen
    cluster is one of its relevant clusters.
    """
    policy = MaintenancePolicy.parse(policy)
    if not test:
        raise BenchmarkError("test split is empty")
    started = time.perf_counter()
    edge = build_system(setup, policy)
    train = label_relevant(train, edge)
    test = label_relevant(test, edge)
    first_version = edge.manager.snapshot().version

    for q in train:
        edge.execute_search(q.text, session_id=q.source_doc)
    # closing pass; under the static policy it only refreshes the statistics
    final = edge.maintain()
    edge.auto_maintain = False
    maintenance_runs = edge.manager.snapshot().version - first_version
    if policy is MaintenancePolicy.STATIC_S3BD:
        maintenance_runs = 0

    hits = 0
    edge_ms: List[float] = []
    cloud_ms: List[float] = []
    for q in test:
        outcome = edge.execute_search(q.text, session_id=q.source_doc)
        hits += bool(set(outcome.decision.chosen) & q.relevant_clusters)
        edge_ms.append(outcome.edge_ms)
        cloud_ms.append(outcome.cloud_ms)

    snapshot = edge.manager.snapshot()
    distinct = distinct_terms(setup.docs)
    corpus_bytes = sum(len(d.text.encode("utf-8")) for d in setup.docs)
    coverage = edge.coverage()

    by_terms: Dict[int, List[Tuple[float, float]]] = {}
    for text in timing_queries(test, setup.seed):
        outcome = edge.execute_search(text)
        by_terms.setdefault(len(text.split()), []).append((outcome.edge_ms, outcome.cloud_ms))
    timing = [
        TimingRow(n, len(rows), float(np.mean([r[0] for r in rows])), float(np.mean([r[1] for r in rows])))
        for n, rows in sorted(by_terms.items())
    ]

    report = BenchReport(
        policy=policy.value,
        seed=setup.seed,
        k=setup.k,
        prune_k=setup.prune_k,
        train_queries=len(train),
        test_queries=len(test),
        hits=hits,
        pruning_accuracy=hits / len(test),
        abstract_terms=snapshot.total_terms(),
        distinct_terms=distinct,
        abstract_overhead=abstract_overhead(snapshot.total_terms(), distinct),
        edge_space_overhead=edge_space_overhead(edge.manager.history.size_bytes(), _abstract_bytes(edge), corpus_bytes),
        mean_coverage=float(np.mean([r.coverage for r in coverage])) if coverage else 0.0,
        maintenance_runs=maintenance_runs,
        decisions=final.summary() if policy is not MaintenancePolicy.STATIC_S3BD else {},
        mean_search_ms=float(np.mean(edge_ms)) + float(np.mean(cloud_ms)),
        mean_edge_ms=float(np.mean(edge_ms)),
        mean_cloud_ms=float(np.mean(cloud_ms)),
        timing=timing,
    )
    logger.info(
        f"Bench {policy.value}: accuracy {report.pruning_accuracy:.3f} ({hits}/{len(test)}), "
        f"overhead {report.abstract_overhead:.5f}, {time.perf_counter() - started:.1f}s"
    )
    return report


def compare_policies(train: Sequence[BenchmarkQuery], test: Sequence[BenchmarkQuery], setup: BenchSetup,
                     policies: Optional[Iterable] = None) -> Dict[str, BenchReport]:
    chosen = [MaintenancePolicy.parse(p) for p in (policies or list(MaintenancePolicy))]
    return {p.value: run_benchmark(train, test, p, setup) for p in chosen}
