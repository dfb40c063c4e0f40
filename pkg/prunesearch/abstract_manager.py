#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Abstract Manager: search history log, abstract store and snapshot swapping
摘要管理器 - 搜尋歷史、摘要儲存與快照切換
"""

import json
import logging
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from .analytics_core import (
    Abstract, ClusterStats, CoverageRow, MaintenancePolicy, MaintenanceResult, SearchRecord,
    coverage_report, maintain_abstracts,
)
from .config import AnalyticsConfig
from .exceptions import PruneSearchException
from .semantics_core import SimilarityProvider

logger = logging.getLogger(__name__)

STORE_VERSION = 1


class HistoryLog:
    """Append-only search history, mirrored to a JSON-lines file when a path is given."""

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        self._records: List[SearchRecord] = []
        if self.path is not None and self.path.exists():
            self._records = load_history(self.path)
            logger.info(f"Loaded {len(self._records)} history records from {self.path}")

    def append(self, record: SearchRecord) -> int:
        """Returns the number of records after the append."""
        line = json.dumps(record.to_dict())
        with self._lock:
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
            self._records.append(record)
            return len(self._records)

    def records(self) -> List[SearchRecord]:
        with self._lock:
            return list(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def size_bytes(self) -> int:
        if self.path is not None and self.path.exists():
            return self.path.stat().st_size
        return sum(len(json.dumps(r.to_dict())) + 1 for r in self.records())


def load_history(path: Path) -> List[SearchRecord]:
    records = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(SearchRecord.from_dict(json.loads(line)))
        except (ValueError, KeyError, TypeError) as e:
            raise PruneSearchException(f"{path}:{lineno}: malformed history record", {"error": str(e)}) from e
    return records


@dataclass(frozen=True)
class AbstractSnapshot:
    """不可變的摘要快照"""
    abstracts: Tuple[Abstract, ...] = ()
    stats: Dict[int, ClusterStats] = field(default_factory=dict)
    version: int = 0

    def by_id(self) -> Dict[int, Abstract]:
        return {a.cluster_id: a for a in self.abstracts}

    def total_terms(self) -> int:
        return sum(len(a.entries) for a in self.abstracts)


class AbstractStore:
    """abstracts.json: per cluster the entries and the last statistics snapshot."""

    def __init__(self, path: Path):
        self.path = Path(path)

    def exists(self) -> bool:
        return self.path.exists()

    def save(self, snapshot: AbstractSnapshot, policy: MaintenancePolicy) -> None:
        clusters = []
        for abstract in snapshot.abstracts:
            item = abstract.to_dict()
            stats = snapshot.stats.get(abstract.cluster_id)
            item["stats"] = stats.to_dict() if stats else None
            clusters.append(item)
        document = {
            "version": STORE_VERSION,
            "policy": MaintenancePolicy.parse(policy).value,
            "snapshot": snapshot.version,
            "updated_at": datetime.now().isoformat(),
            "clusters": clusters,
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_name(self.path.name + ".tmp")
        tmp.write_text(json.dumps(document, indent=2), encoding="utf-8")
        os.replace(tmp, self.path)

    def load(self) -> AbstractSnapshot:
        try:
            document = json.loads(self.path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise PruneSearchException(f"cannot read abstract store {self.path}: {e}") from e
        abstracts = []
        stats = {}
        for item in document.get("clusters", []):
            abstract = Abstract.from_dict(item)
            abstracts.append(abstract)
            if item.get("stats"):
                stats[abstract.cluster_id] = ClusterStats.from_dict(item["stats"])
        abstracts.sort(key=lambda a: a.cluster_id)
        return AbstractSnapshot(tuple(abstracts), stats, int(document.get("snapshot", 0)))

    def size_bytes(self) -> int:
        return self.path.stat().st_size if self.path.exists() else 0


class AbstractManager:
    """
    摘要管理器

    Queries read the current snapshot without locking; maintenance is a
    single exclusive writer that builds a new snapshot and swaps it in.
    """

    def __init__(self, provider: SimilarityProvider, cluster_summaries: Dict[int, int],
                 history: Optional[HistoryLog] = None, store: Optional[AbstractStore] = None,
                 policy: MaintenancePolicy = MaintenancePolicy.EDGE_BASED,
                 config: Optional[AnalyticsConfig] = None):
        self.provider = provider
        self.cluster_summaries = dict(cluster_summaries)
        self.history = history or HistoryLog()
        self.store = store
        self.policy = MaintenancePolicy.parse(policy)
        self.config = config or AnalyticsConfig()
        self._maintenance_lock = threading.Lock()
        self._snapshot = AbstractSnapshot()
        if store is not None and store.exists():
            self._snapshot = store.load()
            logger.info(f"Loaded {len(self._snapshot.abstracts)} abstracts from {store.path}")

    def snapshot(self) -> AbstractSnapshot:
        return self._snapshot

    def initialize(self, abstracts: Iterable[Abstract]) -> AbstractSnapshot:
        with self._maintenance_lock:
            snapshot = AbstractSnapshot(
                tuple(sorted((a.copy() for a in abstracts), key=lambda a: a.cluster_id)),
                {},
                self._snapshot.version + 1,
            )
            self._publish(snapshot)
        return snapshot

    def _publish(self, snapshot: AbstractSnapshot) -> None:
        if self.store is not None:
            self.store.save(snapshot, self.policy)
        self._snapshot = snapshot

    def record(self, record: SearchRecord) -> bool:
        """Append to history; True when a periodic maintenance run is due."""
        count = self.history.append(record)
        return count % self.config.maintenance_every == 0

    def maintain(self) -> MaintenanceResult:
        with self._maintenance_lock:
            current = self._snapshot
            result = maintain_abstracts(
                self.history.records(),
                current.abstracts,
                self.cluster_summaries,
                self.provider,
                self.policy,
                self.config,
            )
            stats = result.stats or current.stats
            self._publish(AbstractSnapshot(tuple(result.abstracts), stats, current.version + 1))
        return result

    def coverage(self, cluster_terms: Dict[int, Iterable[str]]) -> List[CoverageRow]:
        snapshot = self._snapshot
        return coverage_report(snapshot.abstracts, cluster_terms, snapshot.stats, self.provider)
