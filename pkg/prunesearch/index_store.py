#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Encrypted Index Persistence
加密索引持久化
"""

import json
import logging
import os
from pathlib import Path
from typing import Tuple
from urllib.parse import quote, unquote

from .cloud_index_core import Cluster, ClusterSet, EncryptedIndex
from .corpus_core import TermToken
from .exceptions import IndexStoreError, IndexVersionError, TokenizationError, TruncatedIndexError

logger = logging.getLogger(__name__)

MAGIC = "prunesearch-index"
FORMAT_VERSION = 1

META_FILE = "meta.json"
POSTINGS_FILE = "postings.jsonl"
CLUSTERS_FILE = "clusters.jsonl"
DOCS_DIR = "docs"


def _write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _doc_filename(doc_id: str) -> str:
    return quote(doc_id, safe="") + ".bin"


def persist(cs: ClusterSet, idx: EncryptedIndex, path: Path) -> None:
    """Write the index directory; meta.json goes last so a crash leaves a detectable gap."""
    root = Path(path)
    docs_dir = root / DOCS_DIR
    docs_dir.mkdir(parents=True, exist_ok=True)

    postings_lines = []
    posting_total = 0
    for token in idx.tokens():
        doc_ids = sorted(idx.postings[token])
        posting_total += len(doc_ids)
        postings_lines.append(json.dumps({"token": token.hex, "doc_ids": doc_ids}))
    _write_atomic(root / POSTINGS_FILE, "".join(l + "\n" for l in postings_lines).encode("utf-8"))

    cluster_lines = [
        json.dumps({
            "cluster_id": c.cluster_id,
            "centroid": c.centroid.hex,
            "members": sorted(t.hex for t in c.members),
        })
        for c in cs.clusters
    ]
    _write_atomic(root / CLUSTERS_FILE, "".join(l + "\n" for l in cluster_lines).encode("utf-8"))

    wanted = {_doc_filename(d) for d in idx.doc_store}
    for stale in docs_dir.glob("*.bin"):
        if stale.name not in wanted:
            stale.unlink()
    for doc_id, ciphertext in idx.doc_store.items():
        _write_atomic(docs_dir / _doc_filename(doc_id), ciphertext)

    meta = {
        "magic": MAGIC,
        "version": FORMAT_VERSION,
        "k": cs.k,
        "orphan_count": cs.orphan_count,
        "token_count": len(idx.postings),
        "posting_count": posting_total,
        "doc_count": len(idx.doc_store),
    }
    _write_atomic(root / META_FILE, json.dumps(meta, indent=2, sort_keys=True).encode("utf-8"))
    logger.info(f"Persisted index to {root}: {meta['token_count']} tokens, {meta['doc_count']} docs, k={cs.k}")


def _read_jsonl(path: Path):
    if not path.exists():
        raise TruncatedIndexError(f"missing {path.name}", str(path))
    text = path.read_text(encoding="utf-8")
    if text and not text.endswith("\n"):
        raise TruncatedIndexError(f"{path.name} ends mid-record", str(path))
    for lineno, line in enumerate(text.splitlines(), start=1):
        try:
            yield json.loads(line)
        except json.JSONDecodeError as e:
            raise TruncatedIndexError(f"{path.name}:{lineno}: unreadable record", str(path)) from e


def load(path: Path) -> Tuple[ClusterSet, EncryptedIndex]:
    root = Path(path)
    meta_path = root / META_FILE
    if not meta_path.exists():
        raise IndexStoreError(f"no index at {root}", str(root))
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise TruncatedIndexError("meta.json is unreadable", str(meta_path)) from e
    if meta.get("magic") != MAGIC:
        raise IndexVersionError(f"bad magic header: {meta.get('magic')!r}", str(meta_path))
    if meta.get("version") != FORMAT_VERSION:
        raise IndexVersionError(
            f"index version {meta.get('version')!r} is not supported (expected {FORMAT_VERSION})",
            str(meta_path),
        )

    idx = EncryptedIndex()
    try:
        for record in _read_jsonl(root / POSTINGS_FILE):
            idx.postings[TermToken.from_hex(record["token"])] = set(record["doc_ids"])
        clusters = []
        for record in _read_jsonl(root / CLUSTERS_FILE):
            clusters.append(Cluster(
                cluster_id=int(record["cluster_id"]),
                centroid=TermToken.from_hex(record["centroid"]),
                members={TermToken.from_hex(h) for h in record["members"]},
            ))
    except (KeyError, TypeError, TokenizationError) as e:
        raise TruncatedIndexError(f"malformed index record: {e}", str(root)) from e

    docs_dir = root / DOCS_DIR
    if docs_dir.is_dir():
        for blob in docs_dir.glob("*.bin"):
            idx.doc_store[unquote(blob.name[:-len(".bin")])] = blob.read_bytes()

    posting_total = sum(len(ids) for ids in idx.postings.values())
    expected = (meta.get("token_count"), meta.get("posting_count"), meta.get("doc_count"), meta.get("k"))
    actual = (len(idx.postings), posting_total, len(idx.doc_store), len(clusters))
    if expected != actual:
        raise TruncatedIndexError(
            "index files disagree with meta.json",
            str(root),
            details={"expected": list(expected), "actual": list(actual)},
        )
    clusters.sort(key=lambda c: c.cluster_id)
    if [c.cluster_id for c in clusters] != list(range(len(clusters))):
        raise IndexStoreError("cluster ids are not 0..k-1", str(root))

    cs = ClusterSet(clusters=clusters, orphan_count=int(meta.get("orphan_count", 0)))
    logger.info(f"Loaded index from {root}: {len(idx.postings)} tokens, {len(idx.doc_store)} docs, k={cs.k}")
    return cs, idx
