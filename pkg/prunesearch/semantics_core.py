#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Core Semantic Similarity Logic: Wu-Palmer taxonomy, embedding cosine, query expansion
語意相似度核心邏輯 - Wu-Palmer 分類樹、詞向量餘弦、查詢擴展
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import SemanticsError
from .text_processing import stem

logger = logging.getLogger(__name__)

EXPANSION_THRESHOLD = 0.5
SIMILARITY_CACHE_SIZE = 100_000
ROOT_MARKER = "-"


class SimilarityMode(str, Enum):
    """相似度來源"""
    TAXONOMY = "taxonomy"
    EMBEDDING = "embedding"


@dataclass
class Taxonomy:
    """單一父節點的概念階層（根節點深度為 1）"""
    parent: Dict[str, str] = field(default_factory=dict)
    depth: Dict[str, int] = field(default_factory=dict)
    children: Dict[str, List[str]] = field(default_factory=dict)

    @property
    def nodes(self) -> frozenset:
        return frozenset(self.depth)

    @classmethod
    def from_edges(cls, edges: Iterable[Tuple[str, Optional[str]]]) -> "Taxonomy":
        """Build from (child, parent) pairs; parent None or "-" marks a root."""
        parent: Dict[str, str] = {}
        nodes: Dict[str, None] = {}
        for child, par in edges:
            if not child:
                raise SemanticsError("taxonomy edge with empty child")
            nodes.setdefault(child)
            if par is None or par == ROOT_MARKER:
                if child in parent:
                    raise SemanticsError(f"'{child}' declared both root and child of '{parent[child]}'")
                continue
            if parent.get(child, par) != par:
                raise SemanticsError(f"'{child}' has two parents: '{parent[child]}' and '{par}'")
            parent[child] = par
            nodes.setdefault(par)

        depth: Dict[str, int] = {}
        for node in nodes:
            chain = []
            current = node
            while current not in depth and current in parent:
                if current in chain:
                    raise SemanticsError(f"taxonomy cycle through '{current}'")
                chain.append(current)
                current = parent[current]
            if current not in depth:
                depth[current] = 1
            for item in reversed(chain):
                depth[item] = depth[parent[item]] + 1

        children: Dict[str, List[str]] = {}
        for child, par in parent.items():
            children.setdefault(par, []).append(child)
        for kids in children.values():
            kids.sort()
        return cls(parent=parent, depth=depth, children=children)

    @classmethod
    def load(cls, path: Path, stem_terms: bool = True) -> "Taxonomy":
        """Read `child<TAB>parent` lines; terms are stemmed so they meet analyzed queries."""
        path = Path(path)
        if not path.exists():
            raise SemanticsError(f"taxonomy file not found: {path}", str(path))
        edges = []
        seen = set()
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise SemanticsError(f"{path}:{lineno}: expected child<TAB>parent", str(path))
            child, par = (p.strip().lower() for p in parts)
            if stem_terms:
                child = stem(child)
                par = par if par == ROOT_MARKER else stem(par)
            if (child, par) in seen:
                continue
            seen.add((child, par))
            edges.append((child, par))
        taxonomy = cls.from_edges(edges)
        logger.info(f"Loaded taxonomy from {path}: {len(taxonomy.depth)} nodes")
        return taxonomy

    def ancestors(self, term: str) -> List[str]:
        """term itself first, root last"""
        chain = [term]
        while chain[-1] in self.parent:
            chain.append(self.parent[chain[-1]])
        return chain

    def leaves(self) -> List[str]:
        return sorted(n for n in self.depth if n not in self.children)


@dataclass
class EmbeddingTable:
    """詞向量表"""
    dim: int
    vectors: Dict[str, np.ndarray]

    def __post_init__(self):
        for term, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise SemanticsError(f"vector for '{term}' has shape {vec.shape}, expected ({self.dim},)")
            if not np.any(vec):
                raise SemanticsError(f"zero vector for '{term}'")

    @classmethod
    def from_mapping(cls, vectors: Dict[str, Sequence[float]]) -> "EmbeddingTable":
        arrays = {t: np.asarray(v, dtype=float) for t, v in vectors.items()}
        dim = len(next(iter(arrays.values()))) if arrays else 0
        return cls(dim=dim, vectors=arrays)

    @classmethod
    def load(cls, path: Path, stem_terms: bool = True) -> "EmbeddingTable":
        """First line `dim`, then `term v1 ... vdim` per line."""
        path = Path(path)
        if not path.exists():
            raise SemanticsError(f"embedding file not found: {path}", str(path))
        lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
        if not lines:
            raise SemanticsError(f"{path}: empty embedding file", str(path))
        try:
            dim = int(lines[0].strip())
        except ValueError as e:
            raise SemanticsError(f"{path}: first line must be the dimension", str(path)) from e
        vectors: Dict[str, np.ndarray] = {}
        for lineno, line in enumerate(lines[1:], start=2):
            parts = line.split()
            if len(parts) != dim + 1:
                raise SemanticsError(f"{path}:{lineno}: expected term and {dim} values", str(path))
            term = parts[0].lower()
            if stem_terms:
                term = stem(term)
            try:
                vectors[term] = np.array([float(x) for x in parts[1:]], dtype=float)
            except ValueError as e:
                raise SemanticsError(f"{path}:{lineno}: non-numeric value", str(path)) from e
        table = cls(dim=dim, vectors=vectors)
        logger.info(f"Loaded {len(vectors)} embeddings (dim={dim}) from {path}")
        return table


def wu_palmer(a: str, b: str, t: Taxonomy) -> float:
    """2·depth(LCS) / (depth(a)+depth(b)); 0.0 when OOV or disconnected."""
    if a not in t.depth or b not in t.depth:
        return 0.0
    if a == b:
        return 1.0
    ancestors_a = set(t.ancestors(a))
    for node in t.ancestors(b):
        if node in ancestors_a:
            return 2.0 * t.depth[node] / (t.depth[a] + t.depth[b])
    return 0.0


def cosine_sim(a: str, b: str, e: EmbeddingTable) -> float:
    va = e.vectors.get(a)
    vb = e.vectors.get(b)
    if va is None or vb is None:
        return 0.0
    value = float(np.dot(va, vb) / (np.linalg.norm(va) * np.linalg.norm(vb)))
    return min(1.0, max(0.0, value))


class SimilarityProvider:
    """
    語意相似度提供者

    Symmetric, range [0,1]. Pairs are cached per instance in a bounded LRU;
    providers are immutable after construction so the cache never goes stale.
    """

    mode: SimilarityMode = SimilarityMode.TAXONOMY

    def __init__(self):
        self._cached_pair = lru_cache(maxsize=SIMILARITY_CACHE_SIZE)(self._compute)

    def _compute(self, a: str, b: str) -> float:
        raise NotImplementedError

    def similarity(self, a: str, b: str) -> float:
        return self._cached_pair(*((a, b) if a <= b else (b, a)))

    def vocabulary(self) -> List[str]:
        """Expansion candidates, sorted."""
        return []

    def contains(self, term: str) -> bool:
        return True

    def similarity_matrix(self, terms: Sequence[str]) -> np.ndarray:
        """Pairwise similarities with 1.0 on the diagonal (exact match)."""
        m = len(terms)
        matrix = np.eye(m)
        known = [i for i, t in enumerate(terms) if self.contains(t)]
        for x, i in enumerate(known):
            for j in known[x + 1:]:
                matrix[i, j] = matrix[j, i] = self.similarity(terms[i], terms[j])
        return matrix

    def most_similar(self, term: str, n: int, threshold: float = EXPANSION_THRESHOLD) -> List[Tuple[str, float]]:
        scored = []
        for candidate in self.vocabulary():
            if candidate == term:
                continue
            sim = self.similarity(term, candidate)
            if sim >= threshold:
                scored.append((candidate, sim))
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[:n]


class TaxonomySimilarity(SimilarityProvider):
    """Wu-Palmer over a taxonomy; expansion vocabulary is the leaf set."""

    mode = SimilarityMode.TAXONOMY

    def __init__(self, taxonomy: Taxonomy):
        super().__init__()
        self.taxonomy = taxonomy
        self._leaves = taxonomy.leaves()

    def _compute(self, a: str, b: str) -> float:
        return wu_palmer(a, b, self.taxonomy)

    def vocabulary(self) -> List[str]:
        return self._leaves

    def contains(self, term: str) -> bool:
        return term in self.taxonomy.depth

    def most_similar(self, term: str, n: int, threshold: float = EXPANSION_THRESHOLD) -> List[Tuple[str, float]]:
        if term not in self.taxonomy.depth:
            return []
        return super().most_similar(term, n, threshold)


class EmbeddingSimilarity(SimilarityProvider):
    """Clipped cosine over an embedding table; every row is an expansion candidate."""

    mode = SimilarityMode.EMBEDDING

    def __init__(self, table: EmbeddingTable):
        super().__init__()
        self.table = table
        self._terms = sorted(table.vectors)
        if self._terms:
            matrix = np.vstack([table.vectors[t] for t in self._terms])
            self._unit = matrix / np.linalg.norm(matrix, axis=1, keepdims=True)
        else:
            self._unit = np.zeros((0, table.dim))

    def _compute(self, a: str, b: str) -> float:
        return cosine_sim(a, b, self.table)

    def vocabulary(self) -> List[str]:
        return self._terms

    def contains(self, term: str) -> bool:
        return term in self.table.vectors

    def most_similar(self, term: str, n: int, threshold: float = EXPANSION_THRESHOLD) -> List[Tuple[str, float]]:
        vec = self.table.vectors.get(term)
        if vec is None or n <= 0:
            return []
        sims = np.clip(self._unit @ (vec / np.linalg.norm(vec)), 0.0, 1.0)
        scored = [(t, float(s)) for t, s in zip(self._terms, sims) if t != term and s >= threshold]
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[:n]


def load_provider(taxonomy_path: Optional[Path] = None,
                  embedding_path: Optional[Path] = None) -> SimilarityProvider:
    """Taxonomy wins when both are given."""
    if taxonomy_path is not None:
        return TaxonomySimilarity(Taxonomy.load(taxonomy_path))
    if embedding_path is not None:
        return EmbeddingSimilarity(EmbeddingTable.load(embedding_path))
    raise SemanticsError("a taxonomy or embedding file is required")


def expand_query(terms: List[str], n: int, p: SimilarityProvider) -> List[str]:
    """Originals first, then up to n neighbours per term with similarity >= 0.5."""
    expanded: List[str] = []
    seen = set()
    for term in terms:
        if term not in seen:
            seen.add(term)
            expanded.append(term)
    if n <= 0:
        return expanded
    for term in terms:
        for candidate, _ in p.most_similar(term, n):
            if candidate not in seen:
                seen.add(candidate)
                expanded.append(candidate)
    return expanded
