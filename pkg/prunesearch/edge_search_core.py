#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Core Edge Search Logic: query preprocessing and abstract-based pruning
邊緣搜尋核心邏輯 - 查詢前處理與摘要剪枝
"""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

from .analytics_core import Abstract
from .exceptions import EmptyQueryError, QueryReducedToEmptyError
from .semantics_core import SimilarityProvider, expand_query
from .text_processing import analyze

DEFAULT_EXPANSION_N = 2


@dataclass
class ProcessedQuery:
    """前處理後的查詢"""
    raw: str
    terms: List[str]
    expanded: List[str]
    session_id: str = ""


@dataclass
class PruneDecision:
    """剪枝決策"""
    scored: List[Tuple[int, float]] = field(default_factory=list)
    chosen: List[int] = field(default_factory=list)


def process_query(raw: str, session_id: str, p: SimilarityProvider,
                  n: int = DEFAULT_EXPANSION_N) -> ProcessedQuery:
    """Normalize, drop stop-words, stem, split; expand with up to n neighbours per term."""
    if not raw or not raw.strip():
        raise EmptyQueryError()
    terms = list(dict.fromkeys(analyze(raw)))
    if not terms:
        raise QueryReducedToEmptyError(raw)
    return ProcessedQuery(raw=raw, terms=terms, expanded=expand_query(terms, n, p), session_id=session_id)


def score_abstract(terms: Sequence[str], abstract: Abstract, p: SimilarityProvider) -> float:
    """Mean over terms of the best match in the abstract; verbatim hits count 1.0."""
    if not terms or not abstract.entries:
        return 0.0
    members = abstract.terms()
    member_set = set(members)
    total = 0.0
    for term in terms:
        if term in member_set:
            total += 1.0
        else:
            total += max(p.similarity(term, m) for m in members)
    return total / len(terms)


def prune(q: ProcessedQuery, abstracts: Sequence[Abstract], k: int, p: SimilarityProvider) -> PruneDecision:
    """Top-k clusters by abstract score over the expanded terms; ties by lower id."""
    if not abstracts:
        raise ValueError("no abstracts to prune with")
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = [(a.cluster_id, score_abstract(q.expanded, a, p))
              for a in sorted(abstracts, key=lambda a: a.cluster_id)]
    ranked = sorted(scored, key=lambda item: (-round(item[1], 12), item[0]))
    return PruneDecision(scored=scored, chosen=[cluster_id for cluster_id, _ in ranked[:k]])
