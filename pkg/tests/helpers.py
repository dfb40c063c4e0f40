#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Test helpers shared across modules."""

from typing import Dict, Tuple

from prunesearch.cloud_index_core import EncryptedIndex
from prunesearch.corpus_core import TermToken
from prunesearch.semantics_core import SimilarityProvider


class TableSimilarity(SimilarityProvider):
    """Similarity read from an explicit pair table; unknown pairs score 0."""

    def __init__(self, pairs: Dict[Tuple[str, str], float]):
        super().__init__()
        self.pairs = {tuple(sorted(k)): v for k, v in pairs.items()}

    def _compute(self, a: str, b: str) -> float:
        if a == b:
            return 1.0
        return self.pairs.get((a, b), 0.0)


def make_token(i: int) -> TermToken:
    return TermToken(bytes([i]) * 32)


def make_index(postings: Dict[int, set]) -> EncryptedIndex:
    docs = sorted({d for ids in postings.values() for d in ids})
    return EncryptedIndex(
        postings={make_token(i): set(ids) for i, ids in postings.items()},
        doc_store={d: b"x" for d in docs},
    )
