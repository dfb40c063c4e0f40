#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Core Edge Analytics: Markov search-pattern models, cluster statistics and abstract maintenance
邊緣分析核心邏輯 - 馬可夫搜尋模式、叢集統計與摘要維護
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .config import AnalyticsConfig
from .corpus_core import TermToken
from .exceptions import NoHistoryError, NoQueryTrafficError, UnknownPolicyError
from .semantics_core import SimilarityProvider

logger = logging.getLogger(__name__)

SIMILARITY_CHUNK = 256
MAX_INTEGRATION_ROUNDS = 50


class MaintenancePolicy(str, Enum):
    """摘要維護策略（語意半徑規則）"""
    STATIC_S3BD = "static_s3bd"
    BETA_ONLY = "beta_only"
    GAMMA_DELTA = "gamma_delta"
    EDGE_BASED = "edge_based"

    @classmethod
    def parse(cls, value) -> "MaintenancePolicy":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value))
        except ValueError:
            raise UnknownPolicyError(str(value)) from None


@dataclass
class SearchRecord:
    """一次搜尋的歷史紀錄"""
    session_id: str
    timestamp: float
    raw_query: str
    terms: List[str]
    hit_clusters: List[int]
    result_count: int = 0

    def to_dict(self) -> Dict:
        return {
            "session_id": self.session_id,
            "timestamp": self.timestamp,
            "raw_query": self.raw_query,
            "terms": list(self.terms),
            "hit_clusters": list(self.hit_clusters),
            "result_count": self.result_count,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "SearchRecord":
        return cls(
            session_id=str(data.get("session_id", "")),
            timestamp=float(data.get("timestamp", 0.0)),
            raw_query=str(data.get("raw_query", "")),
            terms=[str(t) for t in data["terms"]],
            hit_clusters=[int(c) for c in data.get("hit_clusters", [])],
            result_count=int(data.get("result_count", 0)),
        )


@dataclass
class MarkovModel:
    """單一叢集的搜尋詞馬可夫鏈"""
    cluster_id: int
    states: List[str]
    transition: np.ndarray
    state_prob: np.ndarray

    def with_state_prob(self, state_prob: np.ndarray) -> "MarkovModel":
        return MarkovModel(self.cluster_id, list(self.states), self.transition, np.asarray(state_prob, dtype=float))

    def is_valid(self, tol: float = 1e-9) -> bool:
        m = len(self.states)
        if self.transition.shape != (m, m) or self.state_prob.shape != (m,):
            return False
        if (self.transition < 0).any() or (self.state_prob < 0).any():
            return False
        return bool(np.allclose(self.transition.sum(axis=1), 1.0, atol=tol)
                    and abs(self.state_prob.sum() - 1.0) <= tol)


@dataclass
class ConvergenceResult:
    """收斂結果"""
    state_prob: np.ndarray
    iterations: int
    converged: bool


@dataclass
class ClusterStats:
    """叢集統計：q、σ、δ̄、β、γ 與語意半徑"""
    cluster_id: int
    q: int
    q_bar: float
    sigma: float
    delta_bar: float
    beta: float
    gamma: int
    sr: float
    sr_raw: Optional[float] = None
    policy: str = MaintenancePolicy.EDGE_BASED.value

    def to_dict(self) -> Dict:
        return {
            "cluster_id": self.cluster_id,
            "q": self.q,
            "q_bar": self.q_bar,
            "sigma": self.sigma,
            "delta_bar": self.delta_bar,
            "beta": self.beta,
            "gamma": self.gamma,
            "sr": self.sr,
            "sr_raw": self.sr_raw,
            "policy": self.policy,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "ClusterStats":
        return cls(**{k: data[k] for k in (
            "cluster_id", "q", "q_bar", "sigma", "delta_bar", "beta", "gamma", "sr",
        )}, sr_raw=data.get("sr_raw"), policy=data.get("policy", MaintenancePolicy.EDGE_BASED.value))


@dataclass
class AbstractEntry:
    term: str
    weight: float
    hits: int = 0


@dataclass
class Abstract:
    """叢集摘要：明文取樣詞"""
    cluster_id: int
    entries: List[AbstractEntry] = field(default_factory=list)

    def terms(self) -> List[str]:
        return [e.term for e in self.entries]

    def get(self, term: str) -> Optional[AbstractEntry]:
        for entry in self.entries:
            if entry.term == term:
                return entry
        return None

    def copy(self) -> "Abstract":
        return Abstract(self.cluster_id, [AbstractEntry(e.term, e.weight, e.hits) for e in self.entries])

    def to_dict(self) -> Dict:
        return {
            "cluster_id": self.cluster_id,
            "entries": [{"term": e.term, "weight": e.weight, "hits": e.hits} for e in self.entries],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "Abstract":
        return cls(
            cluster_id=int(data["cluster_id"]),
            entries=[AbstractEntry(str(e["term"]), float(e["weight"]), int(e.get("hits", 0)))
                     for e in data.get("entries", [])],
        )


class DecisionKind(str, Enum):
    ADDED = "added"
    REPLACED = "replaced"
    DISCARDED = "discarded"


@dataclass(frozen=True)
class IntegrationDecision:
    """整合決策"""
    kind: DecisionKind
    term: str
    cluster_id: int
    old_term: Optional[str] = None


@dataclass
class MaintenanceResult:
    abstracts: List[Abstract]
    stats: Dict[int, ClusterStats]
    decisions: List[IntegrationDecision] = field(default_factory=list)

    def summary(self) -> Dict[str, int]:
        counts = Counter(d.kind.value for d in self.decisions)
        return {kind.value: counts.get(kind.value, 0) for kind in DecisionKind}


@dataclass
class CoverageRow:
    """摘要取樣品質"""
    cluster_id: int
    covered: int
    total: int
    coverage: float
    sr: float


# ---------------------------------------------------------------------------
# Markov machinery

def split_sessions(history: Iterable[SearchRecord], gap_s: float = 1800.0) -> List[List[SearchRecord]]:
    """
    依工作階段分組

    Records with a session_id group by id; records without one are split
    wherever the inactivity gap exceeds gap_s. Each session is time ordered.
    """
    keyed: Dict[str, List[SearchRecord]] = {}
    anonymous: List[SearchRecord] = []
    for record in history:
        if record.session_id:
            keyed.setdefault(record.session_id, []).append(record)
        else:
            anonymous.append(record)

    sessions = [sorted(records, key=lambda r: r.timestamp) for records in keyed.values()]
    current: List[SearchRecord] = []
    for record in sorted(anonymous, key=lambda r: r.timestamp):
        if current and record.timestamp - current[-1].timestamp > gap_s:
            sessions.append(current)
            current = []
        current.append(record)
    if current:
        sessions.append(current)
    return sessions


def build_markov(history: Iterable[SearchRecord], cluster_id: int, gap_s: float = 1800.0) -> MarkovModel:
    """Transition counts between consecutive searched terms of the sessions that hit the cluster."""
    records = [r for r in history if cluster_id in r.hit_clusters]
    if not records:
        raise NoHistoryError(cluster_id)

    sequences = [[t for r in session for t in r.terms] for session in split_sessions(records, gap_s)]
    states = sorted({t for seq in sequences for t in seq})
    if not states:
        raise NoHistoryError(cluster_id)
    pos = {t: i for i, t in enumerate(states)}
    m = len(states)

    counts = np.zeros((m, m))
    freq = np.zeros(m)
    for seq in sequences:
        for term in seq:
            freq[pos[term]] += 1
        for a, b in zip(seq, seq[1:]):
            counts[pos[a], pos[b]] += 1

    row_sums = counts.sum(axis=1, keepdims=True)
    transition = np.where(row_sums > 0, counts / np.where(row_sums > 0, row_sums, 1.0), 1.0 / m)
    return MarkovModel(cluster_id, states, transition, freq / freq.sum())


def step(model: MarkovModel, state_prob: Optional[np.ndarray] = None) -> np.ndarray:
    """One power-iteration step: state_prob × transition."""
    vector = model.state_prob if state_prob is None else state_prob
    nxt = vector @ model.transition
    total = nxt.sum()
    return nxt / total if total > 0 else nxt


def converge(model: MarkovModel, eps: float = 1e-8, max_iter: int = 10_000) -> ConvergenceResult:
    if eps <= 0:
        raise ValueError("eps must be > 0")
    vector = model.state_prob
    for iteration in range(1, max_iter + 1):
        nxt = step(model, vector)
        if np.abs(nxt - vector).sum() < eps:
            return ConvergenceResult(nxt, iteration, True)
        vector = nxt
    logger.warning(f"Markov model for cluster {model.cluster_id} did not converge in {max_iter} iterations")
    return ConvergenceResult(vector, max_iter, False)


def qualified_terms(model: MarkovModel, theta: Optional[float] = None) -> List[Tuple[str, float]]:
    """Terms whose state probability is strictly above theta (default 1/m), heaviest first."""
    m = len(model.states)
    if m == 0:
        return []
    threshold = 1.0 / m if theta is None else theta
    chosen = [(t, float(p)) for t, p in zip(model.states, model.state_prob) if p > threshold]
    chosen.sort(key=lambda item: (-item[1], item[0]))
    return chosen


# ---------------------------------------------------------------------------
# Cluster statistics

def cluster_popularity(q: int, q_bar: float) -> float:
    """σ = (q − q̄)/q̄"""
    if q_bar <= 0:
        raise NoQueryTrafficError()
    return (q - q_bar) / q_bar


def query_similarity(a: Sequence[str], b: Sequence[str], p: SimilarityProvider) -> float:
    """Terms of the shorter query matched to their best partner; equal lengths average both directions."""
    if not a or not b:
        return 0.0

    def directed(short: Sequence[str], other: Sequence[str]) -> float:
        return sum(max(1.0 if t == u else p.similarity(t, u) for u in other) for t in short) / len(short)

    if len(a) < len(b):
        return directed(a, b)
    if len(b) < len(a):
        return directed(b, a)
    return (directed(a, b) + directed(b, a)) / 2.0


def avg_query_similarity(queries: Sequence[Sequence[str]], p: SimilarityProvider) -> float:
    """
    平均查詢相似度 δ̄

    Mean of query_similarity over all unordered pairs; one query gives 1.0,
    none gives 0.0. Vectorised over a term similarity matrix, grouped by
    query length.
    """
    queries = [list(q) for q in queries if q]
    if not queries:
        return 0.0
    if len(queries) == 1:
        return 1.0

    vocab = sorted({t for q in queries for t in q})
    pos = {t: i for i, t in enumerate(vocab)}
    sim = p.similarity_matrix(vocab)

    groups: Dict[int, np.ndarray] = {}
    for length in sorted({len(q) for q in queries}):
        groups[length] = np.array([[pos[t] for t in q] for q in queries if len(q) == length], dtype=int)

    total = 0.0
    pairs = 0
    lengths = sorted(groups)
    for li, la in enumerate(lengths):
        a_idx = groups[la]
        for lb in lengths[li:]:
            b_idx = groups[lb]
            for start in range(0, len(a_idx), SIMILARITY_CHUNK):
                chunk = a_idx[start:start + SIMILARITY_CHUNK]
                block = sim[chunk[:, None, :, None], b_idx[None, :, None, :]]
                a_into_b = block.max(axis=3).mean(axis=2)
                if la == lb:
                    pair_sim = (a_into_b + block.max(axis=2).mean(axis=2)) / 2.0
                    rows = np.arange(start, start + len(chunk))[:, None]
                    cols = np.arange(len(b_idx))[None, :]
                    upper = cols > rows
                    total += float(pair_sim[upper].sum())
                    pairs += int(upper.sum())
                else:
                    total += float(a_into_b.sum())
                    pairs += a_into_b.size
    return total / pairs if pairs else 1.0


def user_interest(delta_bar: float, sigma: float, floor: float = 0.1) -> float:
    """β = 1/(δ̄+σ), denominator floored."""
    return 1.0 / max(floor, delta_bar + sigma)


def _clamp(value: float, lo: float, hi: float) -> float:
    return min(hi, max(lo, value))


def semantic_radius(delta_bar: float, sigma: float, gamma: int, sr_min: float = 0.05,
                    sr_max: float = 0.95, floor: float = 0.1) -> float:
    """SR = 1/(δ̄ + σ + log10 γ), denominator floored, result clamped."""
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    return _clamp(1.0 / max(floor, delta_bar + sigma + math.log10(gamma)), sr_min, sr_max)


def raw_semantic_radius(delta_bar: float, sigma: float, gamma: int) -> Optional[float]:
    """Unclamped value for diagnostics; None when the denominator is zero."""
    denom = delta_bar + sigma + math.log10(max(gamma, 1))
    return None if denom == 0 else 1.0 / denom


def policy_radius(policy: MaintenancePolicy, delta_bar: float, sigma: float, gamma: int,
                  cfg: Optional[AnalyticsConfig] = None) -> Optional[float]:
    """Radius rule per policy; None means no maintenance."""
    cfg = cfg or AnalyticsConfig()
    policy = MaintenancePolicy.parse(policy)
    if policy is MaintenancePolicy.STATIC_S3BD:
        return None
    if policy is MaintenancePolicy.BETA_ONLY:
        return _clamp(user_interest(delta_bar, sigma, cfg.denom_floor), cfg.sr_min, cfg.sr_max)
    if policy is MaintenancePolicy.GAMMA_DELTA:
        denom = max(cfg.denom_floor, delta_bar + math.log10(max(gamma, 1)))
        return _clamp(1.0 / denom, cfg.sr_min, cfg.sr_max)
    return semantic_radius(delta_bar, sigma, max(gamma, 1), cfg.sr_min, cfg.sr_max, cfg.denom_floor)


def compute_cluster_stats(history: Sequence[SearchRecord], gammas: Dict[int, int], p: SimilarityProvider,
                          policy: MaintenancePolicy = MaintenancePolicy.EDGE_BASED,
                          cfg: Optional[AnalyticsConfig] = None) -> Dict[int, ClusterStats]:
    """q̄ is the number of recorded searches divided by the number of clusters."""
    cfg = cfg or AnalyticsConfig()
    policy = MaintenancePolicy.parse(policy)
    cluster_ids = sorted(gammas)
    if not cluster_ids or not history:
        return {}
    q_bar = len(history) / len(cluster_ids)

    stats = {}
    for cluster_id in cluster_ids:
        records = [r for r in history if cluster_id in r.hit_clusters]
        q = len(records)
        sigma = cluster_popularity(q, q_bar)
        delta_bar = avg_query_similarity([r.terms for r in records], p) if records else 0.0
        gamma = max(1, int(gammas[cluster_id]))
        sr = policy_radius(policy, delta_bar, sigma, gamma, cfg)
        if sr is None:
            sr = semantic_radius(delta_bar, sigma, gamma, cfg.sr_min, cfg.sr_max, cfg.denom_floor)
        stats[cluster_id] = ClusterStats(
            cluster_id=cluster_id,
            q=q,
            q_bar=q_bar,
            sigma=sigma,
            delta_bar=delta_bar,
            beta=user_interest(delta_bar, sigma, cfg.denom_floor),
            gamma=gamma,
            sr=sr,
            sr_raw=raw_semantic_radius(delta_bar, sigma, gamma),
            policy=policy.value,
        )
    return stats


def term_cluster_hits(history: Iterable[SearchRecord]) -> Dict[Tuple[str, int], int]:
    """(term, cluster_id) -> number of searches containing the term that hit the cluster"""
    hits: Counter = Counter()
    for record in history:
        for term in set(record.terms):
            for cluster_id in set(record.hit_clusters):
                hits[(term, cluster_id)] += 1
    return dict(hits)


# ---------------------------------------------------------------------------
# Abstract maintenance

def _entry_similarity(term: str, other: str, p: SimilarityProvider) -> float:
    return 1.0 if term == other else p.similarity(term, other)


def select_abstract(term: str, weight: float, abstracts: Sequence[Abstract],
                    hits: Dict[Tuple[str, int], int], p: SimilarityProvider) -> int:
    """
    挑選目標摘要

    An abstract already holding the term wins. Otherwise highest mean
    similarity to the members, then most hits for (term, cluster), then
    lowest cluster_id. An empty abstract scores 0.
    """
    if not abstracts:
        raise ValueError("at least one abstract is required")
    holding = sorted(a.cluster_id for a in abstracts if a.get(term) is not None)
    if holding:
        return holding[0]

    def rank(abstract: Abstract):
        if abstract.entries:
            score = sum(_entry_similarity(term, e.term, p) for e in abstract.entries) / len(abstract.entries)
        else:
            score = 0.0
        return (-round(score, 12), -hits.get((term, abstract.cluster_id), 0), abstract.cluster_id)

    return min(abstracts, key=rank).cluster_id


def integrate_term(term: str, weight: float, abstract: Abstract, stats: ClusterStats,
                   p: SimilarityProvider) -> IntegrationDecision:
    """
    Add when outside the semantic radius of every member; otherwise compete
    with the most similar member and replace it only on a strictly higher weight.
    """
    weight = _clamp(weight, 0.0, 1.0)
    existing = abstract.get(term)
    if existing is not None:
        existing.weight = weight
        return IntegrationDecision(DecisionKind.DISCARDED, term, abstract.cluster_id)

    within = [(p.similarity(term, e.term), e) for e in abstract.entries]
    within = [(s, e) for s, e in within if s >= stats.sr]
    if not within:
        abstract.entries.append(AbstractEntry(term, weight, 0))
        return IntegrationDecision(DecisionKind.ADDED, term, abstract.cluster_id)

    _, rival = min(within, key=lambda se: (-se[0], se[1].term))
    if weight > rival.weight:
        old = rival.term
        index = abstract.entries.index(rival)
        abstract.entries[index] = AbstractEntry(term, weight, 0)
        return IntegrationDecision(DecisionKind.REPLACED, term, abstract.cluster_id, old_term=old)
    return IntegrationDecision(DecisionKind.DISCARDED, term, abstract.cluster_id)


def maintain_abstracts(history: Sequence[SearchRecord], abstracts: Sequence[Abstract],
                       cluster_summaries: Dict[int, int], p: SimilarityProvider,
                       policy: MaintenancePolicy = MaintenancePolicy.EDGE_BASED,
                       cfg: Optional[AnalyticsConfig] = None) -> MaintenanceResult:
    """
    摘要維護

    cluster_summaries maps cluster_id to its term count γ. Statistics are
    recomputed first; then per cluster with history the Markov model is
    converged and each qualified term is routed to an abstract and
    integrated. The integration pass repeats until the abstracts stop
    changing, so maintaining the result again is a no-op. Decisions hold
    the first pass plus later changes. Inputs are never mutated.
    """
    cfg = cfg or AnalyticsConfig()
    policy = MaintenancePolicy.parse(policy)
    working = sorted((a.copy() for a in abstracts), key=lambda a: a.cluster_id)
    if not history or not working:
        return MaintenanceResult(working, {}, [])

    gammas = dict(cluster_summaries)
    for abstract in working:
        gammas.setdefault(abstract.cluster_id, max(1, len(abstract.entries)))
    stats = compute_cluster_stats(history, gammas, p, policy, cfg)
    hits = term_cluster_hits(history)
    decisions: List[IntegrationDecision] = []

    if policy is not MaintenancePolicy.STATIC_S3BD:
        routed: Dict[str, Tuple[int, str, float]] = {}
        for cluster_id in sorted(stats):
            if stats[cluster_id].q == 0:
                continue
            model = build_markov(history, cluster_id, cfg.session_gap_s)
            result = converge(model, cfg.eps, cfg.max_iter)
            model = model.with_state_prob(result.state_prob)
            for term, weight in qualified_terms(model, cfg.theta):
                # a term qualifying in several clusters is routed once, at its best weight
                if term not in routed or weight > routed[term][2]:
                    routed[term] = (cluster_id, term, weight)

        by_id = {a.cluster_id: a for a in working}
        for round_no in range(MAX_INTEGRATION_ROUNDS):
            before = [a.to_dict() for a in working]
            for cluster_id, term, weight in routed.values():
                hit_ids = sorted(c for c in by_id if hits.get((term, c), 0) > 0)
                candidates = [by_id[c] for c in hit_ids] or working
                target = select_abstract(term, weight, candidates, hits, p)
                target_stats = stats.get(target) or stats[cluster_id]
                decision = integrate_term(term, weight, by_id[target], target_stats, p)
                if round_no == 0 or decision.kind is not DecisionKind.DISCARDED:
                    decisions.append(decision)
            if [a.to_dict() for a in working] == before:
                break
        else:
            logger.warning(f"Abstracts still changing after {MAX_INTEGRATION_ROUNDS} integration rounds")

    for abstract in working:
        for entry in abstract.entries:
            entry.hits = hits.get((entry.term, abstract.cluster_id), 0)

    result = MaintenanceResult(working, stats, decisions)
    logger.info(f"Maintenance ({policy.value}) over {len(history)} searches: {result.summary()}")
    return result


def init_abstracts(cluster_doc_assoc: Dict[int, Sequence[Tuple[TermToken, int]]], n: int,
                   seed_terms: Dict[TermToken, str]) -> List[Abstract]:
    """The n best-documented tokens of each cluster with known plaintext, weight 1/n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    abstracts = []
    for cluster_id in sorted(cluster_doc_assoc):
        known = [(seed_terms[t], count) for t, count in cluster_doc_assoc[cluster_id] if t in seed_terms]
        known.sort(key=lambda item: (-item[1], item[0]))
        abstracts.append(Abstract(cluster_id, [AbstractEntry(term, 1.0 / n, 0) for term, _ in known[:n]]))
    return abstracts


def coverage_report(abstracts: Sequence[Abstract], cluster_terms: Dict[int, Iterable[str]],
                    stats: Dict[int, ClusterStats], p: SimilarityProvider,
                    default_sr: float = 0.5) -> List[CoverageRow]:
    """Share of each cluster's terms inside its abstract or within SR of an abstract member."""
    rows = []
    for abstract in sorted(abstracts, key=lambda a: a.cluster_id):
        terms = sorted(set(cluster_terms.get(abstract.cluster_id, ())))
        sr = stats[abstract.cluster_id].sr if abstract.cluster_id in stats else default_sr
        members = abstract.terms()
        covered = sum(
            1 for t in terms
            if any(_entry_similarity(t, m, p) >= sr for m in members)
        )
        rows.append(CoverageRow(
            cluster_id=abstract.cluster_id,
            covered=covered,
            total=len(terms),
            coverage=covered / len(terms) if terms else 0.0,
            sr=sr,
        ))
    return rows
