#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Markov weighting, cluster statistics and abstract maintenance."""

import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prunesearch.analytics_core import (
    Abstract,
    AbstractEntry,
    ClusterStats,
    DecisionKind,
    MaintenancePolicy,
    MarkovModel,
    SearchRecord,
    avg_query_similarity,
    build_markov,
    cluster_popularity,
    compute_cluster_stats,
    converge,
    coverage_report,
    init_abstracts,
    integrate_term,
    maintain_abstracts,
    policy_radius,
    qualified_terms,
    select_abstract,
    semantic_radius,
    split_sessions,
    step,
    user_interest,
)
from prunesearch.config import AnalyticsConfig
from prunesearch.exceptions import NoHistoryError, NoQueryTrafficError, UnknownPolicyError

from tests.helpers import TableSimilarity, make_token

P2 = np.array([[0.5, 0.5], [0.2, 0.8]])
FIG3_SIMILARITY = TableSimilarity({
    ("viewer", "display"): 0.62,
    ("display", "monitor"): 0.45,
    ("viewer", "monitor"): 0.40,
})


def session(session_id, terms, cluster=0, start=0.0):
    return [
        SearchRecord(session_id, start + i, " ".join(t), list(t), [cluster], 1)
        for i, t in enumerate(terms)
    ]


def model(p, v, states=("a", "b")):
    return MarkovModel(0, list(states), np.asarray(p, dtype=float), np.asarray(v, dtype=float))


def stats_with(sr, cluster_id=0):
    return ClusterStats(cluster_id=cluster_id, q=1, q_bar=1.0, sigma=0.0, delta_bar=0.0,
                        beta=1.0, gamma=1, sr=sr)


class TestSessions:
    def test_grouped_by_id(self):
        records = session("s1", [["a"]]) + session("s2", [["b"]]) + session("s1", [["c"]], start=5)
        groups = split_sessions(records)
        assert sorted(len(g) for g in groups) == [1, 2]

    def test_anonymous_split_on_gap(self):
        records = session("", [["a"], ["b"]]) + session("", [["c"]], start=10_000)
        assert [len(g) for g in split_sessions(records, gap_s=1800)] == [2, 1]


class TestBuildMarkov:
    def test_alternating(self):
        m = build_markov(session("s", [["a"], ["b"], ["a"], ["b"]]), 0)
        assert m.states == ["a", "b"]
        np.testing.assert_allclose(m.transition, [[0, 1], [1, 0]])
        np.testing.assert_allclose(m.state_prob, [0.5, 0.5])
        assert m.is_valid()

    def test_dangling_rows_uniform(self):
        history = session("s1", [["a"]]) + session("s2", [["b"]])
        m = build_markov(history, 0)
        np.testing.assert_allclose(m.transition, [[0.5, 0.5], [0.5, 0.5]])

    def test_terminal_position_dropped(self):
        m = build_markov(session("s", [["a"], ["b"], ["b"]]), 0)
        np.testing.assert_allclose(m.transition, [[0, 1], [0, 1]])
        np.testing.assert_allclose(m.state_prob, [1 / 3, 2 / 3])

    def test_no_history(self):
        with pytest.raises(NoHistoryError, match="no history for cluster"):
            build_markov(session("s", [["a"]], cluster=1), 0)


class TestStep:
    def test_identity(self):
        np.testing.assert_allclose(step(model(np.eye(2), [0.3, 0.7])), [0.3, 0.7])

    def test_row_read_off(self):
        np.testing.assert_allclose(step(model(P2, [1.0, 0.0])), [0.5, 0.5])

    def test_product(self):
        np.testing.assert_allclose(step(model(P2, [0.5, 0.5])), [0.35, 0.65])


class TestConverge:
    def test_two_state(self):
        result = converge(model(P2, [1.0, 0.0]))
        assert result.converged
        np.testing.assert_allclose(result.state_prob, [2 / 7, 5 / 7], atol=1e-4)

    def test_absorbing(self):
        result = converge(model([[1, 0], [1, 0]], [0.5, 0.5]))
        np.testing.assert_allclose(result.state_prob, [1.0, 0.0])

    def test_identity_returns_initial(self):
        result = converge(model(np.eye(2), [0.3, 0.7]))
        assert result.iterations == 1
        np.testing.assert_allclose(result.state_prob, [0.3, 0.7])

    def test_iteration_cap_is_not_fatal(self):
        periodic = model([[0, 1], [1, 0]], [1.0, 0.0])
        result = converge(periodic, max_iter=10)
        assert not result.converged
        assert result.iterations == 10

    def test_matches_linear_solve(self):
        rng = np.random.default_rng(42)
        started = time.perf_counter()
        for _ in range(50):
            p = rng.random((10, 10)) + 0.01
            p /= p.sum(axis=1, keepdims=True)
            a = np.vstack([p.T - np.eye(10), np.ones(10)])
            b = np.zeros(11)
            b[-1] = 1.0
            expected = np.linalg.lstsq(a, b, rcond=None)[0]
            result = converge(model(p, np.full(10, 0.1), states=[str(i) for i in range(10)]), eps=1e-10)
            assert np.abs(result.state_prob - expected).sum() <= 1e-5
        assert time.perf_counter() - started < 1.0


class TestQualifiedTerms:
    def test_above_one_over_m(self):
        m = model(P2, [2 / 7, 5 / 7], states=("t1", "t2"))
        [(term, weight)] = qualified_terms(m)
        assert term == "t2"
        assert weight == pytest.approx(0.7143, abs=1e-4)

    def test_theta_zero_keeps_all(self):
        assert len(qualified_terms(model(P2, [2 / 7, 5 / 7]), theta=0.0)) == 2

    def test_uniform_is_strictly_excluded(self):
        assert qualified_terms(model(P2, [0.5, 0.5])) == []


class TestStatistics:
    @pytest.mark.parametrize("q, q_bar, expected", [(30, 20, 0.5), (20, 20, 0.0), (0, 20, -1.0)])
    def test_popularity(self, q, q_bar, expected):
        assert cluster_popularity(q, q_bar) == pytest.approx(expected)

    def test_no_traffic(self):
        with pytest.raises(NoQueryTrafficError, match="no query traffic"):
            cluster_popularity(3, 0)

    def test_query_similarity(self, animal_provider):
        assert avg_query_similarity([["dog"], ["dog"]], animal_provider) == 1.0
        assert avg_query_similarity([["zork"], ["quux"]], animal_provider) == 0.0
        assert avg_query_similarity([["dog"], ["cat"]], animal_provider) == pytest.approx(0.6667, abs=1e-4)
        assert avg_query_similarity([["dog", "cat"]], animal_provider) == 1.0

    def test_query_similarity_mixed_lengths(self, animal_provider):
        # ["dog"] into ["cat", "dog"] matches exactly; the equal-length pair is 2/3.
        value = avg_query_similarity([["dog"], ["cat", "dog"], ["cat"]], animal_provider)
        assert value == pytest.approx((1.0 + 2 / 3 + 1.0) / 3)

    @pytest.mark.parametrize("delta, sigma, expected", [(0.5, 0.5, 1.0), (1.0, 1.0, 0.5), (0.1, -0.5, 10.0)])
    def test_user_interest(self, delta, sigma, expected):
        assert user_interest(delta, sigma) == pytest.approx(expected)

    def test_semantic_radius(self):
        assert semantic_radius(0.5, 0.1, 100) == pytest.approx(0.3846, abs=1e-4)
        assert semantic_radius(0.0, 0.0, 10) == 0.95
        assert semantic_radius(0.2, -0.5, 1) == 0.95

    def test_semantic_radius_rejects_empty_cluster(self):
        with pytest.raises(ValueError):
            semantic_radius(0.5, 0.1, 0)

    def test_policy_radius(self):
        assert policy_radius(MaintenancePolicy.STATIC_S3BD, 0.5, 0.1, 100) is None
        assert policy_radius(MaintenancePolicy.EDGE_BASED, 0.5, 0.1, 100) == pytest.approx(0.3846, abs=1e-4)
        assert policy_radius(MaintenancePolicy.GAMMA_DELTA, 0.5, 0.1, 100) == pytest.approx(0.4)
        assert policy_radius(MaintenancePolicy.BETA_ONLY, 0.5, 0.5, 100) == 0.95

    def test_unknown_policy(self):
        with pytest.raises(UnknownPolicyError, match="unknown policy: greedy"):
            MaintenancePolicy.parse("greedy")

    def test_cluster_stats(self, animal_provider):
        history = session("s", [["dog"], ["cat"]], cluster=0) + session("t", [["dog"]], cluster=1, start=10)
        stats = compute_cluster_stats(history, {0: 100, 1: 10}, animal_provider)
        assert stats[0].q == 2
        assert stats[0].q_bar == 1.5
        assert stats[1].sigma == pytest.approx(-1 / 3)
        assert stats[0].delta_bar == pytest.approx(2 / 3)

    @settings(max_examples=100, deadline=None)
    @given(
        delta=st.floats(0.0, 1.0),
        sigma=st.floats(-1.0, 50.0),
        gamma=st.integers(1, 10**6),
        bounds=st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 1.0)).map(sorted),
    )
    def test_radius_stays_clamped(self, delta, sigma, gamma, bounds):
        lo, hi = bounds
        value = semantic_radius(delta, sigma, gamma, lo, hi)
        assert lo <= value <= hi


class TestSelectAbstract:
    def test_most_similar_abstract(self, pet_provider):
        abstracts = [Abstract(0, [AbstractEntry("dog", 0.5), AbstractEntry("cat", 0.5)]),
                     Abstract(1, [AbstractEntry("engine", 0.5)])]
        assert select_abstract("puppy", 0.4, abstracts, {}, pet_provider) == 0

    def test_hit_count_breaks_tie(self, pet_provider):
        abstracts = [Abstract(0, [AbstractEntry("dog", 0.5)]), Abstract(1, [AbstractEntry("engine", 0.5)])]
        hits = {("zork", 1): 3, ("zork", 0): 1}
        assert select_abstract("zork", 0.4, abstracts, hits, pet_provider) == 1

    def test_lowest_id_breaks_remaining_tie(self, pet_provider):
        abstracts = [Abstract(3, []), Abstract(2, [])]
        assert select_abstract("zork", 0.4, abstracts, {}, pet_provider) == 2

    def test_single_abstract(self, pet_provider):
        assert select_abstract("zork", 0.4, [Abstract(7, [])], {}, pet_provider) == 7

    def test_holder_wins(self, pet_provider):
        abstracts = [Abstract(0, [AbstractEntry("dog", 0.5)]), Abstract(1, [AbstractEntry("zork", 0.1)])]
        assert select_abstract("zork", 0.9, abstracts, {}, pet_provider) == 1


class TestIntegrateTerm:
    def test_outside_radius_is_added(self):
        abstract = Abstract(0, [AbstractEntry("viewer", 0.3)])
        decision = integrate_term("frozen", 0.5, abstract, stats_with(0.38), FIG3_SIMILARITY)
        assert decision.kind is DecisionKind.ADDED
        assert abstract.terms() == ["viewer", "frozen"]

    def test_heavier_candidate_replaces(self):
        abstract = Abstract(0, [AbstractEntry("viewer", 0.3)])
        decision = integrate_term("display", 0.8, abstract, stats_with(0.38), FIG3_SIMILARITY)
        assert decision.kind is DecisionKind.REPLACED
        assert decision.old_term == "viewer"
        assert abstract.terms() == ["display"]

    def test_lighter_candidate_discarded(self):
        abstract = Abstract(0, [AbstractEntry("viewer", 0.3)])
        decision = integrate_term("display", 0.1, abstract, stats_with(0.38), FIG3_SIMILARITY)
        assert decision.kind is DecisionKind.DISCARDED
        assert abstract.terms() == ["viewer"]

    def test_equal_weight_does_not_replace(self):
        abstract = Abstract(0, [AbstractEntry("viewer", 0.3)])
        decision = integrate_term("display", 0.3, abstract, stats_with(0.38), FIG3_SIMILARITY)
        assert decision.kind is DecisionKind.DISCARDED

    def test_radius_walkthrough(self):
        abstract = Abstract(0, [AbstractEntry("viewer", 0.3)])
        sr = stats_with(0.38)
        decisions = [
            integrate_term("frozen", 0.5, abstract, sr, FIG3_SIMILARITY),
            integrate_term("display", 0.8, abstract, sr, FIG3_SIMILARITY),
            integrate_term("monitor", 0.5, abstract, sr, FIG3_SIMILARITY),
        ]
        assert [(d.kind, d.term, d.old_term) for d in decisions] == [
            (DecisionKind.ADDED, "frozen", None),
            (DecisionKind.REPLACED, "display", "viewer"),
            (DecisionKind.DISCARDED, "monitor", None),
        ]
        assert sorted(abstract.terms()) == ["display", "frozen"]
        assert len({"viewer", "display", "monitor"} & set(abstract.terms())) == 1

    @settings(max_examples=100, deadline=None)
    @given(old=st.floats(0.0, 1.0), new=st.floats(0.0, 1.0))
    def test_replacement_only_raises_weight(self, old, new):
        abstract = Abstract(0, [AbstractEntry("viewer", old)])
        decision = integrate_term("display", new, abstract, stats_with(0.38), FIG3_SIMILARITY)
        assert (decision.kind is DecisionKind.REPLACED) == (new > old)
        assert abstract.entries[0].weight >= old

    @settings(max_examples=100, deadline=None)
    @given(candidates=st.lists(
        st.tuples(st.sampled_from(["viewer", "display", "monitor", "frozen", "dog", "cat"]), st.floats(0.0, 1.0)),
        max_size=20,
    ))
    def test_terms_stay_unique(self, candidates):
        abstract = Abstract(0, [AbstractEntry("viewer", 0.3)])
        for term, weight in candidates:
            integrate_term(term, weight, abstract, stats_with(0.38), FIG3_SIMILARITY)
        assert len(abstract.terms()) == len(set(abstract.terms()))


class TestMaintainAbstracts:
    @pytest.fixture
    def history(self):
        return (session("s1", [["zeta"], ["zeta"], ["zeta"], ["alpha"]], cluster=0)
                + session("s2", [["yotta"], ["yotta"], ["yotta"], ["omega"]], cluster=1, start=100))

    @pytest.fixture
    def abstracts(self):
        return [Abstract(0, [AbstractEntry("alpha", 0.5)]), Abstract(1, [AbstractEntry("omega", 0.5)])]

    def test_dominant_terms_join_their_cluster(self, history, abstracts, pet_provider):
        result = maintain_abstracts(history, abstracts, {0: 2, 1: 2}, pet_provider)
        by_id = {a.cluster_id: a for a in result.abstracts}
        assert "zeta" in by_id[0].terms()
        assert "yotta" in by_id[1].terms()
        assert result.summary() == {"added": 2, "replaced": 0, "discarded": 0}
        assert result.stats[0].sigma == 0.0

    def test_inputs_untouched(self, history, abstracts, pet_provider):
        maintain_abstracts(history, abstracts, {0: 2, 1: 2}, pet_provider)
        assert [a.terms() for a in abstracts] == [["alpha"], ["omega"]]

    def test_idempotent(self, history, abstracts, pet_provider):
        first = maintain_abstracts(history, abstracts, {0: 2, 1: 2}, pet_provider)
        second = maintain_abstracts(history, first.abstracts, {0: 2, 1: 2}, pet_provider)
        assert [a.to_dict() for a in first.abstracts] == [a.to_dict() for a in second.abstracts]

    @settings(max_examples=200, deadline=None)
    @given(searches=st.lists(
        st.tuples(st.sampled_from(["s1", "s2", "s3"]), st.sampled_from(list("abcde")), st.sampled_from([0, 1])),
        min_size=1, max_size=25,
    ))
    def test_maintaining_twice_changes_nothing(self, searches):
        provider = TableSimilarity({("a", "b"): 0.7, ("b", "e"): 0.6, ("c", "d"): 0.5, ("a", "e"): 0.3})
        history = [SearchRecord(sid, float(i), term, [term], [cluster], 1)
                   for i, (sid, term, cluster) in enumerate(searches)]
        abstracts = [Abstract(0, [AbstractEntry("e", 0.5)]), Abstract(1, [AbstractEntry("a", 0.5)])]
        first = maintain_abstracts(history, abstracts, {0: 5, 1: 5}, provider)
        second = maintain_abstracts(history, first.abstracts, {0: 5, 1: 5}, provider)
        assert [a.to_dict() for a in second.abstracts] == [a.to_dict() for a in first.abstracts]
        assert second.summary()["added"] == second.summary()["replaced"] == 0

    def test_empty_history(self, abstracts, pet_provider):
        result = maintain_abstracts([], abstracts, {0: 2, 1: 2}, pet_provider)
        assert [a.to_dict() for a in result.abstracts] == [a.to_dict() for a in abstracts]
        assert result.decisions == []

    def test_static_policy_only_reports(self, history, abstracts, pet_provider):
        result = maintain_abstracts(history, abstracts, {0: 2, 1: 2}, pet_provider, MaintenancePolicy.STATIC_S3BD)
        assert [a.terms() for a in result.abstracts] == [["alpha"], ["omega"]]
        assert set(result.stats) == {0, 1}

    def test_hits_refreshed(self, history, abstracts, pet_provider):
        result = maintain_abstracts(history, abstracts, {0: 2, 1: 2}, pet_provider)
        assert result.abstracts[0].get("alpha").hits == 1
        assert result.abstracts[0].get("zeta").hits == 3

    def test_custom_threshold(self, history, abstracts, pet_provider):
        cfg = AnalyticsConfig(theta=0.0)
        result = maintain_abstracts(history, abstracts, {0: 2, 1: 2}, pet_provider, cfg=cfg)
        assert result.summary()["discarded"] == 2


class TestInitAbstracts:
    def test_top_n(self):
        assoc = {0: [(make_token(i), i) for i in range(50)]}
        seeds = {make_token(i): f"term{i:02d}" for i in range(50)}
        [abstract] = init_abstracts(assoc, 10, seeds)
        assert abstract.terms() == [f"term{i:02d}" for i in range(49, 39, -1)]
        assert all(e.weight == pytest.approx(0.1) for e in abstract.entries)

    def test_short_cluster_takes_all(self):
        assoc = {0: [(make_token(i), 1) for i in range(4)]}
        seeds = {make_token(i): f"t{i}" for i in range(4)}
        assert len(init_abstracts(assoc, 10, seeds)[0].entries) == 4

    def test_ties_lexicographic(self):
        assoc = {0: [(make_token(1), 2), (make_token(2), 2)]}
        seeds = {make_token(1): "beta", make_token(2): "alpha"}
        assert init_abstracts(assoc, 1, seeds)[0].terms() == ["alpha"]


def test_coverage(pet_provider):
    [row] = coverage_report([Abstract(0, [AbstractEntry("dog", 1.0)])],
                            {0: ["dog", "cat", "engine"]}, {}, pet_provider)
    assert (row.covered, row.total) == (2, 3)
    assert row.coverage == pytest.approx(2 / 3)
    assert row.sr == 0.5
