#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Policy comparison on the 200-document fixture (seed 42)."""

import time

import pytest

from prunesearch.analytics_core import MaintenancePolicy
from prunesearch.bench_core import BenchSetup, http_backend_factory, run_benchmark, split_benchmark, synthesize_queries
from prunesearch.client import read_wire_log
from prunesearch.semantics_core import TaxonomySimilarity

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def setup(generated_fixture):
    return BenchSetup(docs=generated_fixture.documents, provider=TaxonomySimilarity(generated_fixture.taxonomy()))


@pytest.fixture(scope="module")
def split(generated_fixture):
    return split_benchmark(synthesize_queries(generated_fixture.documents))


@pytest.fixture(scope="module")
def runs(setup, split):
    """policy -> (report, seconds)"""
    out = {}
    for policy in MaintenancePolicy:
        started = time.perf_counter()
        report = run_benchmark(*split, policy, setup)
        out[policy.value] = (report, time.perf_counter() - started)
    return out


def accuracy(runs, policy):
    return runs[policy][0].pruning_accuracy


def test_split_sizes(split):
    assert (len(split[0]), len(split[1])) == (455, 195)


def test_edge_based_beats_static(runs):
    assert accuracy(runs, "edge_based") >= accuracy(runs, "static_s3bd") + 0.05
    assert runs["edge_based"][1] < 60


def test_gamma_delta_trails_edge_based(runs):
    assert accuracy(runs, "gamma_delta") < accuracy(runs, "edge_based")


def test_beta_only_abstracts_are_larger(runs):
    assert runs["beta_only"][0].abstract_overhead > runs["edge_based"][0].abstract_overhead


def test_edge_based_overhead_bound(runs):
    assert runs["edge_based"][0].abstract_overhead < 0.01


def test_wire_capture_holds_no_keywords(generated_fixture, setup, split, tmp_path_factory):
    wire_log = tmp_path_factory.mktemp("wire") / "wire.jsonl"
    http_setup = BenchSetup(docs=setup.docs, provider=setup.provider, backend_factory=http_backend_factory(wire_log))
    run_benchmark(*split, "edge_based", http_setup)
    entries = read_wire_log(wire_log)
    assert entries
    keywords = generated_fixture.keywords()
    for entry in entries:
        assert not any(word in entry["body"] for word in keywords)
