#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Shared test fixtures
共用測試資源
"""

import pytest
from fastapi.testclient import TestClient

from prunesearch.cloud_app import create_cloud_app
from prunesearch.cloud_index_core import EncryptedIndex
from prunesearch.cloud_service import CloudIndexService
from prunesearch.config import AnalyticsConfig, CloudConfig, EdgeConfig
from prunesearch.corpus_core import Document, ingest_documents
from prunesearch.edge_service import EdgeSearchService, LocalCloudBackend
from prunesearch.fixture_generator import FixtureSpec, generate_fixture
from prunesearch.semantics_core import Taxonomy, TaxonomySimilarity

from tests.helpers import make_index


@pytest.fixture
def key() -> bytes:
    return bytes(range(32))


@pytest.fixture
def other_key() -> bytes:
    return bytes(range(1, 33))


@pytest.fixture
def animal_provider() -> TaxonomySimilarity:
    """root -> animal -> {dog, cat}"""
    return TaxonomySimilarity(Taxonomy.from_edges([
        ("root", None), ("animal", "root"), ("dog", "animal"), ("cat", "animal"),
    ]))


@pytest.fixture
def pet_provider() -> TaxonomySimilarity:
    """entity -> animal -> {dog, cat, puppy}; entity -> machine -> engine"""
    return TaxonomySimilarity(Taxonomy.from_edges([
        ("entity", "-"), ("animal", "entity"), ("machine", "entity"),
        ("dog", "animal"), ("cat", "animal"), ("puppy", "animal"), ("engine", "machine"),
    ]))


@pytest.fixture
def clustering_index() -> EncryptedIndex:
    """10 tokens over 12 documents"""
    return make_index({
        0: {"d00", "d01", "d02", "d03"},
        1: {"d04", "d05", "d06"},
        2: {"d07", "d08"},
        3: {"d00", "d01", "d04"},
        4: {"d02", "d05", "d07"},
        5: {"d06", "d08"},
        6: {"d09"},
        7: {"d09", "d10"},
        8: {"d03"},
        9: {"d11"},
    })


@pytest.fixture(scope="session")
def generated_fixture():
    return generate_fixture()


@pytest.fixture(scope="session")
def small_fixture():
    """Two topics, short noise: 40 documents."""
    return generate_fixture(FixtureSpec(seed=7, topics=2, noise_words=20))


@pytest.fixture
def small_edge(small_fixture, key):
    """Ingested, clustered and initialized edge over an in-process cloud."""
    cloud = CloudIndexService(CloudConfig(k=2))
    config = EdgeConfig(prune_k=1, analytics=AnalyticsConfig(maintenance_every=5))
    edge = EdgeSearchService(key, TaxonomySimilarity(small_fixture.taxonomy()), LocalCloudBackend(cloud),
                             config, persist_state=False, auto_maintain=True)
    edge.ingest(small_fixture.documents)
    edge.cluster(2)
    edge.initialize_abstracts()
    return edge


@pytest.fixture
def cloud_service(small_fixture, key) -> CloudIndexService:
    service = CloudIndexService(CloudConfig(k=2))
    service.upload(ingest_documents(small_fixture.documents, 15, key).batch)
    service.cluster(2)
    return service


@pytest.fixture
def cloud_client(cloud_service) -> TestClient:
    return TestClient(create_cloud_app(cloud_service))


@pytest.fixture
def docs():
    return [
        Document("a", "router router switch"),
        Document("b", "router cable"),
    ]
