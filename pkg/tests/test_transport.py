#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""HTTP surfaces of both tiers and the JSON clients."""

import json

import pytest
from fastapi.testclient import TestClient

from prunesearch import cloud_app
from prunesearch import client as client_module
from prunesearch.bench_core import synthesize_queries
from prunesearch.client import CloudClient, EdgeClient, read_wire_log
from prunesearch.cloud_app import create_cloud_app
from prunesearch.cloud_index_core import RankedResult
from prunesearch.corpus_core import build_upload, tokenize_term
from prunesearch.edge_app import create_edge_app
from prunesearch.exceptions import CloudUnavailableError, PayloadTooLargeError, RemoteHTTPError


@pytest.fixture
def token_hex(small_fixture, key):
    plan = small_fixture.topics[0]
    return tokenize_term(plan.signature, key).hex


class TestCloudApp:
    def test_health(self, cloud_client):
        body = cloud_client.get("/health").json()
        assert body["status"] == "healthy"
        assert body["details"]["documents"] == 40

    def test_search(self, cloud_client, token_hex):
        response = cloud_client.post("/v1/search", json={"tokens": [token_hex], "clusters": [0, 1],
                                                         "request_id": "r-1"})
        assert response.status_code == 200
        body = response.json()
        assert body["request_id"] == "r-1"
        assert len(body["entries"]) == 13

    def test_plaintext_field_rejected(self, cloud_client, token_hex):
        response = cloud_client.post("/v1/search", json={"tokens": [token_hex], "clusters": [0],
                                                         "terms": ["router"]})
        assert response.status_code == 400
        assert response.json()["message"] == "malformed request body"

    def test_non_hex_token_rejected(self, cloud_client):
        response = cloud_client.post("/v1/search", json={"tokens": ["router"], "clusters": [0]})
        assert response.status_code == 400

    def test_unknown_cluster(self, cloud_client, token_hex):
        response = cloud_client.post("/v1/search", json={"tokens": [token_hex], "clusters": [42]})
        assert response.status_code == 404
        assert response.json()["details"]["cluster_ids"] == [42]

    def test_empty_query(self, cloud_client):
        response = cloud_client.post("/v1/search", json={"tokens": [], "clusters": [0]})
        assert response.status_code == 400
        assert response.json()["message"] == "empty query"

    def test_malformed_json(self, cloud_client):
        response = cloud_client.post("/v1/search", content=b"{not json",
                                     headers={"content-type": "application/json"})
        assert response.status_code == 400

    def test_clusters_carry_no_plaintext(self, cloud_client, small_fixture):
        response = cloud_client.get("/v1/clusters", params={"request_id": "r-2"})
        body = response.json()
        assert body["k"] == 2
        assert body["request_id"] == "r-2"
        text = response.text
        assert not any(word in text for word in small_fixture.keywords())

    def test_malformed_upload(self, cloud_client):
        response = cloud_client.post("/v1/upload", content=b'{"type": "mystery"}\n')
        assert response.status_code == 400

    def test_oversized_upload(self, cloud_client, monkeypatch):
        monkeypatch.setattr(cloud_app, "MAX_UPLOAD_BYTES", 10)
        response = cloud_client.post("/v1/upload", content=b"x" * 11)
        assert response.status_code == 413

    def test_envelope_search(self, cloud_client, token_hex):
        response = cloud_client.post("/v1/message", json={
            "version": "1", "kind": "search", "request_id": "r-3",
            "payload": {"tokens": [token_hex], "clusters": [0, 1]},
        })
        body = response.json()
        assert body["kind"] == "search_result"
        assert body["request_id"] == "r-3"
        assert len(body["payload"]["entries"]) == 13

    def test_envelope_unknown_kind(self, cloud_client):
        body = cloud_client.post("/v1/message", json={"kind": "gossip", "request_id": "r-4"}).json()
        assert body["kind"] == "error"
        assert body["request_id"] == "r-4"

    def test_oversized_envelope_upload(self, cloud_client, cloud_service, monkeypatch):
        monkeypatch.setattr(cloud_app, "MAX_UPLOAD_BYTES", 10)
        before = cloud_service.health()
        body = cloud_client.post("/v1/message", json={
            "kind": "upload", "request_id": "r-5", "payload": {"jsonl": "x" * 11},
        }).json()
        assert body["kind"] == "error"
        assert body["payload"]["error_type"] == "payload_too_large"
        assert cloud_service.health() == before

    def test_envelope_bad_version(self, cloud_client):
        response = cloud_client.post("/v1/message", json={"version": "2", "kind": "search"})
        assert response.status_code == 400


class TestCloudClient:
    def test_upload_and_search(self, cloud_service, small_fixture, key):
        app_client = TestClient(create_cloud_app(cloud_service), base_url="http://cloud.local")
        client = CloudClient("http://cloud.local", client=app_client)
        summary = client.upload_batch(build_upload(small_fixture.documents[:1], 15, key))
        assert summary.new_tokens == 0
        result = client.remote_search([tokenize_term(small_fixture.topics[0].signature, key)], [0, 1])
        assert len(result.entries) == 13

    def test_unknown_cluster_surfaces_status(self, cloud_client, small_fixture, key):
        client = CloudClient("http://testserver", client=cloud_client)
        with pytest.raises(RemoteHTTPError) as exc_info:
            client.remote_search([tokenize_term(small_fixture.topics[0].signature, key)], [9])
        assert exc_info.value.status_code == 404

    def test_oversized_body_never_sent(self, cloud_client, docs, key, monkeypatch, tmp_path):
        monkeypatch.setattr(client_module, "MAX_BODY_BYTES", 16)
        wire_log = tmp_path / "wire.jsonl"
        client = CloudClient("http://testserver", wire_log_path=wire_log, client=cloud_client)
        with pytest.raises(PayloadTooLargeError):
            client.upload_batch(build_upload(docs, 15, key))
        assert read_wire_log(wire_log) == []

    def test_unreachable_cloud(self, key):
        with CloudClient("http://127.0.0.1:9", timeout_s=1.0) as client:
            with pytest.raises(CloudUnavailableError):
                client.remote_search([tokenize_term("router", key)], [0])

    def test_wire_log_holds_only_tokens(self, cloud_client, small_fixture, key, tmp_path):
        wire_log = tmp_path / "wire.jsonl"
        client = CloudClient("http://testserver", wire_log_path=wire_log, client=cloud_client)
        token = tokenize_term(small_fixture.topics[1].signature, key)
        client.remote_search([token], [0, 1], request_id="r-5")
        [entry] = read_wire_log(wire_log)
        assert entry["method"] == "POST"
        assert token.hex in entry["body"]
        assert small_fixture.topics[1].signature not in entry["body"]


class TestEdgeApp:
    @pytest.fixture
    def edge_http(self, small_edge):
        small_edge.auto_maintain = False
        return TestClient(create_edge_app(small_edge), base_url="http://edge.local")

    def test_remote_matches_in_process(self, small_edge, edge_http, small_fixture):
        remote = EdgeClient("http://edge.local", client=edge_http)
        for q in synthesize_queries(small_fixture.documents)[:25]:
            local = small_edge.execute_search(q.text, session_id=q.source_doc).result
            response = remote.remote_query(q.text, session_id=q.source_doc)
            over_http = RankedResult([(e.doc_id, e.score) for e in response.entries], response.matched_clusters)
            assert json.dumps(over_http.to_dict()) == json.dumps(local.to_dict())

    def test_query_response(self, edge_http, small_fixture):
        word = small_fixture.topics[0].signature
        body = edge_http.post("/v1/query", json={"query": word, "request_id": "q-1"}).json()
        assert body["request_id"] == "q-1"
        assert body["terms"] == [word]
        assert len(body["chosen_clusters"]) == 1

    def test_stop_words_only(self, edge_http):
        response = edge_http.post("/v1/query", json={"query": "the of and"})
        assert response.status_code == 400
        assert response.json()["message"] == "query reduced to empty"

    def test_missing_query(self, edge_http):
        assert edge_http.post("/v1/query", json={"session_id": "s"}).status_code == 400

    def test_cloud_down_is_502(self, small_edge, edge_http):
        class DownBackend:
            def remote_search(self, *args, **kwargs):
                raise CloudUnavailableError("cannot reach cloud")

        small_edge.backend = DownBackend()
        response = edge_http.post("/v1/query", json={"query": "anything"})
        assert response.status_code == 502
        assert response.json()["details"]["error_type"] == "cloud_unavailable"

    def test_abstracts_and_maintain(self, edge_http, small_fixture):
        for plan in small_fixture.topics:
            edge_http.post("/v1/query", json={"query": " ".join(plan.pool[:3]), "session_id": "s"})
        abstracts = edge_http.get("/v1/abstracts").json()
        assert [c["cluster_id"] for c in abstracts["clusters"]] == [0, 1]
        summary = edge_http.post("/v1/maintain").json()
        assert set(summary["decisions"]) == {"added", "replaced", "discarded"}
        stats = edge_http.get("/v1/stats").json()
        assert [s["cluster_id"] for s in stats["clusters"]] == [0, 1]

    def test_envelope_query(self, edge_http, small_fixture):
        body = edge_http.post("/v1/message", json={
            "kind": "query", "request_id": "q-2",
            "payload": {"query": small_fixture.topics[1].signature},
        }).json()
        assert body["kind"] == "search_result"
        assert body["request_id"] == "q-2"

    def test_envelope_wrong_kind(self, edge_http):
        body = edge_http.post("/v1/message", json={"kind": "upload"}).json()
        assert body["kind"] == "error"
