#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""History log, abstract store and the maintenance scheduler."""

import pytest

from prunesearch.abstract_manager import AbstractManager, AbstractSnapshot, AbstractStore, HistoryLog, load_history
from prunesearch.analytics_core import Abstract, AbstractEntry, MaintenancePolicy, SearchRecord
from prunesearch.config import AnalyticsConfig
from prunesearch.exceptions import PruneSearchException


def record(i, terms=("zeta",), cluster=0):
    return SearchRecord("s1", float(i), " ".join(terms), list(terms), [cluster], 1)


def test_history_round_trips_through_file(tmp_path):
    path = tmp_path / "history.jsonl"
    log = HistoryLog(path)
    assert log.append(record(0)) == 1
    assert log.append(record(1, ("alpha",))) == 2
    reopened = HistoryLog(path)
    assert [r.terms for r in reopened.records()] == [["zeta"], ["alpha"]]
    assert reopened.size_bytes() == path.stat().st_size


def test_in_memory_history_has_size(tmp_path):
    log = HistoryLog()
    log.append(record(0))
    assert log.size_bytes() > 0
    assert len(log) == 1


def test_malformed_history(tmp_path):
    path = tmp_path / "history.jsonl"
    path.write_text('{"session_id": "s"}\n')
    with pytest.raises(PruneSearchException, match="malformed history record"):
        load_history(path)


def test_store_round_trip(tmp_path):
    store = AbstractStore(tmp_path / "abstracts.json")
    snapshot = AbstractSnapshot((Abstract(0, [AbstractEntry("dog", 0.5, 2)]),), {}, 3)
    store.save(snapshot, MaintenancePolicy.EDGE_BASED)
    loaded = store.load()
    assert loaded.version == 3
    assert loaded.abstracts[0].to_dict() == snapshot.abstracts[0].to_dict()


def test_store_unreadable(tmp_path):
    path = tmp_path / "abstracts.json"
    path.write_text("{not json")
    with pytest.raises(PruneSearchException):
        AbstractStore(path).load()


class TestManager:
    @pytest.fixture
    def manager(self, tmp_path, pet_provider):
        manager = AbstractManager(
            pet_provider, {0: 2},
            history=HistoryLog(tmp_path / "history.jsonl"),
            store=AbstractStore(tmp_path / "abstracts.json"),
            config=AnalyticsConfig(maintenance_every=3),
        )
        manager.initialize([Abstract(0, [AbstractEntry("alpha", 0.5)])])
        return manager

    def test_maintenance_due_every_n(self, manager):
        due = [manager.record(record(i)) for i in range(6)]
        assert due == [False, False, True, False, False, True]

    def test_maintain_publishes_new_version(self, manager):
        for i, terms in enumerate([("zeta",), ("zeta",), ("zeta",), ("alpha",)]):
            manager.record(record(i, terms))
        before = manager.snapshot()
        manager.maintain()
        after = manager.snapshot()
        assert after.version == before.version + 1
        assert "zeta" in after.by_id()[0].terms()
        assert before.by_id()[0].terms() == ["alpha"]

    def test_state_survives_restart(self, manager, tmp_path, pet_provider):
        for i in range(4):
            manager.record(record(i, ("zeta",) if i < 3 else ("alpha",)))
        manager.maintain()
        reopened = AbstractManager(
            pet_provider, {0: 2},
            history=HistoryLog(tmp_path / "history.jsonl"),
            store=AbstractStore(tmp_path / "abstracts.json"),
        )
        assert reopened.snapshot().by_id()[0].terms() == manager.snapshot().by_id()[0].terms()
        assert len(reopened.history) == 4
        assert 0 in reopened.snapshot().stats

    def test_coverage_uses_snapshot(self, manager):
        [row] = manager.coverage({0: ["alpha", "beta"]})
        assert (row.covered, row.total) == (1, 2)
