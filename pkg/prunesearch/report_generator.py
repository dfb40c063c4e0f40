#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Benchmark Report Tables
基準測試結果表格產生器 - 準確率、摘要負擔與時間拆解
"""

import logging
from pathlib import Path
from typing import Iterable, List, Mapping

import pandas as pd

from .analytics_core import ClusterStats, CoverageRow
from .bench_core import BenchReport
from .exceptions import BenchmarkError

logger = logging.getLogger(__name__)

ACCURACY_COLUMNS = [
    "policy", "seed", "k", "prune_k", "train_queries", "test_queries", "hits",
    "pruning_accuracy", "abstract_terms", "distinct_terms", "abstract_overhead",
    "edge_space_overhead", "mean_coverage", "maintenance_runs",
    "mean_search_ms", "mean_edge_ms", "mean_cloud_ms",
]


class BenchReportGenerator:
    """基準報告表格產生器"""

    def accuracy_table(self, reports: Mapping[str, BenchReport]) -> pd.DataFrame:
        """One row per policy: accuracy, overhead and the mean edge/cloud split."""
        rows = [{c: getattr(r, c) for c in ACCURACY_COLUMNS} for _, r in sorted(reports.items())]
        return pd.DataFrame(rows, columns=ACCURACY_COLUMNS)

    def timing_table(self, reports: Mapping[str, BenchReport]) -> pd.DataFrame:
        rows = [
            {"policy": name, "terms": t.terms, "count": t.count,
             "mean_edge_ms": t.mean_edge_ms, "mean_cloud_ms": t.mean_cloud_ms}
            for name, report in sorted(reports.items())
            for t in report.timing
        ]
        return pd.DataFrame(rows, columns=["policy", "terms", "count", "mean_edge_ms", "mean_cloud_ms"])

    def stats_table(self, stats: Iterable[ClusterStats]) -> pd.DataFrame:
        """Per-cluster σ, δ̄, β, γ and SR, as shown by `abstracts stats`."""
        rows = [s.to_dict() for s in sorted(stats, key=lambda s: s.cluster_id)]
        columns = ["cluster_id", "q", "q_bar", "sigma", "delta_bar", "beta", "gamma", "sr", "sr_raw", "policy"]
        return pd.DataFrame(rows, columns=columns)

    def coverage_table(self, rows: Iterable[CoverageRow]) -> pd.DataFrame:
        return pd.DataFrame(
            [{"cluster_id": r.cluster_id, "covered": r.covered, "total": r.total,
              "coverage": r.coverage, "sr": r.sr} for r in rows],
            columns=["cluster_id", "covered", "total", "coverage", "sr"],
        )

    def write_csv(self, reports: Mapping[str, BenchReport], path: Path) -> List[Path]:
        """Accuracy/overhead table at path, the timing breakdown next to it as <stem>_timing.csv."""
        if not reports:
            raise BenchmarkError("no benchmark reports to write")
        path = Path(path)
        timing_path = path.with_name(f"{path.stem}_timing.csv")
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            self.accuracy_table(reports).to_csv(path, index=False)
            self.timing_table(reports).to_csv(timing_path, index=False)
        except OSError as e:
            logger.error(f"Failed to write benchmark tables to {path}: {e}")
            raise BenchmarkError(f"cannot write benchmark tables: {e}", {"path": str(path)}) from e
        logger.info(f"Wrote benchmark tables for {len(reports)} policies to {path} and {timing_path}")
        return [path, timing_path]

    def render_text(self, frame: pd.DataFrame) -> str:
        if frame.empty:
            return "(no rows)"
        return frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")
