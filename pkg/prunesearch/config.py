#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Configuration and Logging Setup for the Pruned Secure Search System
邊緣剪枝加密搜尋系統 - 設定與日誌
"""

import logging
import os
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field, model_validator

LOG_ENV_VAR = "PRUNESEARCH_LOG"
HOST_ENV_VAR = "PRUNESEARCH_HOST"
PORT_ENV_VAR = "PRUNESEARCH_PORT"

_logging_configured = False


def setup_logging(level: Optional[str] = None) -> None:
    """Configure root logging once, level from PRUNESEARCH_LOG unless given."""
    global _logging_configured
    name = (level or os.environ.get(LOG_ENV_VAR) or "INFO").upper()
    numeric = getattr(logging, name, None)
    if not isinstance(numeric, int):
        numeric = logging.INFO
    if _logging_configured:
        logging.getLogger().setLevel(numeric)
        return
    logging.basicConfig(
        level=numeric,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    _logging_configured = True


def default_host() -> str:
    return os.environ.get(HOST_ENV_VAR, "127.0.0.1")


def default_port(fallback: int) -> int:
    value = os.environ.get(PORT_ENV_VAR)
    return int(value) if value else fallback


class AnalyticsConfig(BaseModel):
    """摘要管理（Abstract Manager）配置"""
    eps: float = Field(1e-8, gt=0.0, description="L1 convergence threshold for the Markov power iteration")
    max_iter: int = Field(10_000, ge=1, description="Maximum Markov iterations")
    theta: Optional[float] = Field(None, ge=0.0, le=1.0, description="Qualification threshold; None means 1/m")
    sr_min: float = Field(0.05, ge=0.0, le=1.0, description="Lower clamp for the semantic radius")
    sr_max: float = Field(0.95, ge=0.0, le=1.0, description="Upper clamp for the semantic radius")
    denom_floor: float = Field(0.1, gt=0.0, description="Floor applied to radius and interest denominators")
    maintenance_every: int = Field(100, ge=1, description="Run maintenance after this many recorded searches")
    session_gap_s: float = Field(1800.0, gt=0.0, description="Inactivity gap that splits sessions without an id")
    init_abstract_size: int = Field(10, ge=1, description="Terms per abstract at initialization")

    @model_validator(mode="after")
    def _check_clamp(self) -> "AnalyticsConfig":
        if self.sr_min > self.sr_max:
            raise ValueError("sr_min must not exceed sr_max")
        return self


class CloudConfig(BaseModel):
    """雲端層配置"""
    index_dir: Path = Field(Path("cloud_index"), description="Directory holding the persisted encrypted index")
    k: int = Field(10, ge=1, description="Number of clusters")
    kmeans_iters: int = Field(0, ge=0, description="Optional centroid refinement passes after single-pass assignment")


class EdgeConfig(BaseModel):
    """邊緣層配置"""
    key_path: Optional[Path] = Field(None, description="32 raw bytes or 64 hex chars")
    cloud_addr: str = Field("http://127.0.0.1:8010", description="Base URL of the cloud service")
    state_dir: Path = Field(Path("edge_state"), description="Holds history.jsonl, abstracts.json and seed_terms.json")
    taxonomy_path: Optional[Path] = Field(None, description="child<TAB>parent taxonomy file")
    embedding_path: Optional[Path] = Field(None, description="Embedding table; used when no taxonomy is given")
    prune_k: int = Field(3, ge=1, description="Clusters searched per query")
    expansion_n: int = Field(2, ge=0, description="Expansion terms per query term")
    timeout_s: float = Field(10.0, gt=0.0, description="Cloud call timeout in seconds")
    wire_log_path: Optional[Path] = Field(None, description="Optional JSON-lines capture of cloud-bound requests")
    policy: str = Field("edge_based", description="Abstract maintenance policy: static_s3bd, beta_only, gamma_delta or edge_based")
    keywords_per_doc: int = Field(15, ge=1, description="Keywords extracted per document at ingest")
    analytics: AnalyticsConfig = Field(default_factory=AnalyticsConfig)

    @classmethod
    def from_file(cls, path: Path) -> "EdgeConfig":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))
