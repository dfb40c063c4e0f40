#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Pydantic Models for the Cloud and Edge HTTP APIs
雲端層與邊緣層 API 模型定義
"""

from datetime import datetime
from enum import Enum
from typing import Annotated, Any, Dict, List, Literal

from pydantic import BaseModel, ConfigDict, Field, StringConstraints

TOKEN_PATTERN = r"^[0-9a-f]{64}$"
TokenHex = Annotated[str, StringConstraints(pattern=TOKEN_PATTERN)]


class WireKind(str, Enum):
    """訊息類型枚舉"""
    UPLOAD = "upload"
    SEARCH = "search"
    SEARCH_RESULT = "search_result"
    CLUSTER_INFO = "cluster_info"
    QUERY = "query"
    ERROR = "error"


class WireMessage(BaseModel):
    """版本化訊息封套"""
    version: Literal["1"] = Field("1", description="協定版本")
    kind: str = Field(..., description="訊息類型")
    payload: Dict[str, Any] = Field(default_factory=dict, description="依類型而定的內容")
    request_id: str = Field("", description="請求編號，回應時原樣帶回")


class RankedEntry(BaseModel):
    """單筆排序結果"""
    doc_id: str = Field(..., description="文件編號")
    score: float = Field(..., ge=0.0, description="相關度分數")


class SearchRequest(BaseModel):
    """雲端搜尋請求：只接受權杖與叢集編號"""
    model_config = ConfigDict(extra="forbid")

    tokens: List[TokenHex] = Field(..., description="權杖（小寫十六進位）")
    clusters: List[int] = Field(..., description="要搜尋的叢集編號")
    request_id: str = Field("", description="請求編號")


class SearchResponse(BaseModel):
    """雲端搜尋回應"""
    request_id: str = Field("", description="請求編號")
    entries: List[RankedEntry] = Field(default_factory=list, description="排序結果")
    matched_clusters: List[int] = Field(default_factory=list, description="有權杖命中的叢集")


class UploadResponse(BaseModel):
    """上傳回應"""
    request_id: str = Field("", description="請求編號")
    documents: int = Field(..., ge=0, description="本批文件數")
    tokens: int = Field(..., ge=0, description="本批權杖數")
    new_tokens: int = Field(..., ge=0, description="首次出現的權杖數")
    total_documents: int = Field(..., ge=0, description="索引內文件總數")
    total_tokens: int = Field(..., ge=0, description="索引內權杖總數")


class ClusterInfo(BaseModel):
    """叢集中繼資料（不含明文）"""
    cluster_id: int = Field(..., ge=0, description="叢集編號")
    size: int = Field(..., ge=0, description="成員權杖數")
    centroid: str = Field(..., description="中心權杖")
    doc_counts: Dict[str, int] = Field(default_factory=dict, description="權杖 -> 文件數")


class ClustersResponse(BaseModel):
    """叢集列表回應"""
    request_id: str = Field("", description="請求編號")
    k: int = Field(..., ge=0, description="叢集數")
    orphan_count: int = Field(0, ge=0, description="零相關度而歸入叢集 0 的權杖數")
    clusters: List[ClusterInfo] = Field(default_factory=list, description="叢集列表")


class ClusterRequest(BaseModel):
    """重新分群請求"""
    model_config = ConfigDict(extra="forbid")

    k: int = Field(10, ge=1, description="叢集數")
    kmeans_iters: int = Field(0, ge=0, description="中心修正迭代次數")
    request_id: str = Field("", description="請求編號")


class QueryRequest(BaseModel):
    """邊緣查詢請求"""
    model_config = ConfigDict(extra="forbid")

    query: str = Field(..., min_length=1, description="原始查詢字串")
    session_id: str = Field("", description="使用者工作階段編號")
    request_id: str = Field("", description="請求編號")


class QueryResponse(BaseModel):
    """邊緣查詢回應"""
    request_id: str = Field("", description="請求編號")
    entries: List[RankedEntry] = Field(default_factory=list, description="排序結果")
    chosen_clusters: List[int] = Field(default_factory=list, description="剪枝後搜尋的叢集")
    matched_clusters: List[int] = Field(default_factory=list, description="有權杖命中的叢集")
    terms: List[str] = Field(default_factory=list, description="前處理後的查詢詞")
    edge_ms: float = Field(0.0, ge=0.0, description="邊緣處理時間(毫秒)")
    cloud_ms: float = Field(0.0, ge=0.0, description="雲端呼叫時間(毫秒)")


class HealthCheckResponse(BaseModel):
    """健康檢查回應"""
    status: str = Field("healthy", description="服務狀態")
    timestamp: datetime = Field(default_factory=datetime.now, description="檢查時間")
    service: str = Field(..., description="服務名稱")
    details: Dict[str, Any] = Field(default_factory=dict, description="服務狀態細節")
