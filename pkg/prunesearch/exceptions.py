#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Custom Exceptions for the Pruned Secure Search System
邊緣剪枝加密搜尋系統 - 自定義例外處理
"""

import logging
from datetime import datetime
from typing import Optional, Dict, Any, List, Tuple

from fastapi import FastAPI, HTTPException, Request
from fastapi.encoders import jsonable_encoder
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

logger = logging.getLogger(__name__)


class PruneSearchException(Exception):
    """系統基礎例外類別"""
    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


class CorpusError(PruneSearchException):
    """語料處理錯誤"""
    def __init__(self, message: str, doc_id: str = "", details: Optional[Dict[str, Any]] = None):
        self.doc_id = doc_id
        super().__init__(message, details)


class SemanticsError(PruneSearchException):
    """分類樹或詞向量檔案錯誤"""
    def __init__(self, message: str, path: str = "", details: Optional[Dict[str, Any]] = None):
        self.path = path
        super().__init__(message, details)


class ClusteringError(PruneSearchException):
    """叢集建立錯誤"""
    pass


class TokenizationError(PruneSearchException):
    """詞彙權杖化錯誤"""
    pass


class CipherError(PruneSearchException):
    """文件加解密錯誤（含驗證失敗）"""
    pass


class IndexStoreError(PruneSearchException):
    """索引持久化錯誤"""
    def __init__(self, message: str, path: str = "", details: Optional[Dict[str, Any]] = None):
        self.path = path
        super().__init__(message, details)


class IndexVersionError(IndexStoreError):
    """索引版本或標頭不符"""
    pass


class TruncatedIndexError(IndexStoreError):
    """索引檔案不完整"""
    pass


class UnknownTokenError(PruneSearchException):
    """未知的詞彙權杖"""
    def __init__(self, token_hex: str, details: Optional[Dict[str, Any]] = None):
        self.token_hex = token_hex
        super().__init__(f"unknown token {token_hex}", details)


class UnknownClusterError(PruneSearchException):
    """未知的叢集編號"""
    def __init__(self, cluster_ids: List[int], details: Optional[Dict[str, Any]] = None):
        self.cluster_ids = list(cluster_ids)
        super().__init__(f"unknown cluster id(s): {self.cluster_ids}", details)


class EmptyQueryError(PruneSearchException):
    """空查詢"""
    def __init__(self, message: str = "empty query"):
        super().__init__(message)


class QueryReducedToEmptyError(EmptyQueryError):
    """查詢經前處理後為空"""
    def __init__(self, raw: str = ""):
        self.raw = raw
        super().__init__("query reduced to empty")


class NoHistoryError(PruneSearchException):
    """叢集沒有搜尋歷史"""
    def __init__(self, cluster_id: int):
        self.cluster_id = cluster_id
        super().__init__("no history for cluster", {"cluster_id": cluster_id})


class NoQueryTrafficError(PruneSearchException):
    """沒有查詢流量"""
    def __init__(self):
        super().__init__("no query traffic")


class TransportError(PruneSearchException):
    """傳輸層錯誤"""
    pass


class CloudUnavailableError(TransportError):
    """雲端服務無法連線"""
    pass


class RemoteTimeoutError(TransportError):
    """遠端呼叫逾時"""
    pass


class RemoteHTTPError(TransportError):
    """遠端回應非 2xx 狀態碼"""
    def __init__(self, status_code: int, message: str, details: Optional[Dict[str, Any]] = None):
        self.status_code = status_code
        super().__init__(message, details)


class PayloadTooLargeError(TransportError):
    """請求內容超過上限"""
    pass


class BenchmarkError(PruneSearchException):
    """基準測試錯誤"""
    pass


class UnknownPolicyError(BenchmarkError):
    """未知的摘要維護策略"""
    def __init__(self, policy: str):
        self.policy = policy
        super().__init__(f"unknown policy: {policy}", {"policy": policy})


# HTTP Exception wrappers
def create_http_exception(status_code: int, message: str, details: Optional[Dict[str, Any]] = None) -> HTTPException:
    """建立HTTP例外"""
    return HTTPException(
        status_code=status_code,
        detail={
            "error": True,
            "message": message,
            "details": details or {}
        }
    )


def bad_request_http_exception(message: str, request_id: str = "") -> HTTPException:
    """請求格式錯誤HTTP例外"""
    return create_http_exception(
        status_code=400,
        message=message,
        details={
            "error_type": "bad_request",
            "request_id": request_id
        }
    )


def unknown_cluster_http_exception(cluster_ids: List[int], request_id: str = "") -> HTTPException:
    """未知叢集HTTP例外"""
    return create_http_exception(
        status_code=404,
        message=f"unknown cluster id(s): {list(cluster_ids)}",
        details={
            "error_type": "unknown_cluster",
            "cluster_ids": list(cluster_ids),
            "request_id": request_id
        }
    )


def upstream_http_exception(message: str, request_id: str = "") -> HTTPException:
    """上游雲端服務錯誤HTTP例外"""
    return create_http_exception(
        status_code=502,
        message=message,
        details={
            "error_type": "cloud_unavailable",
            "request_id": request_id
        }
    )


def query_http_exception(message: str, request_id: str = "") -> HTTPException:
    """查詢處理HTTP例外"""
    return create_http_exception(
        status_code=400,
        message=message,
        details={
            "error_type": "query_error",
            "request_id": request_id
        }
    )


def status_for_exception(exc: PruneSearchException) -> Tuple[int, str]:
    """(HTTP status, error_type) for a domain exception"""
    if isinstance(exc, UnknownClusterError):
        return 404, "unknown_cluster"
    if isinstance(exc, TransportError):
        return 502, "cloud_unavailable"
    if isinstance(exc, EmptyQueryError):
        return 400, "query_error"
    if isinstance(exc, (CorpusError, TokenizationError, UnknownTokenError, ClusteringError)):
        return 400, "bad_request"
    return 500, "internal_error"


def register_exception_handlers(app: FastAPI) -> None:
    """Uniform {error, message, status_code, timestamp, details} payloads for every failure."""

    @app.exception_handler(HTTPException)
    async def http_exception_handler(request: Request, exc: HTTPException):
        logger.warning(f"HTTP Exception: {exc.status_code} - {exc.detail}")
        if isinstance(exc.detail, dict):
            content = dict(exc.detail)
        else:
            content = {"error": True, "message": str(exc.detail), "details": {}}
        content.setdefault("status_code", exc.status_code)
        content.setdefault("timestamp", datetime.now().isoformat())
        return JSONResponse(status_code=exc.status_code, content=content)

    @app.exception_handler(RequestValidationError)
    async def validation_exception_handler(request: Request, exc: RequestValidationError):
        logger.warning(f"Malformed request to {request.url.path}: {exc.errors()}")
        return JSONResponse(
            status_code=400,
            content={
                "error": True,
                "message": "malformed request body",
                "status_code": 400,
                "timestamp": datetime.now().isoformat(),
                "details": {
                    "error_type": "bad_request",
                    "errors": jsonable_encoder(exc.errors()),
                },
            },
        )

    @app.exception_handler(PruneSearchException)
    async def domain_exception_handler(request: Request, exc: PruneSearchException):
        status_code, error_type = status_for_exception(exc)
        log = logger.error if status_code >= 500 else logger.warning
        log(f"{type(exc).__name__}: {exc.message}")
        return JSONResponse(
            status_code=status_code,
            content={
                "error": True,
                "message": exc.message,
                "status_code": status_code,
                "timestamp": datetime.now().isoformat(),
                "details": {"error_type": error_type, **jsonable_encoder(exc.details)},
            },
        )

    @app.exception_handler(Exception)
    async def general_exception_handler(request: Request, exc: Exception):
        logger.error(f"Unexpected error: {str(exc)}", exc_info=True)
        return JSONResponse(
            status_code=500,
            content={
                "error": True,
                "message": "An unexpected internal server error occurred",
                "status_code": 500,
                "timestamp": datetime.now().isoformat(),
                "details": {"error_type": "unexpected_error"},
            },
        )
