#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
FastAPI Application for the Cloud Tier
雲端層 FastAPI 服務 - 只接收權杖與密文
"""

import logging
from datetime import datetime
from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.concurrency import run_in_threadpool

from .cloud_service import CloudIndexService
from .config import CloudConfig
from .exceptions import (
    CorpusError, EmptyQueryError, PruneSearchException, UnknownClusterError,
    bad_request_http_exception, query_http_exception, register_exception_handlers,
    unknown_cluster_http_exception,
)
from .models import (
    ClusterRequest, ClustersResponse, HealthCheckResponse, RankedEntry, SearchRequest,
    SearchResponse, UploadResponse, WireKind, WireMessage,
)

logger = logging.getLogger(__name__)

SERVICE_NAME = "prunesearch cloud tier"
MAX_UPLOAD_BYTES = 64 * 1024 * 1024


def _search_response(service: CloudIndexService, req: SearchRequest) -> SearchResponse:
    try:
        result = service.search_hex(req.tokens, req.clusters)
    except EmptyQueryError as e:
        raise query_http_exception(e.message, req.request_id)
    except UnknownClusterError as e:
        raise unknown_cluster_http_exception(e.cluster_ids, req.request_id)
    return SearchResponse(
        request_id=req.request_id,
        entries=[RankedEntry(doc_id=d, score=s) for d, s in result.entries],
        matched_clusters=result.matched_clusters,
    )


def create_cloud_app(service: Optional[CloudIndexService] = None) -> FastAPI:
    """Build the cloud application around a service instance."""
    service = service or CloudIndexService(CloudConfig())

    app = FastAPI(
        title="PruneSearch Cloud Tier",
        description="加密索引雲端服務：叢集、儲存與剪枝搜尋",
        version="1.0.0",
    )
    app.state.service = service
    register_exception_handlers(app)

    @app.get("/health", response_model=HealthCheckResponse)
    def health_check():
        """Health check endpoint"""
        return HealthCheckResponse(service=SERVICE_NAME, details=service.health())

    @app.post("/v1/upload", response_model=UploadResponse)
    async def upload(request: Request):
        """JSON-lines UploadBatch body; records of type doc or posting."""
        request_id = request.headers.get("x-request-id", "")
        body = await request.body()
        if len(body) > MAX_UPLOAD_BYTES:
            raise HTTPException(status_code=413, detail={
                "error": True,
                "message": "upload exceeds 64 MiB",
                "details": {"error_type": "payload_too_large", "request_id": request_id},
            })
        try:
            text = body.decode("utf-8")
            return await run_in_threadpool(service.upload_jsonl, text, request_id)
        except UnicodeDecodeError:
            raise bad_request_http_exception("upload body is not UTF-8", request_id)
        except CorpusError as e:
            raise bad_request_http_exception(e.message, request_id)

    @app.post("/v1/search", response_model=SearchResponse)
    def search(req: SearchRequest):
        """Tokens and cluster ids only; any other field is rejected."""
        return _search_response(service, req)

    @app.get("/v1/clusters", response_model=ClustersResponse)
    def clusters(request_id: str = ""):
        return service.cluster_info(request_id)

    @app.post("/v1/cluster", response_model=ClustersResponse)
    def recluster(req: ClusterRequest):
        """(Re)build clusters over the current index."""
        service.cluster(req.k, req.kmeans_iters)
        return service.cluster_info(req.request_id)

    @app.post("/v1/message", response_model=WireMessage)
    def message(msg: WireMessage):
        """Envelope dispatch; unknown kinds answer with an error message."""
        try:
            if msg.kind == WireKind.SEARCH.value:
                req = SearchRequest.model_validate({**msg.payload, "request_id": msg.request_id})
                result = _search_response(service, req)
                return WireMessage(kind=WireKind.SEARCH_RESULT.value, request_id=msg.request_id,
                                   payload=result.model_dump(mode="json"))
            if msg.kind == WireKind.CLUSTER_INFO.value:
                info = service.cluster_info(msg.request_id)
                return WireMessage(kind=WireKind.CLUSTER_INFO.value, request_id=msg.request_id,
                                   payload=info.model_dump(mode="json"))
            if msg.kind == WireKind.UPLOAD.value:
                text = str(msg.payload.get("jsonl", ""))
                if len(text.encode("utf-8")) > MAX_UPLOAD_BYTES:
                    return WireMessage(kind=WireKind.ERROR.value, request_id=msg.request_id,
                                       payload={"error": True, "message": "upload exceeds 64 MiB",
                                                "error_type": "payload_too_large"})
                summary = service.upload_jsonl(text, msg.request_id)
                return WireMessage(kind=WireKind.UPLOAD.value, request_id=msg.request_id,
                                   payload=summary.model_dump(mode="json"))
            message_text = f"unknown message kind: {msg.kind}"
        except HTTPException as e:
            detail = e.detail if isinstance(e.detail, dict) else {"message": str(e.detail)}
            message_text = detail.get("message", "request failed")
        except (PruneSearchException, ValueError) as e:
            message_text = getattr(e, "message", str(e))
        return WireMessage(kind=WireKind.ERROR.value, request_id=msg.request_id,
                           payload={"error": True, "message": message_text})

    @app.on_event("startup")
    async def startup_event():
        """Print service endpoints information on startup"""
        info = service.health()
        logger.info("=" * 60)
        logger.info(f"PruneSearch cloud tier started at {datetime.now().isoformat()}")
        logger.info(f"  index: {info['documents']} docs, {info['tokens']} tokens, {info['clusters']} clusters")
        logger.info("  POST /v1/upload   POST /v1/search   GET /v1/clusters")
        logger.info("  POST /v1/cluster  POST /v1/message  GET /health")
        logger.info("=" * 60)

    return app
