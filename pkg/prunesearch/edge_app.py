#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
FastAPI Application for the Edge Tier
邊緣層 FastAPI 服務 - 查詢剪枝與摘要管理
"""

import logging
from datetime import datetime

from fastapi import FastAPI, HTTPException

from .edge_service import EdgeSearchService
from .exceptions import (
    EmptyQueryError, PruneSearchException, TransportError, query_http_exception,
    register_exception_handlers, upstream_http_exception,
)
from .models import HealthCheckResponse, QueryRequest, QueryResponse, WireKind, WireMessage

logger = logging.getLogger(__name__)

SERVICE_NAME = "prunesearch edge tier"


def _run_query(service: EdgeSearchService, req: QueryRequest) -> QueryResponse:
    try:
        outcome = service.execute_search(req.query, req.session_id, req.request_id)
    except EmptyQueryError as e:
        raise query_http_exception(e.message, req.request_id)
    except TransportError as e:
        logger.error(f"Cloud call failed for request {req.request_id or '-'}: {e.message}")
        raise upstream_http_exception(e.message, req.request_id)
    return outcome.to_response(req.request_id)


def create_edge_app(service: EdgeSearchService) -> FastAPI:
    """Build the edge application around a configured service."""
    app = FastAPI(
        title="PruneSearch Edge Tier",
        description="邊緣層服務：查詢前處理、摘要剪枝與使用者搜尋模式分析",
        version="1.0.0",
    )
    app.state.service = service
    register_exception_handlers(app)

    @app.get("/health", response_model=HealthCheckResponse)
    def health_check():
        """Health check endpoint"""
        return HealthCheckResponse(service=SERVICE_NAME, details=service.health())

    @app.post("/v1/query", response_model=QueryResponse)
    def query(req: QueryRequest):
        """Preprocess, prune, search the chosen clusters and record history."""
        return _run_query(service, req)

    @app.get("/v1/abstracts")
    def abstracts():
        snapshot = service.manager.snapshot()
        return {
            "snapshot": snapshot.version,
            "policy": service.policy.value,
            "clusters": [a.to_dict() for a in snapshot.abstracts],
        }

    @app.get("/v1/stats")
    def stats():
        snapshot = service.manager.snapshot()
        return {"clusters": [s.to_dict() for _, s in sorted(snapshot.stats.items())]}

    @app.post("/v1/maintain")
    def maintain():
        """Run one maintenance pass now."""
        try:
            result = service.maintain()
        except TransportError as e:
            raise upstream_http_exception(e.message)
        return {
            "decisions": result.summary(),
            "abstract_terms": service.manager.snapshot().total_terms(),
        }

    @app.post("/v1/message", response_model=WireMessage)
    def message(msg: WireMessage):
        if msg.kind != WireKind.QUERY.value:
            return WireMessage(kind=WireKind.ERROR.value, request_id=msg.request_id,
                               payload={"error": True, "message": f"unknown message kind: {msg.kind}"})
        try:
            req = QueryRequest.model_validate({**msg.payload, "request_id": msg.request_id})
            response = _run_query(service, req)
        except HTTPException as e:
            detail = e.detail if isinstance(e.detail, dict) else {"message": str(e.detail)}
            return WireMessage(kind=WireKind.ERROR.value, request_id=msg.request_id,
                               payload={"error": True, "message": detail.get("message", "query failed")})
        except (PruneSearchException, ValueError) as e:
            return WireMessage(kind=WireKind.ERROR.value, request_id=msg.request_id,
                               payload={"error": True, "message": getattr(e, "message", str(e))})
        return WireMessage(kind=WireKind.SEARCH_RESULT.value, request_id=msg.request_id,
                           payload=response.model_dump(mode="json"))

    @app.on_event("startup")
    async def startup_event():
        """Print service endpoints information on startup"""
        info = service.health()
        logger.info("=" * 60)
        logger.info(f"PruneSearch edge tier started at {datetime.now().isoformat()}")
        logger.info(f"  policy={info['policy']} abstracts={info['abstracts']} history={info['history']}")
        logger.info("  POST /v1/query  GET /v1/abstracts  GET /v1/stats  POST /v1/maintain  GET /health")
        logger.info("=" * 60)

    return app
