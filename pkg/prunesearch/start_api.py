#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Startup Script for the Cloud and Edge Services
雲端層與邊緣層服務啟動腳本
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import uvicorn
from fastapi import FastAPI

from .cloud_app import create_cloud_app
from .cloud_service import CloudIndexService
from .config import CloudConfig, EdgeConfig, default_host, default_port, setup_logging
from .edge_app import create_edge_app
from .edge_service import EdgeSearchService
from .exceptions import PruneSearchException

logger = logging.getLogger(__name__)

CLOUD_PORT = 8010
EDGE_PORT = 8020


def run_server(app: FastAPI, host: str, port: int) -> None:
    logger.info(f"Serving {app.title} on http://{host}:{port} (docs: http://{host}:{port}/docs)")
    try:
        uvicorn.run(app, host=host, port=port, log_level=logging.getLevelName(logging.getLogger().level).lower())
    except KeyboardInterrupt:
        logger.info(f"{app.title} stopped")


def serve_cloud(config: CloudConfig, host: Optional[str] = None, port: Optional[int] = None) -> None:
    service = CloudIndexService.open(config)
    run_server(create_cloud_app(service), host or default_host(), port or default_port(CLOUD_PORT))


def serve_edge(config: EdgeConfig, host: Optional[str] = None, port: Optional[int] = None) -> None:
    service = EdgeSearchService.from_config(config)
    service.check_cloud()
    run_server(create_edge_app(service), host or default_host(), port or default_port(EDGE_PORT))


def main(argv: Optional[List[str]] = None) -> int:
    """主程式：python -m prunesearch.start_api cloud|edge"""
    parser = argparse.ArgumentParser(description="Start a prunesearch tier")
    parser.add_argument("tier", choices=["cloud", "edge"])
    parser.add_argument("--config", type=Path, help="edge config JSON (edge tier)")
    parser.add_argument("--index-dir", type=Path, default=Path("cloud_index"), help="index directory (cloud tier)")
    parser.add_argument("--k", type=int, default=10)
    parser.add_argument("--host")
    parser.add_argument("--port", type=int)
    args = parser.parse_args(argv)
    setup_logging()

    try:
        if args.tier == "cloud":
            serve_cloud(CloudConfig(index_dir=args.index_dir, k=args.k), args.host, args.port)
        else:
            config = EdgeConfig.from_file(args.config) if args.config else EdgeConfig()
            serve_edge(config, args.host, args.port)
    except PruneSearchException as e:
        logger.error(f"Startup failed: {e.message}")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
