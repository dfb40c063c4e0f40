#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Command-line Interface
命令列介面 - ingest / cluster / serve / search / bench / abstracts / replay

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .abstract_manager import AbstractStore, load_history
from .analytics_core import MaintenancePolicy
from .bench_core import (
    BenchmarkQuery, BenchSetup, compare_policies, http_backend_factory, split_benchmark,
    synthesize_queries,
)
from .config import CloudConfig, EdgeConfig, setup_logging
from .corpus_core import Document, generate_key, load_corpus_dir
from .edge_service import ABSTRACTS_FILE, EdgeSearchService
from .exceptions import BenchmarkError, PruneSearchException
from .fixture_generator import FixtureSpec, generate_fixture, materialize_fixture
from .report_generator import BenchReportGenerator
from .semantics_core import SimilarityProvider, TaxonomySimilarity, load_provider
from .start_api import serve_cloud, serve_edge

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; this CLI reserves 2 for runtime failures."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _print_json(data) -> None:
    print(json.dumps(data, indent=2, ensure_ascii=False))


def _edge_config(args) -> EdgeConfig:
    config = EdgeConfig.from_file(args.config) if getattr(args, "config", None) else EdgeConfig()
    overrides = {
        "key_path": getattr(args, "key", None),
        "cloud_addr": getattr(args, "cloud", None),
        "state_dir": getattr(args, "state_dir", None),
        "taxonomy_path": getattr(args, "taxonomy", None),
        "policy": getattr(args, "policy", None),
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return config.model_copy(update=overrides) if overrides else config


def _edge(args) -> EdgeSearchService:
    return EdgeSearchService.from_config(_edge_config(args))


# ---------------------------------------------------------------------------
# commands

def cmd_keygen(args) -> int:
    path = Path(args.path)
    if path.exists() and not args.force:
        raise UsageError(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(generate_key().hex() + "\n", encoding="utf-8")
    logger.info(f"Wrote a new 256-bit key to {path}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    edge = _edge(args)
    response = edge.ingest(load_corpus_dir(args.dir))
    _print_json(response.model_dump(mode="json"))
    return EXIT_OK


def cmd_cluster(args) -> int:
    edge = _edge(args)
    info = edge.cluster(args.k, args.kmeans_iters)
    snapshot = edge.initialize_abstracts()
    _print_json({
        "k": info.k,
        "orphan_count": info.orphan_count,
        "sizes": {c.cluster_id: c.size for c in info.clusters},
        "abstract_terms": snapshot.total_terms(),
    })
    return EXIT_OK


def cmd_serve_cloud(args) -> int:
    serve_cloud(CloudConfig(index_dir=args.index_dir, k=args.k, kmeans_iters=args.kmeans_iters),
                args.host, args.port)
    return EXIT_OK


def cmd_serve_edge(args) -> int:
    serve_edge(_edge_config(args), args.host, args.port)
    return EXIT_OK


def cmd_search(args) -> int:
    edge = _edge(args)
    outcome = edge.execute_search(args.query, args.session)
    _print_json(outcome.to_response().model_dump(mode="json"))
    return EXIT_OK


def _bench_inputs(args) -> Tuple[List[Document], SimilarityProvider]:
    if args.corpus:
        if not args.taxonomy:
            raise UsageError("--corpus needs --taxonomy")
        return load_corpus_dir(args.corpus), load_provider(args.taxonomy)
    fixture = generate_fixture(FixtureSpec(seed=args.fixture_seed))
    return fixture.documents, TaxonomySimilarity(fixture.taxonomy())


def _write_queries(queries: Sequence[BenchmarkQuery], path: Optional[Path]) -> None:
    lines = "".join(json.dumps(q.to_dict()) + "\n" for q in queries)
    if path is None:
        sys.stdout.write(lines)
    else:
        Path(path).write_text(lines, encoding="utf-8")


def _read_queries(path: Path) -> List[BenchmarkQuery]:
    try:
        return [BenchmarkQuery.from_dict(json.loads(line))
                for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    except (OSError, ValueError, KeyError) as e:
        raise BenchmarkError(f"cannot read queries from {path}: {e}") from e


def cmd_bench_synth(args) -> int:
    docs, _ = _bench_inputs(args)
    _write_queries(synthesize_queries(docs, args.keywords, args.per_query), args.out)
    return EXIT_OK


def cmd_bench_split(args) -> int:
    train, test = split_benchmark(_read_queries(args.queries), args.train_fraction, args.seed)
    _write_queries(train, args.train_out)
    _write_queries(test, args.test_out)
    logger.info(f"Split {len(train) + len(test)} queries into {len(train)} train / {len(test)} test")
    return EXIT_OK


def cmd_bench_run(args) -> int:
    docs, provider = _bench_inputs(args)
    if args.train and args.test:
        train, test = _read_queries(args.train), _read_queries(args.test)
    else:
        queries = synthesize_queries(docs, args.keywords, args.per_query)
        train, test = split_benchmark(queries, args.train_fraction, args.seed)
    setup = BenchSetup(
        docs=docs,
        provider=provider,
        seed=args.seed,
        k=args.k,
        prune_k=args.prune_k,
        keywords_per_doc=args.keywords,
        backend_factory=http_backend_factory(args.wire_log) if args.wire_log else None,
    )
    policies = list(MaintenancePolicy) if args.policy == "all" else [MaintenancePolicy.parse(args.policy)]
    reports = compare_policies(train, test, setup, policies)
    if args.csv:
        BenchReportGenerator().write_csv(reports, args.csv)
    if len(reports) == 1:
        _print_json(next(iter(reports.values())).to_dict())
    else:
        _print_json({name: r.to_dict() for name, r in reports.items()})
    return EXIT_OK


def cmd_bench_make_fixture(args) -> int:
    paths = materialize_fixture(args.dir, args.fixture_seed)
    _print_json({name: str(p) for name, p in paths.items()})
    return EXIT_OK


def cmd_abstracts(args) -> int:
    config = _edge_config(args)
    generator = BenchReportGenerator()
    if args.action == "coverage":
        rows = EdgeSearchService.from_config(config).coverage()
        print(generator.render_text(generator.coverage_table(rows)))
        return EXIT_OK

    store = AbstractStore(Path(config.state_dir) / ABSTRACTS_FILE)
    if not store.exists():
        raise PruneSearchException(f"no abstracts at {store.path}; run cluster first")
    snapshot = store.load()
    if args.action == "show":
        _print_json({"snapshot": snapshot.version, "clusters": [a.to_dict() for a in snapshot.abstracts]})
    else:
        print(generator.render_text(generator.stats_table(snapshot.stats.values())))
    return EXIT_OK


def cmd_replay(args) -> int:
    """Feed a recorded history through the edge again, optionally maintaining afterwards."""
    records = load_history(args.history)
    edge = _edge(args)
    edge.auto_maintain = not args.no_maintain
    hits = 0
    for record in records:
        outcome = edge.execute_search(record.raw_query, record.session_id)
        hits += bool(outcome.result.matched_clusters)
    summary = {"replayed": len(records), "with_matches": hits}
    if args.maintain:
        summary["decisions"] = edge.maintain().summary()
    _print_json(summary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _add_edge_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="edge config JSON")
    p.add_argument("--key", type=Path, help="key file (overrides config)")
    p.add_argument("--cloud", help="cloud base URL (overrides config)")
    p.add_argument("--state-dir", type=Path)
    p.add_argument("--taxonomy", type=Path)
    p.add_argument("--policy", choices=[m.value for m in MaintenancePolicy])


def _add_bench_corpus(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", type=Path, help="directory of .txt documents (default: generated fixture)")
    p.add_argument("--taxonomy", type=Path, help="taxonomy for --corpus")
    p.add_argument("--fixture-seed", type=int, default=42)
    p.add_argument("--keywords", type=int, default=15, help="keywords per document")
    p.add_argument("--per-query", type=int, default=3)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="prunesearch", description="Edge-pruned searchable encryption over clustered tokens")
    parser.add_argument("--log-level", help="overrides PRUNESEARCH_LOG")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("keygen", help="write a new random key")
    p.add_argument("path", type=Path)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("ingest", help="extract, encrypt and upload a corpus directory")
    p.add_argument("dir", type=Path)
    _add_edge_options(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("cluster", help="cluster the cloud index and initialize abstracts")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--kmeans-iters", type=int, default=0)
    _add_edge_options(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("serve-cloud", help="run the cloud tier")
    p.add_argument("--index-dir", type=Path, default=Path("cloud_index"))
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--kmeans-iters", type=int, default=0)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve_cloud)

    p = sub.add_parser("serve-edge", help="run the edge tier")
    _add_edge_options(p)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve_edge)

    p = sub.add_parser("search", help="run one query through the edge")
    p.add_argument("query")
    p.add_argument("--session", default="")
    _add_edge_options(p)
    p.set_defaults(func=cmd_search)

    bench = sub.add_parser("bench", help="benchmark harness")
    bench_sub = bench.add_subparsers(dest="bench_command", required=True, parser_class=_Parser)

    p = bench_sub.add_parser("synth", help="synthesize benchmark queries")
    _add_bench_corpus(p)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_bench_synth)

    p = bench_sub.add_parser("split", help="seeded train/test split of a query file")
    p.add_argument("queries", type=Path)
    p.add_argument("--train-out", type=Path, required=True)
    p.add_argument("--test-out", type=Path, required=True)
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_bench_split)

    p = bench_sub.add_parser("run", help="replay train/test under one or all policies")
    _add_bench_corpus(p)
    p.add_argument("--policy", default="edge_based", choices=[m.value for m in MaintenancePolicy] + ["all"])
    p.add_argument("--train", type=Path)
    p.add_argument("--test", type=Path)
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--prune-k", type=int, default=3)
    p.add_argument("--csv", type=Path)
    p.add_argument("--wire-log", type=Path, help="route cloud calls over HTTP and capture request bodies")
    p.set_defaults(func=cmd_bench_run)

    p = bench_sub.add_parser("make-fixture", help="write the synthetic corpus and taxonomy")
    p.add_argument("dir", type=Path)
    p.add_argument("--fixture-seed", type=int, default=42)
    p.set_defaults(func=cmd_bench_make_fixture)

    p = sub.add_parser("abstracts", help="inspect edge abstracts")
    p.add_argument("action", choices=["show", "stats", "coverage"])
    _add_edge_options(p)
    p.set_defaults(func=cmd_abstracts)

    p = sub.add_parser("replay", help="replay a history file through the edge")
    p.add_argument("history", type=Path)
    p.add_argument("--maintain", action="store_true", help="run one maintenance pass afterwards")
    p.add_argument("--no-maintain", action="store_true", help="disable periodic maintenance during replay")
    _add_edge_options(p)
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"prunesearch: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PruneSearchException as e:
        logger.error(e.message)
        print(f"prunesearch: {e.message}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"prunesearch: {e}", file=sys.stderr)
        return EXIT_RUNTIME
