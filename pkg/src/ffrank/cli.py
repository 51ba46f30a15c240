"""Operator command line: build/compress/inspect indexes, encode queries,
re-rank and hybrid-merge runs, evaluate against qrels, benchmark.

All flags are long-form.  FF_LOG controls log verbosity (debug/info/
warning/error).  Report commands write line-delimited records and can
render a PNG figure next to them with --plot.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from . import encoding as enc
from . import evaluation as ev
from . import rerank as rr
from . import selective as sel
from .errors import FfrankError, FormatError
from .index import ForwardIndex, build_index, read_passage_vectors
from .rerank import InterpolationConfig

logger = logging.getLogger("ffrank")


def _configure_logging() -> None:
    level = os.environ.get("FF_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ffrank",
        description="CPU-only interpolation re-ranking over dense passage forward indexes.",
    )
    parser.add_argument("--version", action="version", version=f"ffrank {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index-build", help="build an FFIDX index from vectors or passage text")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--vectors", help="passage vector interchange file (doc_id\\tpassage_index\\tfloats)")
    src.add_argument("--passages", help="passage text file (doc_id\\ttext), one passage per line")
    p.add_argument("--embeddings", help="embedding table (required with --passages)")
    p.add_argument("--keep-ratio", type=float, default=1.0,
                   help="token keep ratio p in [0,1] applied before encoding (passages path)")
    p.add_argument("--normalize", action="store_true", help="L2-normalize stored vectors")
    p.add_argument("--output", required=True, help="output FFIDX path")

    p = sub.add_parser("coalesce", help="compress an index by sequential coalescing")
    p.add_argument("--index", required=True)
    p.add_argument("--delta", type=float, required=True, help="cosine-distance threshold >= 0")
    p.add_argument("--output", required=True)

    p = sub.add_parser("rerank", help="interpolate a sparse run with dense index scores")
    p.add_argument("--run", required=True, help="input TREC run (sorted by sparse score)")
    p.add_argument("--index", required=True, help="FFIDX index")
    qsrc = p.add_mutually_exclusive_group(required=True)
    qsrc.add_argument("--queries", help="precomputed query vectors (query_id\\tfloats)")
    qsrc.add_argument("--query-text", help="query text file (query_id\\ttext)")
    p.add_argument("--embeddings", help="embedding table (required with --query-text)")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--k", type=int, default=1000, help="cut-off depth (documents returned)")
    p.add_argument("--k-s", type=int, default=1000, help="sparse depth (documents considered)")
    p.add_argument("--mode", choices=list(rr.MODES), default=rr.MODE_EXHAUSTIVE)
    p.add_argument("--bound", type=float, default=None,
                   help="dense score upper bound (early-stop-with-bound mode)")
    p.add_argument("--on-missing", choices=[rr.ON_MISSING_ABORT, rr.ON_MISSING_SKIP],
                   default=rr.ON_MISSING_ABORT)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", required=True, help="output TREC run path")

    p = sub.add_parser("hybrid", help="merge a dense run into a sparse run with fallback")
    p.add_argument("--sparse", required=True, help="sparse TREC run")
    p.add_argument("--dense", required=True, help="dense TREC run")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--output", required=True)

    p = sub.add_parser("evaluate", help="score a run against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--metrics", default=",".join(ev.DEFAULT_METRICS),
                   help="comma-separated name@depth list")
    p.add_argument("--min-rel", type=int, default=1,
                   help="binary relevance threshold for ap/rr/recall")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", help="write metric records (metric\\tqid\\tvalue) here")
    p.add_argument("--plot", help="render per-query metric figure to this PNG")

    p = sub.add_parser("bench", help="measure per-stage re-ranking latency (best-run protocol)")
    p.add_argument("--run", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--queries", required=True, help="precomputed query vectors")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--k-s", type=int, default=1000)
    p.add_argument("--mode", choices=list(rr.MODES), default=rr.MODE_EXHAUSTIVE)
    p.add_argument("--bound", type=float, default=None)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--output", help="write latency records here")
    p.add_argument("--plot", help="render per-stage latency figure to this PNG")

    p = sub.add_parser("selftest", help="run seeded synthetic end-to-end checks")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--output", default="ffrank-selftest",
                   help="directory for figures and records")

    return parser


def _make_config(args) -> InterpolationConfig:
    return InterpolationConfig(
        alpha=args.alpha,
        k_s=args.k_s,
        k=min(args.k, args.k_s),
        mode=args.mode,
        dense_bound=args.bound,
        on_missing=getattr(args, "on_missing", rr.ON_MISSING_ABORT),
    )


def _load_query_vectors(args) -> dict[str, np.ndarray]:
    if args.queries:
        return enc.load_precomputed_queries(args.queries)
    if not args.embeddings:
        raise FfrankError("--query-text requires --embeddings")
    table = enc.load_embedding_table(args.embeddings)
    texts = enc.load_query_texts(args.query_text)
    return enc.encode_queries(texts, table)


def cmd_index_build(args) -> int:
    if args.vectors:
        docs = read_passage_vectors(args.vectors)
    else:
        if not args.embeddings:
            raise FfrankError("--passages requires --embeddings")
        table = enc.load_embedding_table(args.embeddings)
        docs = _encode_passages(args.passages, table, args.keep_ratio)
    index = build_index(docs, normalize=args.normalize)
    index.save(args.output)
    print(f"wrote {args.output}: {len(index)} docs, {index.num_vectors} vectors, dim {index.dim}")
    return 0


def _encode_passages(path: str, table: enc.EmbeddingTable, keep_ratio: float):
    """Tokenize passage text, filter tokens by keep ratio, embed the rest."""
    rows: list[tuple[str, list[str]]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise FormatError("expected 'doc_id<TAB>text'", line=lineno)
            doc_id, text = parts
            rows.append((doc_id, enc.tokenize(text, table)))
    token_rows = [tokens for _, tokens in rows]
    if keep_ratio < 1.0:
        scorer = sel.IdfScorer(token_rows)
        batch = sel.TokenBatch.from_rows(token_rows)
        filtered = sel.select_tokens(batch, scorer, keep_ratio)
        token_rows = [filtered.real_tokens(i) for i in range(len(rows))]
    docs: dict[str, list[np.ndarray]] = {}
    for (doc_id, _), tokens in zip(rows, token_rows):
        docs.setdefault(doc_id, []).append(enc.encode_embedding_average(tokens, table))
    return [(doc_id, np.stack(vecs)) for doc_id, vecs in docs.items()]


def cmd_coalesce(args) -> int:
    index = ForwardIndex.load(args.index)
    out, report = index.coalesce(args.delta)
    out.save(args.output)
    print(
        f"coalesced {report.docs_processed} docs at delta={report.delta:g}: "
        f"{report.vectors_before} -> {report.vectors_after} vectors "
        f"({report.reduction * 100.0:.1f}% reduction)"
    )
    return 0


def cmd_rerank(args) -> int:
    run = rr.parse_trec_run(args.run)
    index = ForwardIndex.load(args.index)
    query_vecs = _load_query_vectors(args)
    cfg = _make_config(args)
    t0 = time.perf_counter()
    out, stats = rr.rerank(run, index, query_vecs, cfg, threads=args.threads)
    elapsed = time.perf_counter() - t0
    rr.emit_trec_run(out, args.output)
    print(
        f"wrote {args.output}: {stats.queries} queries, {stats.lookups} lookups, "
        f"{stats.early_stops} early stops, {stats.missing} missing docs, {elapsed * 1000:.1f} ms"
    )
    return 0


def cmd_hybrid(args) -> int:
    sparse = rr.parse_trec_run(args.sparse)
    dense = rr.parse_trec_run(args.dense)
    out, fallbacks = rr.hybrid_score(sparse, dense, args.alpha)
    rr.emit_trec_run(out, args.output)
    print(f"wrote {args.output}: {len(out.queries)} queries, {fallbacks} fallback queries")
    return 0


def cmd_evaluate(args) -> int:
    run = rr.parse_trec_run(args.run)
    qrels = ev.load_qrels(args.qrels)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    report = ev.evaluate_run(run, qrels, metrics, min_rel=args.min_rel, threads=args.threads)
    print(report.table())
    if args.output:
        ev.write_report_lines(report.lines(), args.output)
    if args.plot:
        from . import plots

        plots.save_metric_figure(report, args.plot)
        print(f"figure: {args.plot}")
    return 0


def cmd_bench(args) -> int:
    run = rr.parse_trec_run(args.run)
    index = ForwardIndex.load(args.index)
    queries = enc.load_precomputed_queries(args.queries)
    args.on_missing = rr.ON_MISSING_ABORT
    cfg = _make_config(args)
    report = ev.benchmark_rerank(index, run, queries, cfg, repeats=args.repeats)
    print(report.table())
    if args.output:
        ev.write_report_lines(report.lines(), args.output)
    if args.plot:
        from . import plots

        plots.save_latency_figure(report, args.plot)
        print(f"figure: {args.plot}")
    return 0


def cmd_selftest(args) -> int:
    from . import selftest

    return selftest.run(seed=args.seed, out_dir=args.output)


_COMMANDS = {
    "index-build": cmd_index_build,
    "coalesce": cmd_coalesce,
    "rerank": cmd_rerank,
    "hybrid": cmd_hybrid,
    "evaluate": cmd_evaluate,
    "bench": cmd_bench,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except FfrankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
