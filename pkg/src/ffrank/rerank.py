"""Interpolation-based re-ranking of sparse runs against a forward index.

Three scoring paths share one interpolation formula
``alpha * sparse + (1 - alpha) * dense``:

* exhaustive re-ranking scores every candidate in the sparse run;
* early-stopping re-ranking keeps a size-k priority queue and breaks as
  soon as the best score any unseen document could still reach (its sparse
  score is bounded by the current one, its dense score by ``s_d``) cannot
  beat the current k-th score;
* hybrid merging rescores a sparse run with dense-retrieval scores where
  available, falling back to the sparse score otherwise.

Runs are grouped per query; queries are independent and may be processed
by concurrent workers against a shared read-only index.
"""

from __future__ import annotations

import heapq
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence, TextIO

import numpy as np

from .errors import DomainError, FfrankError, FormatError
from .index import ForwardIndex

logger = logging.getLogger(__name__)

MODE_EXHAUSTIVE = "exhaustive"
MODE_EARLY_STOP_RUNNING_MAX = "early-stop-running-max"
MODE_EARLY_STOP_WITH_BOUND = "early-stop-with-bound"
MODES = (MODE_EXHAUSTIVE, MODE_EARLY_STOP_RUNNING_MAX, MODE_EARLY_STOP_WITH_BOUND)

ON_MISSING_ABORT = "abort"
ON_MISSING_SKIP = "skip"

DEFAULT_TAG = "fast-forward"

# A dense score source: doc_id -> score, or None for "not available"
# (only returned under the skip policy).
DenseScorer = Callable[[str], "float | None"]


@dataclass(frozen=True)
class InterpolationConfig:
    """Knobs of one re-ranking pass.

    alpha weighs the sparse score (1 recovers the sparse order, 0 pure
    dense); k_s is how deep into the sparse run to look, k how many
    documents to return.
    """

    alpha: float = 0.5
    k_s: int = 1000
    k: int = 1000
    mode: str = MODE_EXHAUSTIVE
    dense_bound: float | None = None
    on_missing: str = ON_MISSING_ABORT

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise DomainError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.k_s < 1:
            raise DomainError(f"k_s must be >= 1, got {self.k_s}")
        if not (1 <= self.k <= self.k_s):
            raise DomainError(f"k must satisfy 1 <= k <= k_s, got k={self.k}, k_s={self.k_s}")
        if self.mode not in MODES:
            raise DomainError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.mode == MODE_EARLY_STOP_WITH_BOUND:
            if self.dense_bound is None or not math.isfinite(self.dense_bound):
                raise DomainError("early-stop-with-bound requires a finite dense_bound")
        if self.on_missing not in (ON_MISSING_ABORT, ON_MISSING_SKIP):
            raise DomainError(f"on_missing must be 'abort' or 'skip', got {self.on_missing!r}")


@dataclass
class RerankStats:
    """Work counters; merging is commutative so workers can be combined."""

    lookups: int = 0
    early_stops: int = 0
    queries: int = 0
    missing: int = 0
    lookups_per_query: dict[str, int] = field(default_factory=dict)

    def merge(self, other: "RerankStats") -> "RerankStats":
        self.lookups += other.lookups
        self.early_stops += other.early_stops
        self.queries += other.queries
        self.missing += other.missing
        self.lookups_per_query.update(other.lookups_per_query)
        return self


@dataclass
class RankedRun:
    """Per-query document rankings, scores non-increasing, doc IDs unique."""

    tag: str
    queries: dict[str, list[tuple[str, float]]]

    def validate(self) -> "RankedRun":
        for qid, ranking in self.queries.items():
            seen = set()
            prev = math.inf
            for doc_id, score in ranking:
                if not math.isfinite(score):
                    raise FormatError(f"query {qid!r}: non-finite score for {doc_id!r}")
                if score > prev:
                    raise FormatError(f"query {qid!r}: scores increase at {doc_id!r}")
                if doc_id in seen:
                    raise FormatError(f"query {qid!r}: duplicate document {doc_id!r}")
                seen.add(doc_id)
                prev = score
        return self

    def query_ids(self) -> list[str]:
        return list(self.queries)


def interpolate(sparse: float, dense: float, alpha: float) -> float:
    """alpha * sparse + (1 - alpha) * dense, with alpha validated."""
    if not (0.0 <= alpha <= 1.0):
        raise DomainError(f"alpha must be in [0, 1], got {alpha}")
    return _interp(sparse, dense, alpha)


def _interp(sparse: float, dense: float, alpha: float) -> float:
    # Single shared expression: the early-stopping and exhaustive paths must
    # produce bit-identical floats for identical inputs.
    return alpha * sparse + (1.0 - alpha) * dense


def score_candidates(
    candidates: Sequence[tuple[str, float]],
    dense_score: DenseScorer,
    alpha: float,
) -> tuple[list[tuple[str, float, int]], int, int]:
    """Score every candidate; returns (scored(doc, score, rank), lookups, missing).

    A ``None`` dense score (skip policy) leaves the document with its
    alpha-weighted sparse score only.
    """
    scored = []
    lookups = 0
    missing = 0
    for rank, (doc_id, sparse) in enumerate(candidates):
        d = dense_score(doc_id)
        if d is None:
            missing += 1
            score = alpha * sparse
        else:
            lookups += 1
            score = _interp(sparse, d, alpha)
        scored.append((doc_id, score, rank))
    return scored, lookups, missing


def topk_early_stop(
    candidates: Sequence[tuple[str, float]],
    dense_score: DenseScorer,
    alpha: float,
    k: int,
    *,
    bound: float | None = None,
) -> tuple[list[tuple[str, float, int]], int, bool, int]:
    """Size-k priority-queue interpolation over a descending sparse ranking.

    ``bound``: fixed upper limit for the dense scores; when None the highest
    dense score observed so far is used instead.  Once the queue is full,
    each step pops the current minimum, forms the best still-possible score
    from the next sparse score and the bound, and breaks if that cannot
    exceed the popped minimum; otherwise the larger of (new score, popped
    minimum) re-enters the queue so it stays at k entries.

    Returns (queue contents (doc, score, rank) unsorted, lookups,
    stopped_early, missing).
    """
    # heap entries: (score, -rank, doc_id, rank); ranks are unique per query
    # so ties on score are broken by evicting the worse sparse rank first.
    heap: list[tuple[float, int, str, int]] = []
    s_d = -math.inf if bound is None else bound
    stopped = False
    lookups = 0
    missing = 0
    for rank, (doc_id, sparse) in enumerate(candidates):
        popped = None
        if len(heap) == k:
            popped = heapq.heappop(heap)
            # With no dense evidence yet (all lookups skipped so far) no
            # meaningful bound exists; defer the stopping check.
            if not math.isinf(s_d):
                s_best = _interp(sparse, s_d, alpha)
                if s_best <= popped[0]:
                    heapq.heappush(heap, popped)
                    stopped = True
                    break
        d = dense_score(doc_id)
        if d is None:
            missing += 1
            score = alpha * sparse
        else:
            lookups += 1
            if bound is None and d > s_d:
                s_d = d
            score = _interp(sparse, d, alpha)
        entry = (score, -rank, doc_id, rank)
        if popped is not None and popped[0] >= score:
            entry = popped  # max(s, s_min): ties keep the better sparse rank
        heapq.heappush(heap, entry)
    return [(doc_id, score, rank) for score, _, doc_id, rank in heap], lookups, stopped, missing


def finalize_ranking(scored: Iterable[tuple[str, float, int]], k: int) -> list[tuple[str, float]]:
    """Sort scored entries descending and truncate to k.

    Ties break by better sparse rank, then lexicographic doc ID, making the
    output deterministic across runs and thread counts.
    """
    ordered = sorted(scored, key=lambda e: (-e[1], e[2], e[0]))
    return [(doc_id, score) for doc_id, score, _ in ordered[:k]]


def _index_scorer(index: ForwardIndex, query_vec: np.ndarray, on_missing: str) -> DenseScorer:
    from .errors import MissingDocumentError

    def scorer(doc_id: str) -> float | None:
        try:
            return index.score_maxp(query_vec, doc_id)
        except MissingDocumentError:
            if on_missing == ON_MISSING_SKIP:
                return None
            raise

    return scorer


def _rerank_one(
    qid: str,
    candidates: Sequence[tuple[str, float]],
    dense_score: DenseScorer,
    cfg: InterpolationConfig,
) -> tuple[list[tuple[str, float]], RerankStats]:
    candidates = candidates[: cfg.k_s]
    stats = RerankStats(queries=1)
    if cfg.mode == MODE_EXHAUSTIVE:
        scored, stats.lookups, stats.missing = score_candidates(
            candidates, dense_score, cfg.alpha
        )
        stopped = False
    else:
        bound = cfg.dense_bound if cfg.mode == MODE_EARLY_STOP_WITH_BOUND else None
        scored, stats.lookups, stopped, stats.missing = topk_early_stop(
            candidates, dense_score, cfg.alpha, cfg.k, bound=bound
        )
    if stopped:
        stats.early_stops = 1
    stats.lookups_per_query[qid] = stats.lookups
    return finalize_ranking(scored, cfg.k), stats


def rerank(
    run: RankedRun,
    index: ForwardIndex,
    query_vecs: Mapping[str, np.ndarray],
    cfg: InterpolationConfig,
    *,
    threads: int = 1,
    tag: str = DEFAULT_TAG,
) -> tuple[RankedRun, RerankStats]:
    """Re-rank every query of ``run`` against ``index``.

    ``query_vecs`` must hold one encoded vector per query ID in the run.
    Queries are independent; ``threads`` > 1 processes them in a thread
    pool (the index is read-only).  Output is deterministic regardless of
    thread count.
    """
    for qid in run.queries:
        if qid not in query_vecs:
            raise FfrankError(f"no query vector for query ID {qid!r}")

    def work(item: tuple[str, list[tuple[str, float]]]):
        qid, candidates = item
        scorer = _index_scorer(index, query_vecs[qid], cfg.on_missing)
        ranking, stats = _rerank_one(qid, candidates, scorer, cfg)
        return qid, ranking, stats

    results: dict[str, list[tuple[str, float]]] = {}
    total = RerankStats()
    items = list(run.queries.items())
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(work, items))
    else:
        outputs = [work(item) for item in items]
    for qid, ranking, stats in outputs:
        results[qid] = ranking
        total.merge(stats)
    return RankedRun(tag=tag, queries=results), total


def rerank_exhaustive(run, index, query_vecs, cfg, **kw):
    """Exhaustive interpolation (cfg.mode forced to exhaustive)."""
    if cfg.mode != MODE_EXHAUSTIVE:
        cfg = InterpolationConfig(
            alpha=cfg.alpha, k_s=cfg.k_s, k=cfg.k, mode=MODE_EXHAUSTIVE, on_missing=cfg.on_missing
        )
    return rerank(run, index, query_vecs, cfg, **kw)


def rerank_early_stop(run, index, query_vecs, cfg, **kw):
    """Early-stopping interpolation; cfg.mode selects the bound source."""
    if cfg.mode == MODE_EXHAUSTIVE:
        raise DomainError("rerank_early_stop requires an early-stop mode")
    return rerank(run, index, query_vecs, cfg, **kw)


def hybrid_score(
    sparse_run: RankedRun,
    dense_run: RankedRun,
    alpha: float,
    *,
    tag: str = "hybrid",
) -> tuple[RankedRun, int]:
    """Merge dense-retrieval scores into a sparse run.

    The candidate set per query is exactly the sparse run's documents.
    Documents with a dense score get the interpolated value; documents the
    dense retriever missed fall back to their sparse score (the
    interpolation collapses to ``phi_S``).  Queries absent from the dense
    run fall back entirely; their count is returned alongside the run.
    """
    if not (0.0 <= alpha <= 1.0):
        raise DomainError(f"alpha must be in [0, 1], got {alpha}")
    fallback_queries = 0
    merged: dict[str, list[tuple[str, float]]] = {}
    for qid, ranking in sparse_run.queries.items():
        dense = dict(dense_run.queries.get(qid, ()))
        if qid not in dense_run.queries:
            fallback_queries += 1
            logger.warning("query %r missing from dense run; using sparse scores", qid)
        scored = []
        for rank, (doc_id, sparse) in enumerate(ranking):
            dense_val = dense.get(doc_id, sparse)
            scored.append((doc_id, _interp(sparse, dense_val, alpha), rank))
        merged[qid] = finalize_ranking(scored, len(scored))
    return RankedRun(tag=tag, queries=merged), fallback_queries


# -- TREC run file I/O --------------------------------------------------


def _format_score(score: float) -> str:
    """Conventional 6-decimal score, widened when that would lose bits."""
    text = f"{score:.6f}"
    if float(text) == score:
        return text
    return f"{score:.17g}"


def parse_trec_run(source: str | TextIO, *, default_tag: str = "run") -> RankedRun:
    """Parse a TREC run file: ``query_id Q0 doc_id rank score tag``.

    Entries are re-sorted per query by descending score (stable, so the
    file's order is kept among ties); the rank column is ignored.
    """
    close = False
    if isinstance(source, str):
        fh = open(source, "r", encoding="utf-8")
        close = True
    else:
        fh = source
    try:
        per_query: dict[str, list[tuple[str, float]]] = {}
        tag = None
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise FormatError(f"expected 6 whitespace-separated fields, got {len(parts)}", line=lineno)
            qid, _, doc_id, _, score_str, line_tag = parts
            try:
                score = float(score_str)
            except ValueError:
                raise FormatError(f"bad score {score_str!r}", line=lineno) from None
            if not math.isfinite(score):
                raise FormatError(f"non-finite score {score_str!r}", line=lineno)
            if tag is None:
                tag = line_tag
            per_query.setdefault(qid, []).append((doc_id, score))
        queries = {}
        for qid, entries in per_query.items():
            if len({doc_id for doc_id, _ in entries}) != len(entries):
                raise FormatError(f"duplicate document in query {qid!r}")
            queries[qid] = sorted(entries, key=lambda e: -e[1])  # stable: file order on ties
        return RankedRun(tag=tag or default_tag, queries=queries).validate()
    finally:
        if close:
            fh.close()


def emit_trec_run(run: RankedRun, sink: str | TextIO) -> None:
    """Write ``run`` in TREC format, queries sorted by ID, ranks 1-based."""
    close = False
    if isinstance(sink, str):
        fh = open(sink, "w", encoding="utf-8")
        close = True
    else:
        fh = sink
    try:
        for qid in sorted(run.queries):
            for rank, (doc_id, score) in enumerate(run.queries[qid], start=1):
                fh.write(f"{qid} Q0 {doc_id} {rank} {_format_score(score)} {run.tag}\n")
    finally:
        if close:
            fh.close()
