"""TREC-style evaluation (nDCG / AP / RR / Recall at depth) plus a
best-run latency benchmark for the re-ranking pipeline.

Metric conventions: nDCG uses exponential gains ``2^rel - 1`` with a
``log2(rank + 1)`` discount; AP, RR and Recall binarize at ``rel >=
min_rel`` (default 1) and Recall/AP denominators count all judged-relevant
documents.  Queries judged but without relevant documents contribute 0.
Queries in the run without any judgments are skipped.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence, TextIO

import numpy as np

from . import rerank as rr
from .encoding import EmbeddingTable, encode_embedding_average, finalize_query
from .errors import DomainError, FormatError
from .index import ForwardIndex
from .rerank import InterpolationConfig, RankedRun

Qrels = dict[str, dict[str, int]]  # query_id -> doc_id -> graded relevance


def load_qrels(path: str) -> Qrels:
    """Parse ``query_id 0 doc_id relevance`` lines (whitespace-separated)."""
    qrels: Qrels = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise FormatError(f"expected 4 fields, got {len(parts)}", line=lineno)
            qid, _, doc_id, rel_str = parts
            try:
                rel = int(rel_str)
            except ValueError:
                raise FormatError(f"bad relevance {rel_str!r}", line=lineno) from None
            if rel < 0:
                raise FormatError(f"negative relevance {rel}", line=lineno)
            judgments = qrels.setdefault(qid, {})
            if doc_id in judgments:
                raise FormatError(f"duplicate judgment for ({qid!r}, {doc_id!r})", line=lineno)
            judgments[doc_id] = rel
    return qrels


def _gain(rel: int) -> float:
    return float(2**rel - 1)


def ndcg_at_k(ranking: Sequence[tuple[str, float]], judgments: Mapping[str, int], k: int) -> float:
    """Exponential-gain nDCG at depth k for one query."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    dcg = 0.0
    for i, (doc_id, _) in enumerate(ranking[:k]):
        rel = judgments.get(doc_id, 0)
        if rel > 0:
            dcg += _gain(rel) / math.log2(i + 2)
    ideal = sorted((r for r in judgments.values() if r > 0), reverse=True)
    idcg = sum(_gain(rel) / math.log2(i + 2) for i, rel in enumerate(ideal[:k]))
    if idcg == 0.0:
        return 0.0
    return dcg / idcg


def ap_at_k(
    ranking: Sequence[tuple[str, float]],
    judgments: Mapping[str, int],
    k: int,
    *,
    min_rel: int = 1,
) -> float:
    """Average precision at depth k; denominator is all judged-relevant docs."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    total_relevant = sum(1 for r in judgments.values() if r >= min_rel)
    if total_relevant == 0:
        return 0.0
    hits = 0
    precision_sum = 0.0
    for i, (doc_id, _) in enumerate(ranking[:k]):
        if judgments.get(doc_id, 0) >= min_rel:
            hits += 1
            precision_sum += hits / (i + 1)
    return precision_sum / total_relevant


def rr_at_k(
    ranking: Sequence[tuple[str, float]],
    judgments: Mapping[str, int],
    k: int,
    *,
    min_rel: int = 1,
) -> float:
    """Reciprocal rank of the first relevant document within depth k, else 0."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    for i, (doc_id, _) in enumerate(ranking[:k]):
        if judgments.get(doc_id, 0) >= min_rel:
            return 1.0 / (i + 1)
    return 0.0


def recall_at_k(
    ranking: Sequence[tuple[str, float]],
    judgments: Mapping[str, int],
    k: int,
    *,
    min_rel: int = 1,
) -> float:
    """Fraction of judged-relevant documents retrieved within depth k."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    total_relevant = sum(1 for r in judgments.values() if r >= min_rel)
    if total_relevant == 0:
        return 0.0
    found = sum(
        1 for doc_id, _ in ranking[:k] if judgments.get(doc_id, 0) >= min_rel
    )
    return found / total_relevant


_METRIC_FUNCS = {
    "ndcg": ndcg_at_k,
    "ap": ap_at_k,
    "rr": rr_at_k,
    "recall": recall_at_k,
}

DEFAULT_METRICS = ("ndcg@10", "ap@1000", "rr@10", "recall@1000")


def parse_metric_spec(spec: str) -> tuple[str, int]:
    """'ndcg@10' -> ('ndcg', 10)."""
    name, _, depth = spec.partition("@")
    name = name.strip().lower()
    if name not in _METRIC_FUNCS:
        raise DomainError(f"unknown metric {name!r}; choose from {sorted(_METRIC_FUNCS)}")
    try:
        k = int(depth)
    except ValueError:
        raise DomainError(f"bad metric depth in {spec!r}") from None
    if k < 1:
        raise DomainError(f"metric depth must be >= 1 in {spec!r}")
    return name, k


@dataclass
class MetricReport:
    """Per-query metric values and their means."""

    per_query: dict[str, dict[str, float]]  # metric -> qid -> value
    means: dict[str, float]
    query_count: int

    def lines(self) -> list[str]:
        """Line-delimited records: metric<TAB>query_id|all<TAB>value."""
        out = []
        for metric in self.per_query:
            for qid in sorted(self.per_query[metric]):
                out.append(f"{metric}\t{qid}\t{self.per_query[metric][qid]:.6f}")
            out.append(f"{metric}\tall\t{self.means[metric]:.6f}")
        return out

    def table(self) -> str:
        width = max((len(m) for m in self.means), default=6)
        rows = [f"{'metric':<{width}}  mean      queries"]
        for metric, mean in self.means.items():
            rows.append(f"{metric:<{width}}  {mean:.6f}  {self.query_count}")
        return "\n".join(rows)


def evaluate_run(
    run: RankedRun,
    qrels: Qrels,
    metrics: Sequence[str] = DEFAULT_METRICS,
    *,
    min_rel: int = 1,
    threads: int = 1,
) -> MetricReport:
    """Compute every requested ``name@k`` metric over the judged queries.

    Queries are independent; ``threads`` > 1 evaluates them in a thread
    pool. The report is identical regardless of thread count.
    """
    specs = [parse_metric_spec(m) for m in metrics]
    qids = [qid for qid in run.queries if qid in qrels]

    def work(qid: str) -> dict[str, float]:
        ranking = run.queries[qid]
        judgments = qrels[qid]
        values = {}
        for spec, (name, k) in zip(metrics, specs):
            func = _METRIC_FUNCS[name]
            if name == "ndcg":
                values[spec] = func(ranking, judgments, k)
            else:
                values[spec] = func(ranking, judgments, k, min_rel=min_rel)
        return values

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, qids))
    else:
        results = [work(qid) for qid in qids]
    per_query: dict[str, dict[str, float]] = {m: {} for m in metrics}
    for qid, values in zip(qids, results):
        for m, v in values.items():
            per_query[m][qid] = v
    means = {
        m: (sum(per_query[m].values()) / len(qids) if qids else 0.0) for m in metrics
    }
    return MetricReport(per_query=per_query, means=means, query_count=len(qids))


# -- latency benchmark ----------------------------------------------------

STAGE_ENCODE = "encode"
STAGE_SCORE = "lookup+interpolate"
STAGE_SORT = "sort"
STAGES = (STAGE_ENCODE, STAGE_SCORE, STAGE_SORT)


@dataclass
class LatencyReport:
    """Best-run per-stage timings (milliseconds, mean per query)."""

    stage_ms: dict[str, float]
    lookups: int
    queries: int
    repeats: int
    best_run: int
    mode: str

    def lines(self) -> list[str]:
        out = [f"latency_{s.replace('+', '_')}_ms\tall\t{v:.6f}" for s, v in self.stage_ms.items()]
        out.append(f"lookups\tall\t{self.lookups}")
        return out

    def table(self) -> str:
        rows = [f"stage                 mean ms/query   (best of {self.repeats} runs, {self.queries} queries, mode={self.mode})"]
        for stage, ms in self.stage_ms.items():
            rows.append(f"{stage:<20}  {ms:12.4f}")
        rows.append(f"{'index lookups':<20}  {self.lookups:12d}")
        return "\n".join(rows)

    @property
    def total_ms(self) -> float:
        return sum(self.stage_ms.values())


def benchmark_rerank(
    index: ForwardIndex,
    run: RankedRun,
    queries: Mapping[str, np.ndarray] | Mapping[str, Sequence[str]],
    cfg: InterpolationConfig,
    repeats: int = 3,
    *,
    table: EmbeddingTable | None = None,
) -> LatencyReport:
    """Time the re-ranking stages over several full runs, report the fastest.

    Each run measures every query's encode, lookup+interpolate and sort
    stages; the report averages the per-query measurements of the run with
    the lowest total.  ``queries`` maps query IDs to pre-encoded vectors,
    or to token lists when ``table`` is given (tokenization itself is
    excluded from the timings).
    """
    if repeats < 2:
        raise DomainError(f"repeats must be >= 2, got {repeats}")
    qids = [qid for qid in run.queries if qid in queries]
    if not qids:
        raise DomainError("no overlapping query IDs between run and queries")

    runs: list[dict[str, float]] = []
    lookup_counts: list[int] = []
    for _ in range(repeats):
        stage_totals = {s: 0.0 for s in STAGES}
        lookups = 0
        for qid in qids:
            t0 = time.perf_counter()
            if table is not None:
                qvec = finalize_query(encode_embedding_average(queries[qid], table))
            else:
                qvec = np.asarray(queries[qid])
            t1 = time.perf_counter()
            scorer = rr._index_scorer(index, qvec, cfg.on_missing)
            candidates = run.queries[qid][: cfg.k_s]
            if cfg.mode == rr.MODE_EXHAUSTIVE:
                scored, n_lookups, _ = rr.score_candidates(candidates, scorer, cfg.alpha)
            else:
                bound = cfg.dense_bound if cfg.mode == rr.MODE_EARLY_STOP_WITH_BOUND else None
                scored, n_lookups, _, _ = rr.topk_early_stop(
                    candidates, scorer, cfg.alpha, cfg.k, bound=bound
                )
            t2 = time.perf_counter()
            rr.finalize_ranking(scored, cfg.k)
            t3 = time.perf_counter()
            stage_totals[STAGE_ENCODE] += t1 - t0
            stage_totals[STAGE_SCORE] += t2 - t1
            stage_totals[STAGE_SORT] += t3 - t2
            lookups += n_lookups
        runs.append(stage_totals)
        lookup_counts.append(lookups)

    best = min(range(repeats), key=lambda i: sum(runs[i].values()))
    stage_ms = {s: runs[best][s] / len(qids) * 1000.0 for s in STAGES}
    return LatencyReport(
        stage_ms=stage_ms,
        lookups=lookup_counts[best],
        queries=len(qids),
        repeats=repeats,
        best_run=best,
        mode=cfg.mode,
    )


def write_report_lines(lines: Sequence[str], sink: str | TextIO) -> None:
    """Write line-delimited report records to a path or open file."""
    if isinstance(sink, str):
        with open(sink, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        sink.write("\n".join(lines) + "\n")
