"""ffrank: CPU-only re-ranking over dense passage forward indexes.

Combines sparse (lexical) runs with pre-computed dense passage vectors by
score interpolation, with early-stopping top-k evaluation, sequential
index coalescing, a lightweight embedding-average query encoder and a
TREC-style evaluation harness.
"""

from .errors import (
    DimensionError,
    DomainError,
    DuplicateDocumentError,
    EmptyInputError,
    EmptyQueryError,
    FfrankError,
    FormatError,
    MissingDocumentError,
    UnknownTokenError,
    VersionError,
    ZeroVectorError,
)
from .vectors import (
    Projection,
    contrastive_loss,
    cosine_distance,
    dot,
    l2_normalize,
    mean,
    project,
)
from .index import CoalescingReport, ForwardIndex, build_index, read_passage_vectors
from .rerank import (
    InterpolationConfig,
    RankedRun,
    RerankStats,
    emit_trec_run,
    hybrid_score,
    interpolate,
    parse_trec_run,
    rerank_early_stop,
    rerank_exhaustive,
)
from .encoding import (
    EmbeddingTable,
    encode_embedding_average,
    encode_query,
    finalize_query,
    load_embedding_table,
    load_precomputed_queries,
    tokenize,
)
from .selective import IdfScorer, TokenBatch, select_tokens
from .evaluation import (
    LatencyReport,
    MetricReport,
    benchmark_rerank,
    evaluate_run,
    load_qrels,
)

__version__ = "0.1.0"

__all__ = [
    "FfrankError",
    "DimensionError",
    "ZeroVectorError",
    "EmptyInputError",
    "DomainError",
    "MissingDocumentError",
    "DuplicateDocumentError",
    "FormatError",
    "VersionError",
    "EmptyQueryError",
    "UnknownTokenError",
    "Projection",
    "dot",
    "cosine_distance",
    "mean",
    "l2_normalize",
    "project",
    "contrastive_loss",
    "ForwardIndex",
    "CoalescingReport",
    "build_index",
    "read_passage_vectors",
    "RankedRun",
    "InterpolationConfig",
    "RerankStats",
    "interpolate",
    "rerank_exhaustive",
    "rerank_early_stop",
    "hybrid_score",
    "parse_trec_run",
    "emit_trec_run",
    "EmbeddingTable",
    "load_embedding_table",
    "tokenize",
    "encode_embedding_average",
    "encode_query",
    "finalize_query",
    "load_precomputed_queries",
    "TokenBatch",
    "IdfScorer",
    "select_tokens",
    "load_qrels",
    "evaluate_run",
    "MetricReport",
    "LatencyReport",
    "benchmark_rerank",
    "__version__",
]
