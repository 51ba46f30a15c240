"""ffbridge: export transformer checkpoints into ffrank interchange files."""

from .export import (
    ExportJob,
    encode_texts,
    encode_windows,
    export_embedding_table,
    export_passage_vectors,
    export_query_vectors,
    run_job,
)

__version__ = "0.1.0"

__all__ = [
    "ExportJob",
    "run_job",
    "export_embedding_table",
    "export_query_vectors",
    "export_passage_vectors",
    "encode_texts",
    "encode_windows",
    "__version__",
]
