"""Turn a pretrained transformer checkpoint into ffrank's interchange files.

Three exports, all plain UTF-8 text so the boundary stays debuggable and
language-neutral:

* embedding table  -> ``#dim H`` header, then ``token<TAB>floats`` per
  vocabulary entry (feeds the embedding-average query encoder);
* query vectors    -> ``query_id<TAB>floats`` per input line;
* passage vectors  -> ``doc_id<TAB>passage_index<TAB>floats``, long
  documents split into max-length windows (passage indexes 0..n-1).

Floats are written with 9 significant digits, enough to reproduce every
float32 exactly on re-import.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

logger = logging.getLogger(__name__)

KIND_EMBEDDING_TABLE = "embedding_table"
KIND_QUERY_VECTORS = "query_vectors"
KIND_PASSAGE_VECTORS = "passage_vectors"
KINDS = (KIND_EMBEDDING_TABLE, KIND_QUERY_VECTORS, KIND_PASSAGE_VECTORS)


@dataclass(frozen=True)
class ExportJob:
    """One export request, as driven by the CLI."""

    model: str
    kind: str
    output: str
    input_path: str | None = None
    batch_size: int = 32
    max_length: int = 256


def _format_floats(vec: np.ndarray) -> str:
    return " ".join(f"{float(x):.9g}" for x in vec)


def load_encoder(model_name_or_path: str):
    """Tokenizer + eval-mode model; raises on unloadable checkpoints."""
    tokenizer = AutoTokenizer.from_pretrained(model_name_or_path)
    model = AutoModel.from_pretrained(model_name_or_path)
    model.eval()
    return tokenizer, model


def export_embedding_table(model_name_or_path: str, output: str) -> int:
    """Dump the model's input embedding matrix as an embedding table.

    Tokens containing whitespace or control characters cannot be
    represented in the TSV format and are skipped (counted in the log).
    Returns the number of tokens written.
    """
    tokenizer, model = load_encoder(model_name_or_path)
    weights = model.get_input_embeddings().weight.detach().to(torch.float32).numpy()
    vocab = sorted(tokenizer.get_vocab().items(), key=lambda kv: kv[1])
    dim = weights.shape[1]
    written = 0
    skipped = 0
    with open(output, "w", encoding="utf-8") as fh:
        fh.write(f"#dim {dim}\n")
        for token, token_id in vocab:
            if token_id >= weights.shape[0]:
                skipped += 1
                continue
            if any(ch.isspace() or not ch.isprintable() for ch in token):
                skipped += 1
                continue
            fh.write(f"{token}\t{_format_floats(weights[token_id])}\n")
            written += 1
    if skipped:
        logger.info("skipped %d unrepresentable vocabulary tokens", skipped)
    return written


def read_id_text_lines(path: str) -> list[tuple[str, str]]:
    """Parse ``id<TAB>text`` lines; blank lines ignored."""
    out: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'id<TAB>text'")
            out.append((parts[0], parts[1]))
    return out


def _mean_pool(hidden: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    mask = mask.unsqueeze(-1).to(hidden.dtype)
    summed = (hidden * mask).sum(dim=1)
    counts = mask.sum(dim=1).clamp(min=1.0)
    return summed / counts


@torch.no_grad()
def encode_texts(
    tokenizer,
    model,
    texts: Sequence[str],
    *,
    batch_size: int = 32,
    max_length: int = 256,
) -> np.ndarray:
    """Mean-pooled representations, one row per text, truncated at max_length."""
    rows = []
    for start in range(0, len(texts), batch_size):
        batch = list(texts[start : start + batch_size])
        encoded = tokenizer(
            batch,
            padding=True,
            truncation=True,
            max_length=max_length,
            return_tensors="pt",
        )
        out = model(input_ids=encoded["input_ids"], attention_mask=encoded["attention_mask"])
        pooled = _mean_pool(out.last_hidden_state, encoded["attention_mask"])
        rows.append(pooled.to(torch.float32).numpy())
    if not rows:
        return np.empty((0, model.config.hidden_size), dtype=np.float32)
    return np.concatenate(rows)


@torch.no_grad()
def encode_windows(
    tokenizer,
    model,
    text: str,
    *,
    batch_size: int = 32,
    max_length: int = 256,
) -> np.ndarray:
    """Split one document into max-length windows and encode each window."""
    encoded = tokenizer(
        text,
        truncation=True,
        max_length=max_length,
        return_overflowing_tokens=True,
        stride=0,
        padding=True,
        return_tensors="pt",
    )
    vecs = []
    n = encoded["input_ids"].shape[0]
    for start in range(0, n, batch_size):
        ids = encoded["input_ids"][start : start + batch_size]
        mask = encoded["attention_mask"][start : start + batch_size]
        out = model(input_ids=ids, attention_mask=mask)
        vecs.append(_mean_pool(out.last_hidden_state, mask).to(torch.float32).numpy())
    return np.concatenate(vecs)


def export_query_vectors(
    model_name_or_path: str,
    input_path: str,
    output: str,
    *,
    batch_size: int = 32,
    max_length: int = 256,
) -> int:
    """Encode ``query_id<TAB>text`` lines into the query-vector format."""
    tokenizer, model = load_encoder(model_name_or_path)
    items = read_id_text_lines(input_path)
    if not items:
        logger.warning("no queries in %s; writing empty file", input_path)
        open(output, "w").close()
        return 0
    vectors = encode_texts(
        tokenizer, model, [t for _, t in items], batch_size=batch_size, max_length=max_length
    )
    with open(output, "w", encoding="utf-8") as fh:
        for (qid, _), vec in zip(items, vectors):
            fh.write(f"{qid}\t{_format_floats(vec)}\n")
    return len(items)


def export_passage_vectors(
    model_name_or_path: str,
    input_path: str,
    output: str,
    *,
    batch_size: int = 32,
    max_length: int = 256,
) -> int:
    """Encode documents into the passage interchange format.

    Each input line is one document; documents longer than max_length
    tokens become several passages sharing the doc ID with passage indexes
    counting up from 0.  Returns the number of passage lines written.
    """
    tokenizer, model = load_encoder(model_name_or_path)
    items = read_id_text_lines(input_path)
    seen = set()
    for doc_id, _ in items:
        if doc_id in seen:
            raise ValueError(f"duplicate document ID {doc_id!r} in {input_path}")
        seen.add(doc_id)
    if not items:
        logger.warning("no documents in %s; writing empty file", input_path)
        open(output, "w").close()
        return 0
    written = 0
    with open(output, "w", encoding="utf-8") as fh:
        for doc_id, text in items:
            vecs = encode_windows(
                tokenizer, model, text, batch_size=batch_size, max_length=max_length
            )
            for idx in range(vecs.shape[0]):
                fh.write(f"{doc_id}\t{idx}\t{_format_floats(vecs[idx])}\n")
                written += 1
    return written


def run_job(job: ExportJob) -> int:
    """Dispatch an ExportJob; returns the count of records written."""
    if job.kind == KIND_EMBEDDING_TABLE:
        return export_embedding_table(job.model, job.output)
    if job.kind == KIND_QUERY_VECTORS:
        if not job.input_path:
            raise ValueError("query_vectors export needs an input file")
        return export_query_vectors(
            job.model, job.input_path, job.output,
            batch_size=job.batch_size, max_length=job.max_length,
        )
    if job.kind == KIND_PASSAGE_VECTORS:
        if not job.input_path:
            raise ValueError("passage_vectors export needs an input file")
        return export_passage_vectors(
            job.model, job.input_path, job.output,
            batch_size=job.batch_size, max_length=job.max_length,
        )
    raise ValueError(f"unknown export kind {job.kind!r}; expected one of {KINDS}")
