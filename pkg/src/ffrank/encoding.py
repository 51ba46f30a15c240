"""Query-side encoding: token embedding tables, the embedding-average
encoder, optional projection, and loaders for externally computed vectors.

The native tokenizer is deliberately small: casefold, strip punctuation,
split on whitespace, and — when the table carries ``##`` subword pieces —
greedy longest-match segmentation.  Anything fancier (full WordPiece
parity, transformer encoders) arrives through the text interchange files
written by the export bridge.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import vectors as vc
from .errors import (
    DimensionError,
    DomainError,
    EmptyQueryError,
    FormatError,
    UnknownTokenError,
)
from .vectors import Projection

UNK_SKIP = "skip"
UNK_ERROR = "error"
UNK_TOKEN = "unk_token"

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass
class EmbeddingTable:
    """token -> embedding vector, all of one dimension.

    unk_policy decides what happens to tokens without an embedding:
    drop them (skip), raise (error), or substitute unk_token's vector.
    """

    dim: int
    entries: dict[str, np.ndarray]
    unk_policy: str = UNK_SKIP
    unk_token: str | None = None
    _has_subwords: bool = field(init=False, repr=False, default=False)

    def __post_init__(self):
        if not self.entries:
            raise FormatError("embedding table is empty")
        if self.unk_policy not in (UNK_SKIP, UNK_ERROR, UNK_TOKEN):
            raise DomainError(f"unknown unk_policy {self.unk_policy!r}")
        if self.unk_policy == UNK_TOKEN:
            if self.unk_token is None or self.unk_token not in self.entries:
                raise DomainError(f"unk_token {self.unk_token!r} not present in table")
        self._has_subwords = any(t.startswith("##") for t in self.entries)

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def load_embedding_table(path: str, **policy) -> EmbeddingTable:
    """Read the embedding-table text format.

    Header line ``#dim <d>`` followed by one ``token<TAB>floats`` line per
    token.  Duplicate tokens and dimension mismatches are rejected.
    """
    entries: dict[str, np.ndarray] = {}
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if dim is None:
                m = re.fullmatch(r"#dim\s+(\d+)", line.strip())
                if not m:
                    raise FormatError("missing '#dim <d>' header", line=lineno)
                dim = int(m.group(1))
                if dim < 1:
                    raise FormatError(f"invalid dimension {dim}", line=lineno)
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError("expected 'token<TAB>floats'", line=lineno)
            token, floats = parts
            if token in entries:
                raise FormatError(f"duplicate token {token!r}", line=lineno)
            try:
                vec = np.array([float(x) for x in floats.split()], dtype=vc.STORAGE_DTYPE)
            except ValueError:
                raise FormatError(f"unparseable embedding for token {token!r}", line=lineno) from None
            if vec.size != dim:
                raise FormatError(
                    f"token {token!r}: dim {vec.size} != header dim {dim}", line=lineno
                )
            if not np.all(np.isfinite(vec)):
                raise FormatError(f"token {token!r}: non-finite embedding", line=lineno)
            entries[token] = vec
    if dim is None:
        raise FormatError("embedding table file is empty")
    return EmbeddingTable(dim=dim, entries=entries, **policy)


def tokenize(text: str, table: EmbeddingTable) -> list[str]:
    """Casefold, strip punctuation, split on whitespace.

    When the table contains ``##`` subword pieces, each word is further
    segmented by greedy longest match; a word that cannot be fully
    segmented is passed through whole and left to the unk policy.
    """
    words = _WORD_RE.findall(text.casefold())
    if not table._has_subwords:
        return words
    tokens: list[str] = []
    for word in words:
        tokens.extend(_greedy_pieces(word, table))
    return tokens


def _greedy_pieces(word: str, table: EmbeddingTable) -> list[str]:
    pieces: list[str] = []
    start = 0
    while start < len(word):
        end = len(word)
        piece = None
        while end > start:
            candidate = word[start:end] if start == 0 else "##" + word[start:end]
            if candidate in table:
                piece = candidate
                break
            end -= 1
        if piece is None:
            return [word]  # unsegmentable; defer to the unk policy
        pieces.append(piece)
        start = end
    return pieces


def resolve_tokens(tokens: Sequence[str], table: EmbeddingTable) -> list[np.ndarray]:
    """Apply the table's unk policy; returns the embeddings that survive."""
    out = []
    for token in tokens:
        vec = table.entries.get(token)
        if vec is None:
            if table.unk_policy == UNK_ERROR:
                raise UnknownTokenError(f"no embedding for token {token!r}")
            if table.unk_policy == UNK_TOKEN:
                vec = table.entries[table.unk_token]
            else:
                continue
        out.append(vec)
    return out


def encode_embedding_average(tokens: Sequence[str], table: EmbeddingTable) -> np.ndarray:
    """Mean of the resolved token embeddings.

    The divisor counts resolved tokens only, so skipped unknowns do not
    drag the average toward zero.  Raises EmptyQueryError when nothing
    resolves.
    """
    resolved = resolve_tokens(tokens, table)
    if not resolved:
        raise EmptyQueryError(f"no token of {list(tokens)!r} has an embedding")
    return vc.mean(resolved)


def finalize_query(raw: np.ndarray, projection: Projection | None = None) -> np.ndarray:
    """Optional projection; the result is deliberately NOT L2-normalized
    (normalizing the query would only scale every score by a constant)."""
    if projection is None:
        return np.asarray(raw, dtype=vc.STORAGE_DTYPE)
    return vc.project(projection, raw)


def encode_query(
    text: str,
    table: EmbeddingTable,
    projection: Projection | None = None,
    *,
    special_tokens: Sequence[str] = (),
) -> np.ndarray:
    """tokenize -> embedding average -> finalize, in one call.

    ``special_tokens`` (e.g. ["[CLS]", "[SEP]"]) are prepended/appended
    around the text tokens before averaging, for parity with encoders that
    include them; the native default excludes them.
    """
    tokens = list(special_tokens[:1]) + tokenize(text, table) + list(special_tokens[1:])
    return finalize_query(encode_embedding_average(tokens, table), projection)


def load_precomputed_queries(path: str) -> dict[str, np.ndarray]:
    """Read a query-vector file: ``query_id<TAB>floats`` per line.

    An empty file yields an empty map; mixed dimensions and duplicate IDs
    are format errors.
    """
    out: dict[str, np.ndarray] = {}
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError("expected 'query_id<TAB>floats'", line=lineno)
            qid, floats = parts
            if qid in out:
                raise FormatError(f"duplicate query ID {qid!r}", line=lineno)
            try:
                vec = np.array([float(x) for x in floats.split()], dtype=vc.STORAGE_DTYPE)
            except ValueError:
                raise FormatError(f"unparseable vector for query {qid!r}", line=lineno) from None
            if vec.size == 0:
                raise FormatError(f"empty vector for query {qid!r}", line=lineno)
            if not np.all(np.isfinite(vec)):
                raise FormatError(f"non-finite vector for query {qid!r}", line=lineno)
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise FormatError(
                    f"query {qid!r}: dim {vec.size} != first dim {dim}", line=lineno
                )
            out[qid] = vec
    return out


def encode_queries(
    texts: Mapping[str, str],
    table: EmbeddingTable,
    projection: Projection | None = None,
) -> dict[str, np.ndarray]:
    """Encode a set of query strings keyed by query ID."""
    return {qid: encode_query(text, table, projection) for qid, text in texts.items()}


def load_query_texts(path: str) -> dict[str, str]:
    """Read ``query_id<TAB>text`` lines (TSV, UTF-8)."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise FormatError("expected 'query_id<TAB>text'", line=lineno)
            qid, text = parts
            if qid in out:
                raise FormatError(f"duplicate query ID {qid!r}", line=lineno)
            out[qid] = text
    return out
