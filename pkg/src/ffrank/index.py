"""Forward index: document ID -> ordered passage vectors, with maxP scoring,
sequential-coalescing compression and a binary on-disk format (FFIDX).

In memory the index keeps one contiguous float32 block of all passage
vectors plus an offsets table behind a dict keyed by document ID, so a
lookup is a hash probe and an array slice.  After construction the index is
treated as immutable and is safe for any number of concurrent readers;
``add_documents`` is a single-writer operation.
"""

from __future__ import annotations

import io
import os
import struct
import tempfile
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import vectors as vc
from .errors import (
    DimensionError,
    DomainError,
    DuplicateDocumentError,
    EmptyInputError,
    FormatError,
    MissingDocumentError,
    VersionError,
)

MAGIC = b"FFIDX\x01"
_SUPPORTED_VERSION = 1
_FLAG_NORMALIZED = 0x01


@dataclass(frozen=True)
class CoalescingReport:
    """Summary of one sequential-coalescing pass."""

    docs_processed: int
    vectors_before: int
    vectors_after: int
    delta: float

    @property
    def reduction(self) -> float:
        """Fraction of vectors removed, in [0, 1]."""
        if self.vectors_before == 0:
            return 0.0
        return 1.0 - self.vectors_after / self.vectors_before


class ForwardIndex:
    """Map from document ID to its ordered passage vectors.

    Parameters
    ----------
    dim: dimensionality of every stored vector.
    normalized: metadata flag saying the stored vectors are L2-normalized.
    """

    def __init__(self, dim: int, *, normalized: bool = False):
        if dim < 1:
            raise DimensionError(f"dim must be positive, got {dim}")
        self.dim = int(dim)
        self.normalized = bool(normalized)
        self._data = np.empty((0, dim), dtype=vc.STORAGE_DTYPE)
        self._data.flags.writeable = False
        # doc_id -> (start_row, passage_count), insertion-ordered
        self._offsets: dict[str, tuple[int, int]] = {}

    # -- basic container behaviour ------------------------------------

    def __len__(self) -> int:
        return len(self._offsets)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._offsets

    @property
    def doc_ids(self) -> list[str]:
        return list(self._offsets)

    @property
    def num_vectors(self) -> int:
        return self._data.shape[0]

    # -- core operations ----------------------------------------------

    def lookup(self, doc_id: str) -> np.ndarray:
        """Stored passage vectors of ``doc_id`` in original order.

        Returns a read-only (passage_count, dim) float32 view; O(1) in the
        number of indexed documents.
        """
        try:
            start, count = self._offsets[doc_id]
        except KeyError:
            raise MissingDocumentError(doc_id) from None
        return self._data[start : start + count]

    def score_maxp(self, query_vec: np.ndarray, doc_id: str) -> float:
        """Maximum dot product between the query and the document's passages."""
        q = np.asarray(query_vec)
        if q.shape[-1] != self.dim:
            raise DimensionError(f"query dim {q.shape[-1]} != index dim {self.dim}")
        block = self.lookup(doc_id)
        scores = block.astype(np.float64) @ q.astype(np.float64, copy=False)
        return float(scores.max())

    def add_documents(self, batch: Iterable[tuple[str, Sequence]]) -> "ForwardIndex":
        """Append documents; existing entries are untouched.

        ``batch`` yields (doc_id, passage vectors) pairs.  Duplicate IDs
        (against the index or within the batch) raise DuplicateDocumentError;
        empty documents and wrong-dimension vectors are rejected.  Single
        writer only; returns self.
        """
        new_blocks: list[np.ndarray] = []
        new_offsets: dict[str, tuple[int, int]] = {}
        row = self._data.shape[0]
        for doc_id, passages in batch:
            if not isinstance(doc_id, str) or not doc_id:
                raise FormatError(f"document ID must be a nonempty string, got {doc_id!r}")
            if doc_id in self._offsets or doc_id in new_offsets:
                raise DuplicateDocumentError(f"document already indexed: {doc_id!r}")
            block = np.atleast_2d(np.asarray(passages, dtype=vc.STORAGE_DTYPE))
            if block.size == 0:
                raise EmptyInputError(f"document {doc_id!r} has no passage vectors")
            if block.ndim != 2 or block.shape[1] != self.dim:
                raise DimensionError(
                    f"document {doc_id!r}: vectors of dim {block.shape[-1]}, index dim {self.dim}"
                )
            if not np.all(np.isfinite(block)):
                raise DomainError(f"document {doc_id!r} contains non-finite values")
            new_offsets[doc_id] = (row, block.shape[0])
            new_blocks.append(block)
            row += block.shape[0]
        if not new_blocks:
            return self
        data = np.concatenate([self._data] + new_blocks)
        data.flags.writeable = False
        self._data = data
        self._offsets.update(new_offsets)
        return self

    # -- compression ----------------------------------------------------

    def coalesce(self, delta: float) -> tuple["ForwardIndex", CoalescingReport]:
        """Merge runs of consecutive similar passage vectors per document.

        Walks each document's vectors in original order keeping a running
        average; when the next vector's cosine distance to the average
        reaches ``delta`` the average is flushed to the output and the
        accumulator restarts.  The final accumulator is always flushed, so
        every document keeps at least one vector.  delta=0 degenerates to
        the identity (every distance >= 0); a delta above 2 collapses each
        document to the mean of its passages.

        Output vectors are not re-normalized, so the normalized flag is
        cleared on the result.  Raises ZeroVectorError if the index holds a
        zero vector (cosine distance undefined).
        """
        if delta < 0:
            raise DomainError(f"delta must be >= 0, got {delta}")
        out = ForwardIndex(self.dim, normalized=False)
        batch = []
        for doc_id, (start, count) in self._offsets.items():
            block = self._data[start : start + count]
            batch.append((doc_id, _coalesce_block(block, delta)))
        out.add_documents(batch)
        report = CoalescingReport(
            docs_processed=len(self),
            vectors_before=self.num_vectors,
            vectors_after=out.num_vectors,
            delta=float(delta),
        )
        return out, report

    # -- persistence ----------------------------------------------------

    def save(self, path: str | os.PathLike) -> None:
        """Write the index in FFIDX format (atomic: temp file + rename)."""
        path = os.fspath(path)
        payload = io.BytesIO()
        payload.write(MAGIC)
        flags = _FLAG_NORMALIZED if self.normalized else 0
        payload.write(struct.pack("<IBQ", self.dim, flags, len(self._offsets)))
        for doc_id, (start, count) in self._offsets.items():
            encoded = doc_id.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise FormatError(f"document ID longer than 65535 bytes: {doc_id[:32]!r}...")
            payload.write(struct.pack("<H", len(encoded)))
            payload.write(encoded)
            payload.write(struct.pack("<I", count))
            block = self._data[start : start + count]
            payload.write(np.ascontiguousarray(block, dtype="<f4").tobytes())
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".ffidx.tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload.getvalue())
            os.chmod(tmp, 0o644)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ForwardIndex":
        """Read an FFIDX file; bit-exact inverse of :meth:`save`."""
        with open(path, "rb") as fh:
            buf = fh.read()
        return cls.from_bytes(buf)

    @classmethod
    def from_bytes(cls, buf: bytes) -> "ForwardIndex":
        reader = _Reader(buf)
        magic = reader.take(6, "magic")
        if magic[:5] != MAGIC[:5]:
            raise FormatError(f"bad magic {magic!r}", offset=0)
        if magic[5] != _SUPPORTED_VERSION:
            raise VersionError(f"unsupported FFIDX version {magic[5]}")
        dim, flags, doc_count = struct.unpack("<IBQ", reader.take(13, "header"))
        if dim < 1:
            raise FormatError(f"invalid dimension {dim}", offset=6)
        index = cls(dim, normalized=bool(flags & _FLAG_NORMALIZED))
        batch = []
        for _ in range(doc_count):
            (id_len,) = struct.unpack("<H", reader.take(2, "doc id length"))
            id_offset = reader.pos
            raw_id = reader.take(id_len, "doc id")
            try:
                doc_id = raw_id.decode("utf-8")
            except UnicodeDecodeError:
                raise FormatError("document ID is not valid UTF-8", offset=id_offset) from None
            (count,) = struct.unpack("<I", reader.take(4, "passage count"))
            if count == 0:
                raise FormatError(f"document {doc_id!r} has zero passages", offset=reader.pos - 4)
            raw = reader.take(count * dim * 4, "vector payload")
            block = np.frombuffer(raw, dtype="<f4").reshape(count, dim)
            batch.append((doc_id, block))
        if reader.pos != len(buf):
            raise FormatError(
                f"{len(buf) - reader.pos} trailing bytes after last document", offset=reader.pos
            )
        index.add_documents(batch)
        return index


class _Reader:
    """Byte cursor that reports the failing offset on truncation."""

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise FormatError(f"truncated file while reading {what}", offset=self.pos)
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out


def _coalesce_block(block: np.ndarray, delta: float) -> np.ndarray:
    """Coalesce one document's passage vectors; float64 running average."""
    out: list[np.ndarray] = []
    acc_sum = np.zeros(block.shape[1], dtype=np.float64)
    acc_n = 0
    acc_mean32 = None
    for i in range(block.shape[0]):
        v = block[i]
        if acc_n > 0 and vc.cosine_distance(v, acc_mean32) >= delta:
            out.append(acc_mean32)
            acc_sum[:] = 0.0
            acc_n = 0
        acc_sum += v
        acc_n += 1
        acc_mean32 = (acc_sum / acc_n).astype(vc.STORAGE_DTYPE)
    out.append(acc_mean32)
    return np.stack(out)


def read_passage_vectors(path: str | os.PathLike) -> list[tuple[str, np.ndarray]]:
    """Parse the plain-text passage interchange format.

    One line per passage: ``doc_id<TAB>passage_index<TAB>space-separated
    floats``.  Lines may arrive in any order; per document the passage
    indexes must form 0..n-1 with no gaps or repeats.  Returns (doc_id,
    (n, dim) array) pairs in first-seen document order.
    """
    per_doc: dict[str, dict[int, np.ndarray]] = {}
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(
                    f"expected 'doc_id<TAB>passage_index<TAB>floats', got {len(parts)} fields",
                    line=lineno,
                )
            doc_id, idx_str, floats = parts
            try:
                pidx = int(idx_str)
            except ValueError:
                raise FormatError(f"bad passage index {idx_str!r}", line=lineno) from None
            if pidx < 0:
                raise FormatError(f"negative passage index {pidx}", line=lineno)
            try:
                vec = np.array([float(x) for x in floats.split()], dtype=vc.STORAGE_DTYPE)
            except ValueError:
                raise FormatError("unparseable float in vector payload", line=lineno) from None
            if vec.size == 0:
                raise FormatError("empty vector payload", line=lineno)
            if not np.all(np.isfinite(vec)):
                raise FormatError("non-finite vector coordinate", line=lineno)
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise FormatError(f"vector dim {vec.size} != first dim {dim}", line=lineno)
            slots = per_doc.setdefault(doc_id, {})
            if pidx in slots:
                raise FormatError(
                    f"duplicate passage index {pidx} for document {doc_id!r}", line=lineno
                )
            slots[pidx] = vec
    docs: list[tuple[str, np.ndarray]] = []
    for doc_id, slots in per_doc.items():
        if sorted(slots) != list(range(len(slots))):
            raise FormatError(
                f"document {doc_id!r}: passage indexes {sorted(slots)} are not 0..{len(slots) - 1}"
            )
        docs.append((doc_id, np.stack([slots[i] for i in range(len(slots))])))
    return docs


def build_index(
    docs: Sequence[tuple[str, np.ndarray]], *, normalize: bool = False
) -> ForwardIndex:
    """Build a fresh index from (doc_id, passage matrix) pairs."""
    if not docs:
        raise EmptyInputError("cannot build an index from zero documents")
    dim = np.atleast_2d(np.asarray(docs[0][1])).shape[1]
    index = ForwardIndex(dim, normalized=normalize)
    if normalize:
        docs = [
            (doc_id, np.stack([vc.l2_normalize(row) for row in np.atleast_2d(np.asarray(block))]))
            for doc_id, block in docs
        ]
    index.add_documents(docs)
    return index
