"""Inference-time token filtering for document batches: score every token,
keep the top fraction p of the batch's padded length, padding removed first.

The learned scoring network this mechanism was designed around is not
trained here; an IDF-style scorer stands in so the mechanism can be
exercised deterministically.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .errors import DomainError

TokenScorer = Callable[[str], float]

DEFAULT_SPECIAL_TOKENS = ("[CLS]", "[SEP]", "[MASK]", "[UNK]")


@dataclass(frozen=True)
class TokenBatch:
    """Rows of tokens, all padded to the same length with pad_token."""

    rows: tuple[tuple[str, ...], ...]
    pad_token: str = "[PAD]"

    @staticmethod
    def from_rows(rows: Sequence[Sequence[str]], pad_token: str = "[PAD]") -> "TokenBatch":
        """Pad ragged rows out to the longest row."""
        rows = [tuple(r) for r in rows]
        width = max((len(r) for r in rows), default=0)
        padded = tuple(r + (pad_token,) * (width - len(r)) for r in rows)
        return TokenBatch(rows=padded, pad_token=pad_token)

    def __post_init__(self):
        widths = {len(r) for r in self.rows}
        if len(widths) > 1:
            raise DomainError(f"rows have unequal lengths {sorted(widths)}")

    @property
    def max_len(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    def real_tokens(self, row: int) -> list[str]:
        return [t for t in self.rows[row] if t != self.pad_token]


def select_tokens(batch: TokenBatch, scorer: TokenScorer, p: float) -> TokenBatch:
    """Keep the ceil(p * max_len) best-scoring tokens of every row.

    Padding is removed first; only if a row still exceeds the target are
    its lowest-scoring real tokens dropped (ties keep earlier positions).
    Survivors stay in original order and rows are re-padded to the new
    common width.
    """
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"keep ratio p must be in [0, 1], got {p}")

    def checked_score(token: str) -> float:
        s = scorer(token)
        if not (0.0 <= s <= 1.0):  # also rejects NaN
            raise DomainError(f"scorer returned {s!r} for {token!r}, expected [0, 1]")
        return s

    target = math.ceil(p * batch.max_len)
    kept_rows: list[list[str]] = []
    for i in range(len(batch.rows)):
        real = [(pos, tok) for pos, tok in enumerate(batch.rows[i]) if tok != batch.pad_token]
        if len(real) > target:
            # rank candidates best-first: higher score wins, earlier position
            # breaks ties; whatever falls outside the target is dropped
            by_priority = sorted(real, key=lambda pt: (-checked_score(pt[1]), pt[0]))
            keep_positions = {pos for pos, _ in by_priority[:target]}
            real = [(pos, tok) for pos, tok in real if pos in keep_positions]
        kept_rows.append([tok for _, tok in real])
    width = max((len(r) for r in kept_rows), default=0)
    padded = tuple(
        tuple(r) + (batch.pad_token,) * (width - len(r)) for r in kept_rows
    )
    return TokenBatch(rows=padded, pad_token=batch.pad_token)


class IdfScorer:
    """Normalized inverse document frequency in [0, 1].

    Built from a token document-frequency census: tokens seen in every
    document score 0, never-seen tokens score 1.  Special tokens are pinned
    to 1.0 so they always survive filtering.
    """

    def __init__(
        self,
        documents: Iterable[Sequence[str]],
        special_tokens: Sequence[str] = DEFAULT_SPECIAL_TOKENS,
    ):
        self._df: Counter[str] = Counter()
        self._n_docs = 0
        for doc in documents:
            self._n_docs += 1
            self._df.update(set(doc))
        if self._n_docs == 0:
            raise DomainError("IdfScorer needs at least one document")
        self._special = frozenset(special_tokens)
        self._log_n1 = math.log(1.0 + self._n_docs)

    def __call__(self, token: str) -> float:
        if token in self._special:
            return 1.0
        df = self._df.get(token, 0)
        return math.log((1.0 + self._n_docs) / (1.0 + df)) / self._log_n1
