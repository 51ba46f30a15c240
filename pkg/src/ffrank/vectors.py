"""Deterministic vector arithmetic shared by the index, re-ranker and encoders.

Vectors are 1-D ``float32`` numpy arrays (storage precision); every
reduction (dot, mean, norm) accumulates in ``float64`` so that scores stay
stable across thousands of interpolation steps.  All functions are pure and
safe to call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, DomainError, EmptyInputError, ZeroVectorError

STORAGE_DTYPE = np.float32


def as_vector(values, *, name: str = "vector") -> np.ndarray:
    """Coerce ``values`` to a finite 1-D float32 array.

    Raises DimensionError for non-1-D input and DomainError for NaN/Inf
    coordinates.
    """
    v = np.asarray(values, dtype=STORAGE_DTYPE)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    if v.size == 0:
        raise DimensionError(f"{name} must have positive dimension")
    if not np.all(np.isfinite(v)):
        raise DomainError(f"{name} contains non-finite values")
    return v


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def dot(a, b) -> float:
    """Dot product of two equal-dimension vectors, accumulated in float64."""
    a = np.asarray(a)
    b = np.asarray(b)
    _check_same_dim(a, b)
    return float(np.dot(a.astype(np.float64, copy=False), b.astype(np.float64, copy=False)))


def norm(v) -> float:
    """Euclidean norm, accumulated in float64."""
    v = np.asarray(v, dtype=np.float64)
    return float(np.linalg.norm(v))


def cosine_distance(a, b) -> float:
    """1 - cos(a, b); in [0, 2] up to rounding.

    Raises ZeroVectorError if either argument has zero norm.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    _check_same_dim(a, b)
    na = norm(a)
    nb = norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine distance undefined for zero vector")
    return 1.0 - dot(a, b) / (na * nb)


def mean(vectors: Sequence | Iterable) -> np.ndarray:
    """Coordinate-wise arithmetic mean of a nonempty list of vectors."""
    vs = list(vectors)
    if not vs:
        raise EmptyInputError("mean of empty vector list")
    stacked = np.stack([np.asarray(v) for v in vs])
    if stacked.ndim != 2:
        raise DimensionError("mean expects a list of 1-D vectors")
    return stacked.mean(axis=0, dtype=np.float64).astype(STORAGE_DTYPE)


def l2_normalize(v) -> np.ndarray:
    """v / ||v|| as float32; raises ZeroVectorError for ||v|| == 0."""
    v = np.asarray(v)
    n = norm(v)
    if n == 0.0:
        raise ZeroVectorError("cannot normalize zero vector")
    return (v.astype(np.float64, copy=False) / n).astype(STORAGE_DTYPE)


@dataclass(frozen=True)
class Projection:
    """Affine map ``W @ v + b`` applied to query vectors before scoring.

    weights: (dim_out, dim_in) matrix; bias: (dim_out,) vector.
    """

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=STORAGE_DTYPE)
        b = as_vector(self.bias, name="bias")
        if w.ndim != 2:
            raise DimensionError(f"weights must be 2-D, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise DomainError("weights contain non-finite values")
        if w.shape[0] != b.shape[0]:
            raise DimensionError(
                f"weights rows ({w.shape[0]}) must match bias dim ({b.shape[0]})"
            )
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def dim_in(self) -> int:
        return self.weights.shape[1]

    @property
    def dim_out(self) -> int:
        return self.weights.shape[0]


def project(p: Projection, v) -> np.ndarray:
    """Apply the affine map ``p`` to vector ``v`` (float64 accumulation)."""
    v = np.asarray(v)
    if p.dim_in != v.shape[-1]:
        raise DimensionError(
            f"projection expects dim {p.dim_in}, got {v.shape[-1]}"
        )
    out = p.weights.astype(np.float64) @ v.astype(np.float64) + p.bias.astype(np.float64)
    return out.astype(STORAGE_DTYPE)


def contrastive_loss(pos_score: float, neg_scores: Sequence[float], tau: float) -> float:
    """Softmax cross-entropy of the positive score against the negatives.

    -log( exp(pos/tau) / (exp(pos/tau) + sum_i exp(neg_i/tau)) ), evaluated
    through a log-sum-exp so large score magnitudes cannot overflow.
    Always >= 0; exactly 0 when there are no negatives.
    """
    if not tau > 0:
        raise DomainError(f"temperature must be positive, got {tau}")
    scaled = [pos_score / tau] + [s / tau for s in neg_scores]
    m = max(scaled)
    lse = m + math.log(sum(math.exp(s - m) for s in scaled))
    return lse - scaled[0]
