"""Deterministic numeric primitives shared by every other module.

All real arithmetic is 64-bit IEEE floating point.  Randomness flows
exclusively through :class:`RngStream` so that a run is fully determined
by its seeds; one stream per (owner, purpose) pair.
"""

from __future__ import annotations

import numpy as np


class DimensionMismatchError(ValueError):
    """Two vectors that must share a dimension do not."""


class ZeroVectorError(ValueError):
    """A zero-norm vector was passed where a direction is required."""


class RngStream:
    """Seeded random stream, reproducible per (seed, stream_id).

    Identical (seed, stream_id) pairs yield identical sample sequences;
    distinct stream_ids give statistically independent streams.  A stream
    is single-owner: never share one instance across concurrent contexts.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def normal(self, mean: float, std: float, size) -> np.ndarray:
        return self._gen.normal(mean, std, size)

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def bytes(self, n: int) -> bytes:
        return self._gen.bytes(n)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self._gen.choice(n, size=size, replace=replace)


def check_vector(v, name: str = "vector") -> np.ndarray:
    """Coerce to a finite float64 1-D array, raising on NaN/Inf."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}"
        )


def cosine_similarity(a, b) -> float:
    """dot(a,b) / (|a| |b|), in [-1, 1].  Both inputs must be nonzero."""
    a = check_vector(a, "a")
    b = check_vector(b, "b")
    _check_same_dim(a, b)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine similarity undefined for zero-norm input")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def l1_distance(a, b) -> float:
    a = check_vector(a, "a")
    b = check_vector(b, "b")
    _check_same_dim(a, b)
    return float(np.sum(np.abs(a - b)))


def l2_distance(a, b) -> float:
    a = check_vector(a, "a")
    b = check_vector(b, "b")
    _check_same_dim(a, b)
    return float(np.linalg.norm(a - b))


def sample_gaussian(rng: RngStream, mean: float, std: float, n: int) -> np.ndarray:
    """n i.i.d. draws from N(mean, std^2); std = 0 returns the constant vector."""
    if std < 0:
        raise ValueError(f"std must be nonnegative, got {std}")
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    if std == 0.0:
        return np.full(n, float(mean))
    return rng.normal(mean, std, n)


def sample_dirichlet(rng: RngStream, alpha) -> np.ndarray:
    """One draw from Dirichlet(alpha): nonnegative entries summing to 1."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.ndim != 1 or alpha.size == 0:
        raise ValueError("alpha must be a nonempty 1-D sequence")
    if np.any(alpha <= 0) or not np.all(np.isfinite(alpha)):
        raise ValueError("all alpha entries must be positive and finite")
    return rng.generator.dirichlet(alpha)
