"""Class prototypes: per-class means of clipped embeddings, and their
server-side aggregation.

Two aggregation variants exist.  The weighted one is a convex combination
with weights proportional to per-client class counts and is only possible
when counts are visible (plaintext mode).  The uniform one is a plain mean
over all clients, the only form computable under additive encryption
without revealing counts; it requires every client to cover every class.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Iterable, Iterator

import numpy as np

from .model import BackboneSpec, HeadParams, backbone_forward, project

if TYPE_CHECKING:
    from .datagen import ClientDataset


class AggregationError(ValueError):
    """The aggregation inputs admit no valid result."""


class MissingClassError(AggregationError):
    """A client lacks a class that the selected aggregation mode requires."""


class PrototypeSet:
    """Per-class embedding vectors with per-class sample counts.

    Immutable by convention after construction; vectors are copied in and
    marked read-only.  A count of 0 is only meaningful for uninitialized
    global prototypes.
    """

    def __init__(self, vectors: dict[int, np.ndarray], counts: dict[int, int]):
        if set(vectors) != set(counts):
            raise ValueError("vectors and counts must cover the same classes")
        self._vectors: dict[int, np.ndarray] = {}
        self._counts: dict[int, int] = {}
        dim = None
        for j in sorted(vectors):
            v = np.asarray(vectors[j], dtype=np.float64).copy()
            if v.ndim != 1:
                raise ValueError(f"class {j}: prototype must be a vector")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"class {j}: prototype has non-finite entries")
            if dim is None:
                dim = v.shape[0]
            elif v.shape[0] != dim:
                raise ValueError("all prototypes must share one dimension")
            c = int(counts[j])
            if c < 0:
                raise ValueError(f"class {j}: negative count")
            v.flags.writeable = False
            self._vectors[int(j)] = v
            self._counts[int(j)] = c

    @classmethod
    def empty(cls) -> "PrototypeSet":
        return cls({}, {})

    @classmethod
    def zeros(cls, classes: Iterable[int], dim: int) -> "PrototypeSet":
        classes = list(classes)
        return cls(
            {j: np.zeros(dim) for j in classes},
            {j: 0 for j in classes},
        )

    @property
    def classes(self) -> tuple[int, ...]:
        return tuple(sorted(self._vectors))

    @property
    def dim(self) -> int | None:
        for v in self._vectors.values():
            return v.shape[0]
        return None

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, class_id: int) -> bool:
        return int(class_id) in self._vectors

    def vector(self, class_id: int) -> np.ndarray:
        return self._vectors[int(class_id)]

    def count(self, class_id: int) -> int:
        return self._counts[int(class_id)]

    def items(self) -> Iterator[tuple[int, np.ndarray, int]]:
        for j in self.classes:
            yield j, self._vectors[j], self._counts[j]

    def matrix(self) -> np.ndarray:
        """Prototype vectors stacked in ascending class order."""
        return np.stack([self._vectors[j] for j in self.classes])

    def __repr__(self) -> str:
        return f"PrototypeSet(classes={self.classes}, dim={self.dim})"


def local_prototypes(
    dataset: "ClientDataset",
    params: HeadParams,
    backbone: BackboneSpec,
    clip_bound: float,
) -> PrototypeSet:
    """Per-class mean of norm-clipped projections over the training split."""
    if clip_bound <= 0:
        raise ValueError("clip bound must be positive")
    if dataset.n_train == 0:
        raise ValueError("training split is empty")
    feats = backbone_forward(backbone, dataset.train_x)
    z = project(params, feats)
    norms = np.linalg.norm(z, axis=1)
    scale = np.minimum(1.0, clip_bound / np.where(norms == 0.0, 1.0, norms))
    z = z * scale[:, None]
    vectors: dict[int, np.ndarray] = {}
    counts: dict[int, int] = {}
    for j in np.unique(dataset.train_y):
        mask = dataset.train_y == j
        vectors[int(j)] = z[mask].mean(axis=0)
        counts[int(j)] = int(mask.sum())
    return PrototypeSet(vectors, counts)


def aggregate_weighted(local_sets: list[PrototypeSet]) -> PrototypeSet:
    """Count-weighted convex combination per class; zero-count clients skip."""
    if not local_sets:
        raise AggregationError("no local prototype sets")
    all_classes = sorted({j for s in local_sets for j in s.classes})
    vectors: dict[int, np.ndarray] = {}
    counts: dict[int, int] = {}
    for j in all_classes:
        total = sum(s.count(j) for s in local_sets if j in s)
        if total == 0:
            continue
        acc = None
        for s in local_sets:
            if j in s and s.count(j) > 0:
                term = (s.count(j) / total) * s.vector(j)
                acc = term if acc is None else acc + term
        vectors[j] = acc
        counts[j] = total
    if not vectors:
        raise AggregationError("every class has zero total count")
    return PrototypeSet(vectors, counts)


def aggregate_uniform(local_sets: list[PrototypeSet], n_clients: int) -> PrototypeSet:
    """Arithmetic mean over all clients per class (encrypted-path semantics)."""
    if len(local_sets) != n_clients:
        raise AggregationError(
            f"expected {n_clients} local sets, got {len(local_sets)}"
        )
    all_classes = sorted({j for s in local_sets for j in s.classes})
    if not all_classes:
        raise AggregationError("no classes present in any local set")
    for idx, s in enumerate(local_sets):
        for j in all_classes:
            if j not in s:
                raise MissingClassError(
                    f"client index {idx} is missing class {j}; uniform "
                    "aggregation requires full class coverage"
                )
    vectors = {}
    counts = {}
    for j in all_classes:
        vectors[j] = sum(s.vector(j) for s in local_sets) / n_clients
        counts[j] = sum(s.count(j) for s in local_sets)
    return PrototypeSet(vectors, counts)
