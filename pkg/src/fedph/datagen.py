"""Synthetic Non-IID dataset generation and feature-file I/O.

Heterogeneity has two axes: label shift (per-class Dirichlet apportionment
across clients) and feature shift (each client is assigned one condition;
a condition applies an orthogonal rotation plus an offset to every class
mean).  Generation is fully determined by (config, seed).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .mathcore import RngStream

TRAIN_FRACTION = 0.8


def holdout_size(n: int) -> int:
    """Test-split size for n samples of one class: exactly floor(n/5).

    Integer arithmetic, so a class with a single sample keeps it in train.
    """
    return n // 5


# stream ids within the data seed
_STREAM_PARTITION = 1
_STREAM_GEOMETRY = 2
_STREAM_SAMPLES = 3


class FeatureFileError(ValueError):
    """A feature CSV failed to parse; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class CoverageError(RuntimeError):
    """Could not apportion at least one sample of every class to every client."""


class Sample(NamedTuple):
    x: np.ndarray
    y: int
    condition: int


@dataclass
class ClientDataset:
    """One client's private data: disjoint train/test splits plus label counts."""

    client_id: int
    condition: int
    train_x: np.ndarray  # (n_train, d)
    train_y: np.ndarray  # (n_train,) int64
    test_x: np.ndarray
    test_y: np.ndarray

    def __post_init__(self):
        if self.train_x.shape[0] != self.train_y.shape[0]:
            raise ValueError("train_x / train_y length mismatch")
        if self.test_x.shape[0] != self.test_y.shape[0]:
            raise ValueError("test_x / test_y length mismatch")

    @property
    def dim(self) -> int:
        return self.train_x.shape[1]

    @property
    def n_train(self) -> int:
        return self.train_x.shape[0]

    @property
    def n_test(self) -> int:
        return self.test_x.shape[0]

    def class_counts(self) -> dict[int, int]:
        """Training-split label histogram |D_{i,j}|."""
        classes, counts = np.unique(self.train_y, return_counts=True)
        return {int(c): int(n) for c, n in zip(classes, counts)}

    def iter_samples(self, split: str = "train") -> Iterator[Sample]:
        xs, ys = (self.train_x, self.train_y) if split == "train" else (self.test_x, self.test_y)
        for i in range(len(ys)):
            yield Sample(xs[i], int(ys[i]), self.condition)


@dataclass(frozen=True)
class DataConfig:
    n_clients: int = 5
    n_classes: int = 6
    n_conditions: int = 5
    raw_dim: int = 64
    samples_per_client: int = 150
    dirichlet_alpha: float = 0.5
    class_separation: float = 4.0
    condition_shift: float = 0.6
    noise_std: float = 0.5
    seed: int = 0
    # Every client gets >= 1 training sample of every class (Dirichlet rows
    # violating this are redrawn).  Required by aggregation modes that
    # average over all clients per class; also keeps the per-round upload
    # at exactly n_classes prototypes per client.
    ensure_class_coverage: bool = True

    def __post_init__(self):
        for name in ("n_clients", "n_classes", "n_conditions", "raw_dim", "samples_per_client"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.dirichlet_alpha <= 0:
            raise ValueError("dirichlet_alpha must be positive")
        if self.class_separation < 0 or self.condition_shift < 0 or self.noise_std < 0:
            raise ValueError("separation, shift and noise_std must be nonnegative")
        if self.n_classes > self.raw_dim:
            raise ValueError("n_classes cannot exceed raw_dim (orthogonal class means)")


def partition_labels(
    rng: RngStream,
    alpha: float,
    n_clients: int,
    class_totals,
    min_per_client: int = 0,
    max_retries: int = 100,
) -> np.ndarray:
    """Apportion each class's total across clients by a Dirichlet(alpha) draw.

    Largest-remainder rounding keeps column sums exactly equal to
    class_totals.  With min_per_client > 0, a class's draw is retried until
    every client receives at least that many samples (CoverageError after
    max_retries failures).

    Returns an (n_clients, n_classes) integer count matrix.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    totals = np.asarray(class_totals, dtype=np.int64)
    if np.any(totals < 0):
        raise ValueError("class totals must be nonnegative")
    counts = np.zeros((n_clients, len(totals)), dtype=np.int64)
    for j, total in enumerate(totals):
        for attempt in range(max_retries + 1):
            probs = rng.generator.dirichlet(np.full(n_clients, float(alpha)))
            row = _largest_remainder(probs, int(total))
            if min_per_client == 0 or np.all(row >= min_per_client):
                counts[:, j] = row
                break
        else:
            raise CoverageError(
                f"class {j}: could not give every client >= {min_per_client} "
                f"samples after {max_retries} retries (total {total})"
            )
    return counts


def _largest_remainder(probs: np.ndarray, total: int) -> np.ndarray:
    """Round probs*total to integers summing exactly to total."""
    raw = probs * total
    base = np.floor(raw).astype(np.int64)
    short = total - int(base.sum())
    if short > 0:
        # ties broken toward the lowest index for determinism
        order = np.lexsort((np.arange(len(probs)), -(raw - base)))
        base[order[:short]] += 1
    return base


def _orthogonal_shift(rng: RngStream, dim: int, magnitude: float) -> np.ndarray:
    """Rotation via the Cayley transform of a scaled random skew matrix.

    Exactly orthogonal for any magnitude and exactly the identity at 0, so
    zero condition shift reproduces the IID case.
    """
    g = rng.normal(0.0, 1.0, (dim, dim))
    skew = (g - g.T) / (2.0 * np.sqrt(dim))
    t = 0.5 * magnitude * skew
    eye = np.eye(dim)
    return np.linalg.solve(eye - t, eye + t)


def generate(config: DataConfig) -> list[ClientDataset]:
    """Generate per-client datasets per the config; see module docstring."""
    cfg = config
    part_rng = RngStream(cfg.seed, _STREAM_PARTITION)
    geom_rng = RngStream(cfg.seed, _STREAM_GEOMETRY)
    samp_rng = RngStream(cfg.seed, _STREAM_SAMPLES)

    # class means: orthonormal directions scaled so pairwise L2 separation
    # equals class_separation exactly
    gauss = geom_rng.normal(0.0, 1.0, (cfg.raw_dim, cfg.n_classes))
    q, _ = np.linalg.qr(gauss)
    means = (cfg.class_separation / np.sqrt(2.0)) * q.T  # (K, d)

    rotations = []
    offsets = []
    for _ in range(cfg.n_conditions):
        rotations.append(_orthogonal_shift(geom_rng, cfg.raw_dim, cfg.condition_shift))
        direction = geom_rng.normal(0.0, 1.0, cfg.raw_dim)
        direction /= np.linalg.norm(direction)
        offsets.append(cfg.condition_shift * direction)

    total = cfg.n_clients * cfg.samples_per_client
    class_totals = np.full(cfg.n_classes, total // cfg.n_classes, dtype=np.int64)
    class_totals[: total % cfg.n_classes] += 1

    counts = partition_labels(
        part_rng,
        cfg.dirichlet_alpha,
        cfg.n_clients,
        class_totals,
        min_per_client=1 if cfg.ensure_class_coverage else 0,
    )

    datasets = []
    for i in range(cfg.n_clients):
        condition = i % cfg.n_conditions
        rot, off = rotations[condition], offsets[condition]
        train_parts, test_parts = [], []
        train_labels, test_labels = [], []
        for j in range(cfg.n_classes):
            n = int(counts[i, j])
            if n == 0:
                continue
            center = rot @ means[j] + off
            xs = center + samp_rng.normal(0.0, cfg.noise_std, (n, cfg.raw_dim))
            n_test = holdout_size(n)
            train_parts.append(xs[: n - n_test])
            test_parts.append(xs[n - n_test :])
            train_labels.append(np.full(n - n_test, j, dtype=np.int64))
            test_labels.append(np.full(n_test, j, dtype=np.int64))
        datasets.append(
            ClientDataset(
                client_id=i,
                condition=condition,
                train_x=np.concatenate(train_parts) if train_parts else np.empty((0, cfg.raw_dim)),
                train_y=np.concatenate(train_labels) if train_labels else np.empty(0, dtype=np.int64),
                test_x=np.concatenate(test_parts) if test_parts else np.empty((0, cfg.raw_dim)),
                test_y=np.concatenate(test_labels) if test_labels else np.empty(0, dtype=np.int64),
            )
        )
    return datasets


# ---------------------------------------------------------------------------
# Feature CSV I/O
#
# Format: header `client_id,condition,y,x0,...,x{d-1}`, one sample per row,
# UTF-8, decimal float literals.  Rows for one (client, class) pair appear
# train-split first; the loader re-splits by taking the last n//5 rows of
# each class group as test, which reproduces the generator's stratified
# split exactly.
# ---------------------------------------------------------------------------


def write_features_csv(datasets: list[ClientDataset], path) -> int:
    """Write datasets to one CSV; returns the number of sample rows."""
    if not datasets:
        raise ValueError("no datasets to write")
    dim = datasets[0].dim
    rows = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["client_id", "condition", "y"] + [f"x{k}" for k in range(dim)])
        for ds in datasets:
            for j in sorted(set(ds.train_y.tolist()) | set(ds.test_y.tolist())):
                for split_x, split_y in ((ds.train_x, ds.train_y), (ds.test_x, ds.test_y)):
                    mask = split_y == j
                    for x in split_x[mask]:
                        writer.writerow(
                            [ds.client_id, ds.condition, j] + [repr(float(v)) for v in x]
                        )
                        rows += 1
    return rows


def load_features_csv(path) -> list[ClientDataset]:
    """Parse a feature CSV back into ClientDatasets (see format note above)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FeatureFileError("empty file", line=1) from None
        if len(header) < 4 or header[:3] != ["client_id", "condition", "y"]:
            raise FeatureFileError(
                "header must be client_id,condition,y,x0,...", line=1
            )
        dim = len(header) - 3
        per_client: dict[int, dict] = {}
        n_rows = 0
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 3:
                raise FeatureFileError(
                    f"expected {dim + 3} fields, got {len(row)}", line=line_no
                )
            try:
                cid = int(row[0])
                condition = int(row[1])
                y = int(row[2])
            except ValueError as exc:
                raise FeatureFileError(f"bad integer field: {exc}", line=line_no) from None
            if cid < 0:
                raise FeatureFileError(f"unknown client id {cid}", line=line_no)
            if y < 0 or condition < 0:
                raise FeatureFileError("negative class or condition id", line=line_no)
            try:
                x = np.array([float(v) for v in row[3:]], dtype=np.float64)
            except ValueError as exc:
                raise FeatureFileError(f"bad float field: {exc}", line=line_no) from None
            if not np.all(np.isfinite(x)):
                raise FeatureFileError("non-finite feature value", line=line_no)
            entry = per_client.setdefault(cid, {"condition": condition, "by_class": {}})
            if entry["condition"] != condition:
                raise FeatureFileError(
                    f"client {cid} has inconsistent condition ids", line=line_no
                )
            entry["by_class"].setdefault(y, []).append(x)
            n_rows += 1
    if n_rows == 0:
        raise FeatureFileError("file contains a header but no samples")

    datasets = []
    for cid in sorted(per_client):
        entry = per_client[cid]
        train_x, train_y, test_x, test_y = [], [], [], []
        for j in sorted(entry["by_class"]):
            xs = np.vstack(entry["by_class"][j])
            n = len(xs)
            n_test = holdout_size(n)
            train_x.append(xs[: n - n_test])
            test_x.append(xs[n - n_test :])
            train_y.append(np.full(n - n_test, j, dtype=np.int64))
            test_y.append(np.full(n_test, j, dtype=np.int64))
        datasets.append(
            ClientDataset(
                client_id=cid,
                condition=entry["condition"],
                train_x=np.concatenate(train_x),
                train_y=np.concatenate(train_y),
                test_x=np.concatenate(test_x) if test_x else np.empty((0, dim)),
                test_y=np.concatenate(test_y) if test_y else np.empty(0, dtype=np.int64),
            )
        )
    return datasets
