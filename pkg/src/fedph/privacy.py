"""Gaussian noise calibration and the noise-splitting rule.

A published class mean of n >= n_min clipped embeddings (norm <= B) moves
by at most 2B/n_min in L2 when one sample is replaced, which is the
sensitivity used to scale the noise.  When an encrypted aggregate is the
only value ever decrypted, each of m clients may add variance
(S_f * sigma)^2 / (t - 1) instead of the full (S_f * sigma)^2 — the
decrypted sum then carries variance m/(t-1) times the full one, which is
at least the target since t - 1 < m.  t is the assumed minimum number of
honest clients.

The sigma calibration here is the classical Gaussian-mechanism formula,
proved for epsilon <= 1; it is applied unchanged for larger epsilon,
matching the sweep this simulator reproduces.  No composition across
rounds is accounted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mathcore import RngStream
from .prototype import PrototypeSet


@dataclass(frozen=True)
class DpConfig:
    epsilon: float
    delta: float
    clip_bound: float
    honest_min: int  # t: minimum number of honest clients
    n_clients: int  # m

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if self.clip_bound <= 0:
            raise ValueError("clip_bound must be positive")
        if self.honest_min < 2:
            raise ValueError("honest_min must be at least 2")
        if self.honest_min > self.n_clients:
            raise ValueError("honest_min cannot exceed n_clients")


def sensitivity(clip_bound: float, n_min: int) -> float:
    """Max L2 change of a mean of >= n_min norm-bounded vectors under a
    one-sample replacement: 2B / n_min."""
    if clip_bound <= 0:
        raise ValueError("clip_bound must be positive")
    if n_min < 1:
        raise ValueError("n_min must be at least 1")
    return 2.0 * clip_bound / n_min


def calibrate_sigma(epsilon: float, delta: float) -> float:
    """Noise multiplier sqrt(2 ln(1.25/delta)) / epsilon.

    epsilon = inf is accepted as the noise-off sentinel and returns 0.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    if math.isinf(epsilon):
        return 0.0
    return math.sqrt(2.0 * math.log(1.25 / delta)) / epsilon


@dataclass(frozen=True)
class NoiseSpec:
    """Derived noise scales for one run; all stds in embedding units."""

    sensitivity: float
    sigma: float
    honest_min: int
    n_clients: int

    def __post_init__(self):
        if self.sensitivity <= 0 or self.sigma < 0:
            raise ValueError("sensitivity must be positive and sigma nonnegative")
        if not 2 <= self.honest_min <= self.n_clients:
            raise ValueError("need 2 <= honest_min <= n_clients")

    @property
    def full_std(self) -> float:
        """Per-client std without splitting: S_f * sigma."""
        return self.sensitivity * self.sigma

    @property
    def per_client_std(self) -> float:
        """Split per-client std: S_f * sigma / sqrt(t - 1)."""
        return self.full_std / math.sqrt(self.honest_min - 1)

    @property
    def aggregate_std(self) -> float:
        """Std of the summed split noise across all m clients."""
        return self.per_client_std * math.sqrt(self.n_clients)


def noise_spec_for(dp: DpConfig, n_min: int) -> NoiseSpec:
    return NoiseSpec(
        sensitivity=sensitivity(dp.clip_bound, n_min),
        sigma=calibrate_sigma(dp.epsilon, dp.delta),
        honest_min=dp.honest_min,
        n_clients=dp.n_clients,
    )


def _perturb(proto: PrototypeSet, std: float, rng: RngStream) -> PrototypeSet:
    if std == 0.0:
        return proto
    vectors = {}
    counts = {}
    for j, vec, cnt in proto.items():
        vectors[j] = vec + rng.normal(0.0, std, vec.shape[0])
        counts[j] = cnt
    return PrototypeSet(vectors, counts)


def perturb_split(proto: PrototypeSet, spec: NoiseSpec, rng: RngStream) -> PrototypeSet:
    """Add i.i.d. N(0, S_f^2 sigma^2 / (t-1)) noise to every coordinate."""
    return _perturb(proto, spec.per_client_std, rng)


def perturb_local(proto: PrototypeSet, spec: NoiseSpec, rng: RngStream) -> PrototypeSet:
    """Add the full unsplit noise N(0, S_f^2 sigma^2) per coordinate."""
    return _perturb(proto, spec.full_std, rng)
