"""Local model: frozen backbone encoder, trainable projection + classifier head.

The backbone is a seeded random affine+ReLU map that stands in for a
pretrained feature extractor; it never trains.  Heads may differ in depth
across clients (1 or 2 projection layers plus one classifier layer) while
keeping the same embedding dimension, which is what makes prototype
exchange depth-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mathcore import RngStream


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or gradient."""


@dataclass(frozen=True)
class OptimConfig:
    """SGD with momentum and weight decay."""

    learning_rate: float = 0.001
    momentum: float = 0.5
    weight_decay: float = 0.0001
    batch_size: int = 32

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


@dataclass(frozen=True)
class BackboneSpec:
    """Frozen affine+ReLU feature map, fully determined by its seed."""

    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    seed: int

    def __post_init__(self):
        self.weight.flags.writeable = False
        self.bias.flags.writeable = False

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @classmethod
    def from_seed(cls, seed: int, in_dim: int, out_dim: int) -> "BackboneSpec":
        if in_dim < 1 or out_dim < 1:
            raise ValueError("backbone dimensions must be positive")
        rng = RngStream(seed, stream_id=0)
        bound = 1.0 / np.sqrt(in_dim)
        w = rng.uniform(-bound, bound, (out_dim, in_dim))
        b = rng.uniform(-bound, bound, out_dim)
        return cls(weight=w, bias=b, seed=int(seed))


def backbone_forward(spec: BackboneSpec, x: np.ndarray) -> np.ndarray:
    """max(0, Wx + b).  Accepts a single vector (d,) or a batch (n, d)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != spec.in_dim:
        raise ValueError(f"expected input dim {spec.in_dim}, got {x.shape[-1]}")
    return np.maximum(x @ spec.weight.T + spec.bias, 0.0)


@dataclass
class Affine:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)


@dataclass
class HeadParams:
    """Trainable projection (1 or 2 affine layers, ReLU between) + classifier.

    velocity holds the per-parameter SGD momentum buffers, in the same
    order as :meth:`param_arrays`.
    """

    projection: list[Affine]
    classifier: Affine
    velocity: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if len(self.projection) not in (1, 2):
            raise ValueError("projection must have 1 or 2 layers")
        dims = [l.weight.shape for l in self.projection]
        for shape in dims + [self.classifier.weight.shape]:
            if shape[0] < 1 or shape[1] < 1:
                raise ValueError("zero-width layer rejected")
        for prev, nxt in zip(self.projection[:-1], self.projection[1:]):
            if nxt.weight.shape[1] != prev.weight.shape[0]:
                raise ValueError("projection layer dimensions do not chain")
        if self.classifier.weight.shape[1] != self.projection[-1].weight.shape[0]:
            raise ValueError("classifier input dim must equal projection output dim")
        if not self.velocity:
            self.velocity = [np.zeros_like(a) for a in self.param_arrays()]

    @property
    def in_dim(self) -> int:
        return self.projection[0].weight.shape[1]

    @property
    def embed_dim(self) -> int:
        return self.projection[-1].weight.shape[0]

    @property
    def n_classes(self) -> int:
        return self.classifier.weight.shape[0]

    @property
    def depth(self) -> int:
        """Total affine layers, projection plus classifier."""
        return len(self.projection) + 1

    def param_arrays(self) -> list[np.ndarray]:
        """All trainable arrays in a fixed order (proj W/b pairs, then clf)."""
        out: list[np.ndarray] = []
        for layer in self.projection:
            out.extend([layer.weight, layer.bias])
        out.extend([self.classifier.weight, self.classifier.bias])
        return out

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.param_arrays()])

    def load_flat(self, flat: np.ndarray) -> None:
        arrays = self.param_arrays()
        total = sum(a.size for a in arrays)
        if flat.shape != (total,):
            raise ValueError(f"expected {total} values, got {flat.shape}")
        pos = 0
        for a in arrays:
            a[...] = flat[pos : pos + a.size].reshape(a.shape)
            pos += a.size

    def copy(self) -> "HeadParams":
        return HeadParams(
            projection=[Affine(l.weight.copy(), l.bias.copy()) for l in self.projection],
            classifier=Affine(self.classifier.weight.copy(), self.classifier.bias.copy()),
            velocity=[v.copy() for v in self.velocity],
        )


def init_head(
    rng: RngStream,
    in_dim: int,
    embed_dim: int,
    n_classes: int,
    hidden_dim: int | None = None,
) -> HeadParams:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init; hidden_dim=None -> depth 1."""

    def layer(fan_in: int, fan_out: int) -> Affine:
        bound = 1.0 / np.sqrt(fan_in)
        return Affine(
            weight=rng.uniform(-bound, bound, (fan_out, fan_in)),
            bias=rng.uniform(-bound, bound, fan_out),
        )

    if hidden_dim is None:
        proj = [layer(in_dim, embed_dim)]
    else:
        proj = [layer(in_dim, hidden_dim), layer(hidden_dim, embed_dim)]
    return HeadParams(projection=proj, classifier=layer(embed_dim, n_classes))


def project(params: HeadParams, a: np.ndarray) -> np.ndarray:
    """Apply the projection head.  Accepts (d_a,) or a batch (n, d_a)."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape[-1] != params.in_dim:
        raise ValueError(f"expected input dim {params.in_dim}, got {a.shape[-1]}")
    h = a
    last = len(params.projection) - 1
    for i, layer in enumerate(params.projection):
        h = h @ layer.weight.T + layer.bias
        if i < last:
            h = np.maximum(h, 0.0)
    return h


def classify(params: HeadParams, z: np.ndarray) -> np.ndarray:
    """Affine map to logits; softmax lives in the loss, not here."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != params.embed_dim:
        raise ValueError(f"expected embedding dim {params.embed_dim}, got {z.shape[-1]}")
    return z @ params.classifier.weight.T + params.classifier.bias


def clip_norm(z: np.ndarray, bound: float) -> np.ndarray:
    """Rescale z onto the L2 ball of radius bound; direction preserved."""
    if bound <= 0:
        raise ValueError("clip bound must be positive")
    z = np.asarray(z, dtype=np.float64)
    norm = float(np.linalg.norm(z))
    if norm <= bound:
        return z.copy()
    return z * (bound / norm)


def sgd_step(params: HeadParams, grads: list[np.ndarray], cfg: OptimConfig) -> HeadParams:
    """v <- momentum*v + (g + wd*w); w <- w - lr*v, in place. Returns params."""
    arrays = params.param_arrays()
    if len(grads) != len(arrays):
        raise ValueError(f"expected {len(arrays)} gradient arrays, got {len(grads)}")
    for w, g, v in zip(arrays, grads, params.velocity):
        if g.shape != w.shape:
            raise ValueError(f"gradient shape {g.shape} does not match {w.shape}")
        if not np.all(np.isfinite(g)):
            raise DivergenceError("non-finite gradient")
        v *= cfg.momentum
        v += g + cfg.weight_decay * w
        w -= cfg.learning_rate * v
    return params


def param_count(params: HeadParams) -> int:
    """Total scalar parameters across projection and classifier."""
    return sum(a.size for a in params.param_arrays())
