"""Local training objective: cross-entropy plus a prototype regularizer,
with analytic gradients for the head parameters.

The default regularizer is contrastive: per sample, a softmax over
similarities between the clipped embedding and each global class
prototype, where the own-class prototype is the positive.  Similarity is
cosine, or negated L1/L2 distance, divided by a temperature.  The
alternative "l2_pull" regularizer (used by the prototype-exchange
baseline) is the mean squared distance to the own-class prototype.

Gradients flow through the embedding into the projection layers from both
terms; global prototypes and the backbone are constants.  Norm-clipping
participates in the graph with its scale factor treated as a constant
where the clip is active.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mathcore import ZeroVectorError, cosine_similarity, l1_distance, l2_distance
from .model import BackboneSpec, HeadParams, backbone_forward
from .prototype import PrototypeSet

MEASURES = ("l1", "l2", "cosine")
REGULARIZERS = ("contrastive", "l2_pull")


class MissingPrototypeError(ValueError):
    """The global prototype set lacks a class that a sample requires."""


@dataclass(frozen=True)
class LossConfig:
    contrast_weight: float = 4.0  # weight of the regularizer in the total loss
    temperature: float = 1.0
    measure: str = "cosine"

    def __post_init__(self):
        if self.contrast_weight < 0:
            raise ValueError("contrast_weight must be nonnegative")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.measure not in MEASURES:
            raise ValueError(f"measure must be one of {MEASURES}")


@dataclass(frozen=True)
class LossBreakdown:
    supervised: float
    contrastive: float
    total: float


def cross_entropy(logits: np.ndarray, y: int) -> float:
    """-log softmax(logits)[y], computed with max subtraction."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= y < logits.shape[0]:
        raise ValueError(f"class id {y} out of range for {logits.shape[0]} logits")
    m = logits.max()
    lse = m + np.log(np.exp(logits - m).sum())
    return float(lse - logits[y])


def similarity(a, b, measure: str) -> float:
    """Similarity score: cosine, or negated L1/L2 distance."""
    if measure == "cosine":
        return cosine_similarity(a, b)
    if measure == "l1":
        return -l1_distance(a, b)
    if measure == "l2":
        return -l2_distance(a, b)
    raise ValueError(f"measure must be one of {MEASURES}")


def contrastive_loss(
    z: np.ndarray, y: int, global_protos: PrototypeSet, cfg: LossConfig
) -> float:
    """-log( exp(s_y) / sum_j exp(s_j) ) over classes present in the globals."""
    if y not in global_protos:
        raise MissingPrototypeError(f"global prototypes lack class {y}")
    scores = np.array(
        [
            similarity(z, global_protos.vector(j), cfg.measure) / cfg.temperature
            for j in global_protos.classes
        ]
    )
    idx = global_protos.classes.index(int(y))
    m = scores.max()
    lse = m + np.log(np.exp(scores - m).sum())
    return float(lse - scores[idx])


def _forward(params: HeadParams, feats: np.ndarray, clip_bound: float):
    """Projection forward pass with norm clipping; keeps intermediates."""
    acts = [feats]
    pre = []
    h = feats
    last = len(params.projection) - 1
    for i, layer in enumerate(params.projection):
        zi = h @ layer.weight.T + layer.bias
        pre.append(zi)
        if i < last:
            h = np.maximum(zi, 0.0)
            acts.append(h)
    z_raw = pre[-1]
    norms = np.linalg.norm(z_raw, axis=1)
    scale = np.minimum(1.0, clip_bound / np.where(norms == 0.0, 1.0, norms))
    z = z_raw * scale[:, None]
    return acts, pre, z, scale


def batch_loss_and_grads(
    params: HeadParams,
    xs: np.ndarray,
    ys: np.ndarray,
    global_protos: PrototypeSet | None,
    cfg: LossConfig,
    backbone: BackboneSpec,
    clip_bound: float,
    regularizer: str = "contrastive",
) -> tuple[LossBreakdown, list[np.ndarray]]:
    """Mean per-sample loss over the batch and its analytic head gradients.

    Returns gradients in ``params.param_arrays()`` order.  The regularizer
    contributes only when global_protos is nonempty and contrast_weight is
    positive; otherwise the loss reduces to pure cross-entropy.
    """
    if regularizer not in REGULARIZERS:
        raise ValueError(f"regularizer must be one of {REGULARIZERS}")
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.int64)
    if xs.ndim != 2 or xs.shape[0] == 0:
        raise ValueError("batch must be a nonempty (n, d) array")
    if ys.shape != (xs.shape[0],):
        raise ValueError("labels must match the batch length")
    n = xs.shape[0]
    k = params.n_classes
    if np.any(ys < 0) or np.any(ys >= k):
        raise ValueError("class id out of range")

    feats = backbone_forward(backbone, xs)
    acts, pre, z, scale = _forward(params, feats, clip_bound)

    logits = z @ params.classifier.weight.T + params.classifier.bias
    m = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - m)
    probs = exp / exp.sum(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(exp.sum(axis=1))
    loss_s = float((lse - logits[np.arange(n), ys]).mean())

    dlogits = probs.copy()
    dlogits[np.arange(n), ys] -= 1.0
    dlogits /= n
    g_clf_w = dlogits.T @ z
    g_clf_b = dlogits.sum(axis=0)
    dz = dlogits @ params.classifier.weight

    lam = cfg.contrast_weight
    use_reg = (
        lam > 0.0 and global_protos is not None and len(global_protos) > 0
    )
    loss_r = 0.0
    if use_reg:
        present = global_protos.classes
        for y in np.unique(ys):
            if int(y) not in global_protos:
                raise MissingPrototypeError(f"global prototypes lack class {int(y)}")
        g_mat = global_protos.matrix()  # (C, d_b) ascending class order
        col = {j: i for i, j in enumerate(present)}
        y_idx = np.array([col[int(y)] for y in ys])
        if regularizer == "l2_pull":
            diff = z - g_mat[y_idx]
            loss_r = float((diff**2).sum(axis=1).mean())
            dz += (2.0 * lam / n) * diff
        else:
            loss_r, dz_reg = _contrastive_term(z, y_idx, g_mat, cfg)
            dz += lam * dz_reg

    # clip backprop: scale factor held constant where the clip is active
    dz_raw = dz * scale[:, None]

    grads: list[np.ndarray] = []
    g = dz_raw
    for i in range(len(params.projection) - 1, -1, -1):
        layer = params.projection[i]
        grads.append(g.sum(axis=0))  # bias
        grads.append(g.T @ acts[i])  # weight
        if i > 0:
            g = (g @ layer.weight) * (pre[i - 1] > 0.0)
    grads.reverse()
    grads.extend([g_clf_w, g_clf_b])

    total = loss_s + lam * loss_r if use_reg else loss_s
    return LossBreakdown(loss_s, loss_r, total), grads


def _contrastive_term(z, y_idx, g_mat, cfg: LossConfig):
    """Mean contrastive loss over the batch and its gradient w.r.t. z."""
    n = z.shape[0]
    t = cfg.temperature
    if cfg.measure == "cosine":
        zn = np.linalg.norm(z, axis=1)
        if np.any(zn == 0.0):
            raise ZeroVectorError("zero-norm embedding under the cosine measure")
        gn = np.linalg.norm(g_mat, axis=1)
        if np.any(gn == 0.0):
            raise ZeroVectorError("zero-norm global prototype under the cosine measure")
        u = z / zn[:, None]
        v = g_mat / gn[:, None]
        cos = u @ v.T
        scores = cos / t
    elif cfg.measure == "l2":
        diff = z[:, None, :] - g_mat[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        scores = -dist / t
    else:  # l1
        diff = z[:, None, :] - g_mat[None, :, :]
        scores = -np.abs(diff).sum(axis=2) / t

    m = scores.max(axis=1, keepdims=True)
    exp = np.exp(scores - m)
    p = exp / exp.sum(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(exp.sum(axis=1))
    loss = float((lse - scores[np.arange(n), y_idx]).mean())

    ds = p.copy()
    ds[np.arange(n), y_idx] -= 1.0
    ds /= n
    if cfg.measure == "cosine":
        coef = ds / t
        dz = (coef @ v - (coef * cos).sum(axis=1)[:, None] * u) / zn[:, None]
    elif cfg.measure == "l2":
        w = ds / np.where(dist == 0.0, 1.0, dist) / t
        dz = -(w[:, :, None] * diff).sum(axis=1)
    else:
        dz = -(ds[:, :, None] * np.sign(diff)).sum(axis=1) / t
    return loss, dz
