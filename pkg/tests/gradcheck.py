"""Central finite-difference gradient oracle with kink detection.

Independent of the analytic backward pass: gradients are measured by
re-evaluating the full loss at perturbed parameters.  A coordinate whose
perturbation flips any ReLU sign or clip indicator is flagged so callers
can exclude kink-adjacent coordinates from comparisons.
"""

import numpy as np

from fedph.model import backbone_forward
from fedph.objective import batch_loss_and_grads


def loss_value(params, xs, ys, protos, cfg, backbone, clip_bound, regularizer):
    breakdown, _ = batch_loss_and_grads(
        params, xs, ys, protos, cfg, backbone, clip_bound, regularizer=regularizer
    )
    return breakdown.total


def kink_signature(params, xs, backbone, clip_bound):
    """Boolean pattern of every ReLU sign and clip indicator in the head."""
    feats = backbone_forward(backbone, xs)
    sig = []
    h = feats
    last = len(params.projection) - 1
    for i, layer in enumerate(params.projection):
        pre = h @ layer.weight.T + layer.bias
        if i < last:
            sig.append((pre > 0.0).ravel())
            h = np.maximum(pre, 0.0)
        else:
            z_raw = pre
    sig.append(np.linalg.norm(z_raw, axis=1) > clip_bound)
    return np.concatenate(sig)


def finite_difference_grads(
    params, xs, ys, protos, cfg, backbone, clip_bound, regularizer="contrastive",
    step=1e-5,
):
    """Returns (fd_grads, kink_mask) lists matching params.param_arrays().

    kink_mask is True where the +/- step perturbation crossed a ReLU or
    clip kink, making the finite difference unreliable there.
    """
    base_sig = kink_signature(params, xs, backbone, clip_bound)
    fd_list, mask_list = [], []
    for arr in params.param_arrays():
        fd = np.zeros_like(arr)
        mask = np.zeros(arr.shape, dtype=bool)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = arr[idx]
            arr[idx] = orig + step
            lp = loss_value(params, xs, ys, protos, cfg, backbone, clip_bound, regularizer)
            sig_p = kink_signature(params, xs, backbone, clip_bound)
            arr[idx] = orig - step
            lm = loss_value(params, xs, ys, protos, cfg, backbone, clip_bound, regularizer)
            sig_m = kink_signature(params, xs, backbone, clip_bound)
            arr[idx] = orig
            fd[idx] = (lp - lm) / (2.0 * step)
            mask[idx] = not (
                np.array_equal(sig_p, base_sig) and np.array_equal(sig_m, base_sig)
            )
        fd_list.append(fd)
        mask_list.append(mask)
    return fd_list, mask_list


def max_relative_error(analytic, fd, masks) -> float:
    """Largest relative error over coordinates not adjacent to a kink."""
    worst = 0.0
    for a, f, m in zip(analytic, fd, masks):
        keep = ~m
        if not np.any(keep):
            continue
        denom = np.maximum(np.maximum(np.abs(a[keep]), np.abs(f[keep])), 1e-8)
        worst = max(worst, float((np.abs(a[keep] - f[keep]) / denom).max()))
    return worst
