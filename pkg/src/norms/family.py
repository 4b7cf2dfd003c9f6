"""Batch, extended batch, layer, instance and group normalization.

Every kind normalizes x_i to (x_i - mu(S_i)) / sigma(S'_i) and applies a
per-channel affine. The kinds differ only in the coordinate sets S_i (mean)
and S'_i (std); they are realized here as reductions over axes of an NCHW
array, with GN reshaped to (N, G, C/G, H, W) first.
"""

import logging

import numpy as np

from src.core.constants import DEFAULT_EPS
from src.core.errors import RejectedInputError, UsageError
from src.core.tape import maybe_record
from src.core.tensor import Tensor4
from src.norms.kinds import BatchStats, NormCache, sample_counts
from src.utils.math_utils import lerp

logger = logging.getLogger(__name__)

# Reduction axes of the mean set and the std set for each kind
_AXES = {
    "bn": ((0, 2, 3), (0, 2, 3)),
    "ebn": ((0, 2, 3), (0, 1, 2, 3)),
    "ln": ((1, 2, 3), (1, 2, 3)),
    "in": ((2, 3), (2, 3)),
    "gn": ((2, 3, 4), (2, 3, 4)),
}


def _grouped(a, kind):
    """View of a in which every set is a reduction over `_AXES` axes"""
    return a.reshape(_grouped_shape(a.shape, kind))


def _set_reduce(a, kind, which):
    """Per-set mean of a, keepdims form (flatten it for the stats vector)"""
    axes = _AXES[kind.variant][0 if which == "mean" else 1]
    return _grouped(a, kind).mean(axis=axes, keepdims=True)


def _grouped_shape(shape, kind):
    if kind.variant != "gn":
        return shape
    n, c, h, w = shape
    return (n, kind.groups, c // kind.groups, h, w)


def _broadcast(reduced, kind, shape):
    return np.broadcast_to(reduced, _grouped_shape(shape, kind)).reshape(shape)


def _set_mean(a, kind, which):
    return _broadcast(_set_reduce(a, kind, which), kind, a.shape)


def _moments(x, kind, eps):
    if eps < 0:
        raise RejectedInputError(f"eps must be non-negative, got {eps}")
    kind.check_channels(x.shape[1])
    m, m_prime = sample_counts(kind, x.shape)

    mean = _set_reduce(x, kind, "mean")
    mean_full = _broadcast(mean, kind, x.shape)
    if kind.variant == "ebn" and kind.std_center == "global":
        center = np.broadcast_to(x.mean(), x.shape)
    else:
        center = mean_full

    var = _set_reduce((x - center) ** 2, kind, "std")
    std = np.sqrt(var + eps)
    stats = BatchStats(
        kind=kind,
        mean=mean.reshape(-1).copy(),
        std=std.reshape(-1).copy(),
        m=m,
        m_prime=m_prime,
        eps=eps,
    )
    return stats, mean_full, center, _broadcast(std, kind, x.shape)


def compute_stats(x, kind, eps=DEFAULT_EPS):
    """Mean over each S_i and std = sqrt(var(S'_i) + eps), biased variance"""
    stats, _, _, _ = _moments(x.data, kind, eps)
    return stats


def _affine_shape(values):
    return np.asarray(values).reshape(1, -1, 1, 1)


def normalize_train(x, kind, params, eps=DEFAULT_EPS, tape=None):
    """
    Training-mode forward pass using statistics of the batch itself.

    Returns (y, cache). With a tape the op is also recorded, with x, gamma
    and beta as its differentiable inputs.
    """
    if params.num_channels != x.shape[1]:
        raise RejectedInputError(
            f"affine parameters have {params.num_channels} channels, input has {x.shape[1]}"
        )

    stats, mean_full, center, std_full = _moments(x.data, kind, eps)
    x_hat = (x.data - mean_full) / std_full
    gamma = params.gamma.data.copy()
    y = Tensor4(_affine_shape(gamma) * x_hat + _affine_shape(params.beta.data))
    cache = NormCache(
        kind=kind,
        x_hat=x_hat,
        z=(x.data - center) / std_full,
        std_full=std_full,
        gamma=gamma,
        stats=stats,
    )

    def rule(grad):
        grad_x, grad_gamma, grad_beta = normalize_backward(grad, cache)
        return grad_x.data, grad_gamma, grad_beta

    maybe_record(tape, f"norm[{kind.variant}]", (x, params.gamma, params.beta), y, rule)
    return y, cache


def normalize_backward(grad_y, cache):
    """
    Exact gradients of the training-mode forward pass.

    With g = dL/dx_hat = gamma * grad_y, the mean set M and the std set S:

        dL/dx = (g - mean_M(g) - mean_S(g * x_hat) * z) / sigma

    where z = (x - c) / sigma and c is the centre the variance was taken
    around. For BN/LN/IN/GN (M = S) and EBN per-channel mode z = x_hat.
    """
    grad = grad_y.data if isinstance(grad_y, Tensor4) else np.asarray(grad_y, dtype=float)
    if grad.shape != cache.x_hat.shape:
        raise UsageError(
            f"gradient shape {grad.shape} does not match cached input {cache.x_hat.shape}"
        )

    kind = cache.kind
    g = grad * _affine_shape(cache.gamma)
    grad_x = (
        g
        - _set_mean(g, kind, "mean")
        - _set_mean(g * cache.x_hat, kind, "std") * cache.z
    ) / cache.std_full

    grad_gamma = (grad * cache.x_hat).sum(axis=(0, 2, 3))
    grad_beta = grad.sum(axis=(0, 2, 3))
    return Tensor4(grad_x), grad_gamma, grad_beta


def update_running(state, stats):
    """mu_r <- (1 - rho) mu_r + rho mu_b and the same for sigma (the std itself)"""
    if not stats.kind.has_running_stats:
        raise UsageError(f"{stats.kind.variant} keeps no running statistics")
    if (
        state.running_mean.shape != stats.mean.shape
        or state.running_std.shape != stats.std.shape
    ):
        raise UsageError(
            f"running state ({state.running_mean.shape}, {state.running_std.shape}) "
            f"does not match batch stats ({stats.mean.shape}, {stats.std.shape})"
        )

    rho = state.momentum
    return state.advanced(
        lerp(state.running_mean, stats.mean, rho),
        lerp(state.running_std, stats.std, rho),
    )


def normalize_eval(x, state, params):
    """y = gamma * (x - mu_r) / sigma_r + beta with frozen running statistics"""
    if state.count == 0:
        logger.warning(
            "evaluating with running statistics that were never updated "
            "(mu_r=0, sigma_r=1)"
        )
    if state.running_mean.shape[0] != x.shape[1] or params.num_channels != x.shape[1]:
        raise RejectedInputError(
            f"running state / params sized for {state.running_mean.shape[0]} channels, "
            f"input has {x.shape[1]}"
        )

    mean = _affine_shape(state.running_mean)
    std = _affine_shape(state.running_std)
    gamma = _affine_shape(params.gamma.data)
    beta = _affine_shape(params.beta.data)
    return Tensor4(gamma * (x.data - mean) / std + beta)
