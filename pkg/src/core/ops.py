"""Differentiable operators for a fully-connected classifier.

Every op takes an optional ``tape``; with a tape the op records a backward
rule, without one it only computes the forward value.
"""

import numpy as np

from src.core.errors import RejectedInputError
from src.core.tape import maybe_record
from src.core.tensor import Parameter, Tensor4


def _as_parameter(value, name):
    if isinstance(value, Parameter):
        return value
    return Parameter(name, value)


def linear_forward(x, weight, bias, tape=None):
    """y[n, o] = sum_c W[o, c] * x[n, c] + b[o] for an NC input"""
    weight = _as_parameter(weight, "weight")
    bias = _as_parameter(bias, "bias")
    if not x.is_nc:
        raise RejectedInputError(f"linear expects an NC input, got {x.shape}")
    if weight.data.ndim != 2 or bias.data.ndim != 1:
        raise RejectedInputError("weight must be 2-D (out x in) and bias 1-D (out)")
    out_features, in_features = weight.shape
    if x.shape[1] != in_features:
        raise RejectedInputError(
            f"input has {x.shape[1]} channels, weight expects {in_features}"
        )
    if bias.shape[0] != out_features:
        raise RejectedInputError(
            f"bias has {bias.shape[0]} entries, weight has {out_features} outputs"
        )

    rows = x.as_nc()
    w = weight.data
    y = Tensor4.from_nc(rows @ w.T + bias.data)

    def rule(grad):
        g = grad[:, :, 0, 0]
        grad_x = (g @ w)[:, :, None, None]
        return grad_x, g.T @ rows, g.sum(axis=0)

    return maybe_record(tape, "linear", (x, weight, bias), y, rule)


def relu(x, tape=None):
    """Elementwise max(0, x); the subgradient at 0 is 0 and NaN passes through"""
    mask = x.data > 0
    y = Tensor4(np.maximum(x.data, 0.0))

    def rule(grad):
        return (grad * mask,)

    return maybe_record(tape, "relu", (x,), y, rule)


def softmax_cross_entropy(logits, labels, tape=None):
    """Batch mean of -log softmax(logits)[label] as a (1, 1, 1, 1) tensor"""
    z = logits.as_nc()
    labels = np.asarray(labels)
    num_classes = z.shape[1]
    if labels.shape != (z.shape[0],):
        raise RejectedInputError(
            f"expected {z.shape[0]} labels, got array of shape {labels.shape}"
        )
    if not np.issubdtype(labels.dtype, np.integer):
        raise RejectedInputError(f"labels must be integers, got {labels.dtype}")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise RejectedInputError(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )

    # Shift by the row max for a stable log-sum-exp
    shifted = z - z.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(total)
    rows = np.arange(z.shape[0])
    loss = Tensor4.scalar(-log_probs[rows, labels].mean())

    def rule(grad):
        probs = exp / total
        probs[rows, labels] -= 1.0
        return ((probs * (grad.item() / z.shape[0]))[:, :, None, None],)

    return maybe_record(tape, "softmax_cross_entropy", (logits,), loss, rule)


def sum_all(x, tape=None):
    y = Tensor4.scalar(x.data.sum())

    def rule(grad):
        return (np.full(x.shape, grad.item()),)

    return maybe_record(tape, "sum", (x,), y, rule)


def mul(a, b, tape=None):
    """Elementwise product of two same-shape tensors"""
    if a.shape != b.shape:
        raise RejectedInputError(f"shape mismatch {a.shape} vs {b.shape}")
    y = Tensor4(a.data * b.data)

    def rule(grad):
        return grad * b.data, grad * a.data

    return maybe_record(tape, "mul", (a, b), y, rule)


def scale(x, factor, tape=None):
    y = Tensor4(x.data * factor)

    def rule(grad):
        return (grad * factor,)

    return maybe_record(tape, "scale", (x,), y, rule)


def weighted_sum(x, weights, tape=None):
    """sum(x * r) for a fixed array r; the usual scalar probe for gradient checks"""
    weights = np.asarray(weights, dtype=x.data.dtype)
    if weights.shape != x.shape:
        raise RejectedInputError(f"weights shape {weights.shape} != {x.shape}")
    y = Tensor4.scalar(float((x.data * weights).sum()))

    def rule(grad):
        return (weights * grad.item(),)

    return maybe_record(tape, "weighted_sum", (x,), y, rule)
