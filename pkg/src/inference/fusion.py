import logging
from dataclasses import dataclass

import numpy as np

from src.core.errors import UnsupportedKindError, UsageError
from src.core.tensor import Tensor4
from src.layers.linear import Linear
from src.layers.norm import Norm

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FusedAffine:
    """Frozen normalization as y = scale_c * x + shift_c"""

    scale: np.ndarray
    shift: np.ndarray

    def apply(self, x):
        return Tensor4(
            self.scale.reshape(1, -1, 1, 1) * x.data + self.shift.reshape(1, -1, 1, 1)
        )


def fuse_norm(state, params, kind):
    """scale = gamma / sigma_r, shift = beta - gamma * mu_r / sigma_r"""
    if not kind.has_running_stats or state is None:
        raise UnsupportedKindError(
            f"{kind.variant} normalizes with batch statistics and cannot be fused"
        )

    gamma = params.gamma.data
    # sigma_r is one scalar for EBN and broadcasts over channels
    scale = np.broadcast_to(gamma / state.running_std, gamma.shape).copy()
    shift = params.beta.data - scale * state.running_mean
    return FusedAffine(scale=scale, shift=shift)


def fold_into_linear(weight, bias, fused):
    """Fold a norm that follows a linear layer into that layer's (W, b)"""
    weight = np.asarray(weight, dtype=float)
    bias = np.asarray(bias, dtype=float)
    if weight.shape[0] != fused.scale.shape[0] or bias.shape[0] != fused.scale.shape[0]:
        raise UsageError(
            f"fused affine has {fused.scale.shape[0]} channels, "
            f"linear layer has {weight.shape[0]} outputs"
        )
    return fused.scale[:, None] * weight, fused.scale * bias + fused.shift


def fuse_model(model):
    """
    Copy of an MLP with every linear -> norm pair folded into one linear layer.

    Only BN/EBN models can be fused; the result contains no norm layers.
    """
    layers = []
    pending = None
    for layer in model.layers:
        if isinstance(layer, Norm):
            if not isinstance(pending, Linear):
                raise UsageError(f"{layer.name} does not follow a linear layer")
            fused = fuse_norm(layer.state, layer.params, layer.kind)
            weight, bias = fold_into_linear(pending.weight.data, pending.bias.data, fused)
            layers[-1] = Linear.from_arrays(weight, bias, name=f"{pending.name}+{layer.name}")
            pending = None
            continue
        layers.append(layer)
        pending = layer

    fused_model = type(model)(layers, kind=model.kind)
    fused_model.eval()
    logger.info(
        "fused %d norm layers, %d remain",
        model.count_norm_layers(),
        fused_model.count_norm_layers(),
    )
    return fused_model
