import numpy as np

from src.core.errors import UsageError


def sgd_momentum_step(param, grad, velocity, lr, momentum, weight_decay=0.0):
    """
    One SGD step with heavy-ball momentum.

    v <- momentum * v + (g + weight_decay * p)
    p <- p - lr * v

    Returns the new (param, velocity); the inputs are not modified.
    """
    param = np.asarray(param, dtype=float)
    grad = np.asarray(grad, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    if not param.shape == grad.shape == velocity.shape:
        raise UsageError(
            f"shape mismatch: param {param.shape}, grad {grad.shape}, "
            f"velocity {velocity.shape}"
        )

    velocity = momentum * velocity + (grad + weight_decay * param)
    return param - lr * velocity, velocity


class SGD:
    """Momentum SGD over a fixed list of Parameters"""

    def __init__(self, params, lr, momentum=0.0, weight_decay=0.0):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = {id(p): np.zeros(p.shape) for p in self.params}

    def step(self, grads):
        """Apply one update from a gradient map produced by backward()"""
        for param in self.params:
            grad = grads.get(param)
            if grad is None:
                continue
            param.data, self.velocity[id(param)] = sgd_momentum_step(
                param.data,
                grad,
                self.velocity[id(param)],
                self.lr,
                self.momentum,
                self.weight_decay,
            )
