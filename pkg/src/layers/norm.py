from src.core.constants import DEFAULT_EPS, DEFAULT_RHO
from src.layers.layer import Layer
from src.norms import (
    NormParams,
    RunningState,
    normalize_eval,
    normalize_train,
    update_running,
)


class Norm(Layer):
    """
    Normalization layer of any kind.

    BN and EBN keep running statistics, updated on every training forward
    pass and used in eval mode. LN, IN and GN have no running state and
    normalize with the statistics of whatever batch they are given.
    """

    def __init__(self, num_channels, kind, eps=DEFAULT_EPS, rho=DEFAULT_RHO, name="norm"):
        super().__init__(name)
        kind.check_channels(num_channels)
        self.kind = kind
        self.eps = eps
        self.params = NormParams.create(num_channels, prefix=name)
        self.state = (
            RunningState.initial(kind, num_channels, rho) if kind.has_running_stats else None
        )
        self.last_stats = None

    @property
    def num_channels(self):
        return self.params.num_channels

    def forward(self, x, tape=None):
        if self.training or self.state is None:
            y, cache = normalize_train(x, self.kind, self.params, self.eps, tape=tape)
            self.last_stats = cache.stats

            # Running statistics move only on training passes
            if self.training and self.state is not None:
                self.state = update_running(self.state, cache.stats)
            return y

        return normalize_eval(x, self.state, self.params)

    def parameters(self):
        return self.params.parameters()
