import numpy as np

from src.core.ops import linear_forward
from src.core.tensor import Parameter
from src.layers.layer import Layer


class Linear(Layer):
    """Fully-connected layer with weights uniform in +-1/sqrt(fan_in)"""

    def __init__(self, in_features, out_features, rng, name="linear"):
        super().__init__(name)
        self.in_features = in_features
        self.out_features = out_features

        # Weights and bias share the fan-in bound
        bound = 1.0 / np.sqrt(in_features)
        self.weight = Parameter(
            f"{name}.weight", rng.uniform(-bound, bound, (out_features, in_features))
        )
        self.bias = Parameter(f"{name}.bias", rng.uniform(-bound, bound, out_features))

    @classmethod
    def from_arrays(cls, weight, bias, name="linear"):
        """Build a layer around existing weights (used by inference fusion)"""
        layer = cls.__new__(cls)
        Layer.__init__(layer, name)
        layer.out_features, layer.in_features = np.shape(weight)
        layer.weight = Parameter(f"{name}.weight", weight)
        layer.bias = Parameter(f"{name}.bias", bias)
        return layer

    def forward(self, x, tape=None):
        return linear_forward(x, self.weight, self.bias, tape=tape)

    def parameters(self):
        return [self.weight, self.bias]
