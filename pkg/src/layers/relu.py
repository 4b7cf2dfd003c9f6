from src.core.ops import relu
from src.layers.layer import Layer


class ReLU(Layer):
    """Elementwise rectifier"""

    def forward(self, x, tape=None):
        return relu(x, tape=tape)
