import numpy as np

from src.core.constants import INPUT_FEATURES, NUM_CLASSES
from src.layers.linear import Linear
from src.layers.norm import Norm
from src.layers.relu import ReLU


class MLP:
    """Sequential stack of layers ending in class logits"""

    def __init__(self, layers, kind=None):
        self.layers = list(layers)
        self.kind = kind

    def forward(self, x, tape=None):
        for layer in self.layers:
            x = layer(x, tape)
        return x

    def __call__(self, x, tape=None):
        return self.forward(x, tape)

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def parameter_count(self):
        return sum(p.size for p in self.parameters())

    @property
    def norm_layers(self):
        return [layer for layer in self.layers if isinstance(layer, Norm)]

    def count_norm_layers(self):
        return len(self.norm_layers)

    def train(self):
        for layer in self.layers:
            layer.train()

    def eval(self):
        for layer in self.layers:
            layer.eval()


def build_model(config, in_features=INPUT_FEATURES, num_classes=NUM_CLASSES):
    """in -> [linear -> norm -> ReLU] x hidden_layers -> linear -> logits"""
    rng = np.random.default_rng(config.seed)
    kind = config.kind

    layers = []
    width = in_features
    for i in range(config.hidden_layers):
        layers.append(Linear(width, config.hidden_units, rng, name=f"fc{i}"))
        layers.append(
            Norm(config.hidden_units, kind, eps=config.eps, rho=config.rho, name=f"norm{i}")
        )
        layers.append(ReLU(f"relu{i}"))
        width = config.hidden_units
    layers.append(Linear(width, num_classes, rng, name="head"))

    return MLP(layers, kind=kind)
