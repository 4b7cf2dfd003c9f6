class Layer:
    """Base class for all model layers (linear, norm, activation)"""

    def __init__(self, name):
        """Initialize the layer in training mode"""
        self.name = name
        self.training = True

    def forward(self, x, tape=None):
        """Compute the layer output (to be overridden by subclasses)"""
        raise NotImplementedError

    def __call__(self, x, tape=None):
        return self.forward(x, tape)

    def parameters(self):
        """Learnable Parameters owned by this layer"""
        return []

    def train(self):
        self.training = True

    def eval(self):
        self.training = False

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"
