from dataclasses import dataclass, field, replace

import numpy as np

from src.core.constants import (
    DEFAULT_GROUPS,
    DEFAULT_RHO,
    NORM_KINDS,
    RUNNING_STAT_KINDS,
    STD_CENTER_MODES,
)
from src.core.errors import ConfigError, UsageError
from src.core.tensor import Parameter


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class NormKind:
    """Which normalization to apply, plus its sub-options"""

    variant: str
    groups: int = DEFAULT_GROUPS
    std_center: str = "per-channel"

    def __post_init__(self):
        variant = self.variant.lower()
        std_center = self.std_center.replace("_", "-").lower()
        if variant not in NORM_KINDS:
            raise ConfigError(f"unknown norm kind {self.variant!r}; choose from {NORM_KINDS}")
        if std_center not in STD_CENTER_MODES:
            raise ConfigError(
                f"unknown std centering {self.std_center!r}; choose from {STD_CENTER_MODES}"
            )
        if self.groups < 1:
            raise ConfigError(f"group count must be positive, got {self.groups}")
        object.__setattr__(self, "variant", variant)
        object.__setattr__(self, "std_center", std_center)

    @property
    def has_running_stats(self):
        return self.variant in RUNNING_STAT_KINDS

    def check_channels(self, num_channels):
        """Raise ConfigError when GN's group count does not divide m_C"""
        if self.variant == "gn" and num_channels % self.groups:
            raise ConfigError(
                f"group norm needs G to divide the channel count; "
                f"G={self.groups}, m_C={num_channels}"
            )

    def label(self):
        if self.variant == "gn":
            return f"gn(G={self.groups})"
        if self.variant == "ebn":
            return f"ebn({self.std_center})"
        return self.variant


def sample_counts(kind, shape):
    """Sizes (m, m') of the mean set S_i and the std set S'_i for an NCHW shape"""
    m_n, m_c, m_h, m_w = shape
    kind.check_channels(m_c)
    spatial = m_h * m_w
    if kind.variant == "bn":
        m = m_n * spatial
    elif kind.variant == "ln":
        m = m_c * spatial
    elif kind.variant == "in":
        m = spatial
    elif kind.variant == "gn":
        m = (m_c // kind.groups) * spatial
    else:
        return m_n * spatial, m_n * m_c * spatial
    return m, m


@dataclass
class NormParams:
    """Learnable per-channel affine (gamma, beta)"""

    gamma: Parameter
    beta: Parameter

    @classmethod
    def create(cls, num_channels, gamma=1.0, beta=0.0, prefix="norm"):
        return cls(
            gamma=Parameter(f"{prefix}.gamma", np.full(num_channels, gamma)),
            beta=Parameter(f"{prefix}.beta", np.full(num_channels, beta)),
        )

    @property
    def num_channels(self):
        return self.gamma.shape[0]

    def parameters(self):
        return [self.gamma, self.beta]


@dataclass(frozen=True)
class BatchStats:
    """
    Statistics of one batch.

    `mean` has one entry per mean set (m_C for BN/EBN, m_N for LN, m_N*m_C
    for IN, m_N*G for GN, in N-major order) and `std` one entry per std set,
    which for EBN is a single layer-wide value.
    """

    kind: NormKind
    mean: np.ndarray
    std: np.ndarray
    m: int
    m_prime: int
    eps: float


@dataclass(frozen=True)
class RunningState:
    """Moving averages of batch mean and std used at evaluation time"""

    running_mean: np.ndarray
    running_std: np.ndarray
    momentum: float = DEFAULT_RHO
    count: int = 0

    def __post_init__(self):
        if not 0.0 < self.momentum <= 1.0:
            raise ConfigError(f"running-stat momentum must lie in (0, 1], got {self.momentum}")
        object.__setattr__(self, "running_mean", _frozen(self.running_mean))
        object.__setattr__(self, "running_std", _frozen(self.running_std))

    @classmethod
    def initial(cls, kind, num_channels, momentum=DEFAULT_RHO):
        """mu_r = 0, sigma_r = 1, t = 0; the std is one scalar for EBN"""
        if not kind.has_running_stats:
            raise UsageError(f"{kind.variant} keeps no running statistics")
        std_size = 1 if kind.variant == "ebn" else num_channels
        return cls(np.zeros(num_channels), np.ones(std_size), momentum, 0)

    def advanced(self, mean, std):
        return replace(self, running_mean=mean, running_std=std, count=self.count + 1)


@dataclass
class NormCache:
    """What normalize_backward needs from the forward pass"""

    kind: NormKind
    x_hat: np.ndarray
    # (x - c) / sigma where c is the centre the std was computed around
    z: np.ndarray
    std_full: np.ndarray
    gamma: np.ndarray
    stats: BatchStats = field(repr=False)
