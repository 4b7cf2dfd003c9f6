import numpy as np

from src.core.constants import DTYPE
from src.core.errors import RejectedInputError


class Tensor4:
    """Immutable dense NCHW array of 64-bit floats"""

    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, requires_grad=False, name=None):
        """Wrap an array of rank 4; the buffer is copied and frozen"""
        array = np.array(data, dtype=DTYPE)
        if array.ndim != 4:
            raise RejectedInputError(f"expected a 4-D NCHW array, got shape {array.shape}")
        if min(array.shape) < 1:
            raise RejectedInputError(f"every dimension must be positive, got {array.shape}")

        array.setflags(write=False)
        self.data = array
        self.requires_grad = requires_grad
        self.name = name

    @classmethod
    def from_nc(cls, rows, requires_grad=False, name=None):
        """Build a (m_N, m_C, 1, 1) tensor from a 2-D batch of feature vectors"""
        array = np.asarray(rows, dtype=DTYPE)
        if array.ndim != 2:
            raise RejectedInputError(f"expected a 2-D NC array, got shape {array.shape}")
        return cls(array[:, :, None, None], requires_grad=requires_grad, name=name)

    @classmethod
    def scalar(cls, value, requires_grad=False, name=None):
        return cls(np.full((1, 1, 1, 1), value), requires_grad=requires_grad, name=name)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def is_nc(self):
        """True for fully-connected inputs where H = W = 1"""
        return self.data.shape[2] == 1 and self.data.shape[3] == 1

    def as_nc(self):
        """Read-only (m_N, m_C) view of an NC tensor"""
        if not self.is_nc:
            raise RejectedInputError(f"tensor of shape {self.shape} is not NC")
        return self.data[:, :, 0, 0]

    def item(self):
        if self.data.size != 1:
            raise RejectedInputError(f"item() needs a single element, shape is {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self):
        """Same values, no gradient requirement"""
        return Tensor4(self.data, name=self.name)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor4(shape={self.shape}{flag})"


class Parameter:
    """Named learnable array; the optimizer replaces its data between steps"""

    __slots__ = ("name", "data")

    def __init__(self, name, data):
        self.name = name
        self.data = np.array(data, dtype=DTYPE)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def requires_grad(self):
        return True

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def flatten_index(index, shape):
    """Row-major (N-major) flat offset of (i_N, i_C, i_H, i_W)"""
    for i, m in zip(index, shape):
        if not 0 <= i < m:
            raise RejectedInputError(f"index {tuple(index)} out of range for shape {shape}")
    return int(np.ravel_multi_index(tuple(index), shape))


def unflatten_index(offset, shape):
    """Inverse of flatten_index"""
    if not 0 <= offset < int(np.prod(shape)):
        raise RejectedInputError(f"offset {offset} out of range for shape {shape}")
    return tuple(int(i) for i in np.unravel_index(offset, shape))
