import itertools

import numpy as np
import pytest

from src.core.errors import RejectedInputError
from src.core.tensor import Parameter, Tensor4, flatten_index, unflatten_index


class TestTensor4:
    def test_shape_and_size(self):
        x = Tensor4(np.zeros((2, 3, 4, 5)))
        assert x.shape == (2, 3, 4, 5)
        assert x.size == 2 * 3 * 4 * 5
        assert x.data.dtype == np.float64

    def test_nc_input_is_stored_as_n_c_1_1(self):
        x = Tensor4.from_nc([[1, 2, 3], [4, 5, 6]])
        assert x.shape == (2, 3, 1, 1)
        assert x.is_nc
        np.testing.assert_array_equal(x.as_nc(), [[1, 2, 3], [4, 5, 6]])

    def test_rejects_wrong_rank(self):
        with pytest.raises(RejectedInputError):
            Tensor4(np.zeros((2, 3)))

    def test_rejects_empty_dimension(self):
        with pytest.raises(RejectedInputError):
            Tensor4(np.zeros((0, 3, 1, 1)))

    def test_values_are_frozen(self):
        source = np.ones((1, 2, 1, 1))
        x = Tensor4(source)
        source[0, 0, 0, 0] = 5.0
        assert x.data[0, 0, 0, 0] == 1.0
        with pytest.raises(ValueError):
            x.data[0, 0, 0, 0] = 2.0

    def test_item_needs_single_element(self):
        assert Tensor4.scalar(2.5).item() == 2.5
        with pytest.raises(RejectedInputError):
            Tensor4(np.zeros((2, 1, 1, 1))).item()

    def test_parameter_copies_input(self):
        values = np.arange(3.0)
        p = Parameter("w", values)
        values[0] = 10.0
        assert p.data[0] == 0.0
        assert p.requires_grad


class TestFlatIndex:
    SHAPE = (2, 3, 4, 5)

    def test_round_trip_for_every_index(self):
        for index in itertools.product(*(range(d) for d in self.SHAPE)):
            assert unflatten_index(flatten_index(index, self.SHAPE), self.SHAPE) == index

    def test_layout_is_n_major(self):
        n, c, h, w = self.SHAPE
        assert flatten_index((1, 2, 3, 4), self.SHAPE) == ((1 * c + 2) * h + 3) * w + 4
        data = np.arange(np.prod(self.SHAPE)).reshape(self.SHAPE)
        assert data.reshape(-1)[flatten_index((1, 0, 2, 1), self.SHAPE)] == data[1, 0, 2, 1]

    def test_out_of_range(self):
        with pytest.raises(RejectedInputError):
            flatten_index((2, 0, 0, 0), self.SHAPE)
        with pytest.raises(RejectedInputError):
            unflatten_index(2 * 3 * 4 * 5, self.SHAPE)
