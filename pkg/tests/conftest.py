import struct

import numpy as np
import pytest

from src.core.config import make_config
from src.core.constants import IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC, MNIST_FILES
from src.data.mnist import load_mnist


def write_idx(path, magic, array):
    """Write a uint8 array as an IDX file, header byte by byte"""
    array = np.asarray(array, dtype=np.uint8)
    with open(path, "wb") as handle:
        handle.write(struct.pack(">I", magic))
        handle.write(struct.pack(f">{array.ndim}I", *array.shape))
        handle.write(array.tobytes())
    return path


def synthetic_digits(count, seed, size=28):
    """Ten noisy class templates; easy enough to learn in a few epochs"""
    templates = np.random.default_rng(1234).integers(0, 256, (10, size, size))
    rng = np.random.default_rng(seed)
    labels = np.arange(count) % 10
    rng.shuffle(labels)
    noise = rng.normal(0, 40, (count, size, size))
    images = np.clip(templates[labels] + noise, 0, 255).astype(np.uint8)
    return images, labels.astype(np.uint8)


@pytest.fixture(scope="session")
def mnist_dir(tmp_path_factory):
    """Directory with MNIST-named IDX files holding synthetic digits"""
    root = tmp_path_factory.mktemp("mnist")
    for split, count, seed in (("train", 120, 0), ("test", 60, 1)):
        images, labels = synthetic_digits(count, seed)
        images_name, labels_name = MNIST_FILES[split]
        write_idx(root / images_name, IDX_IMAGES_MAGIC, images)
        write_idx(root / labels_name, IDX_LABELS_MAGIC, labels)
    return root


@pytest.fixture(scope="session")
def mnist_data(mnist_dir):
    return load_mnist(mnist_dir)


@pytest.fixture
def small_config(mnist_dir, tmp_path):
    """Factory for a fast harness config on the synthetic data"""

    def factory(**overrides):
        options = dict(
            hidden_layers=2,
            hidden_units=16,
            groups=4,
            epochs=5,
            batch_size=16,
            test_batch_size=32,
            data_dir=mnist_dir,
            out=tmp_path / "metrics.csv",
        )
        options.update(overrides)
        return make_config(**options)

    return factory
