import gzip
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.core.constants import (
    IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
    MNIST_FILES,
    TEST_SIZE,
    TRAIN_SIZE,
)
from src.core.errors import IngestionError, UsageError
from src.core.tensor import Tensor4

logger = logging.getLogger(__name__)

EXPECTED_SIZES = {"train": TRAIN_SIZE, "test": TEST_SIZE}


@dataclass(frozen=True)
class GlobalStandardization:
    """One scalar mean and std over all training pixels"""

    mean: float
    std: float

    def apply(self, pixels):
        return (pixels - self.mean) / self.std


@dataclass(frozen=True, eq=False)
class Dataset:
    """Flattened images (N, rows*cols) with integer labels"""

    pixels: np.ndarray
    labels: np.ndarray
    split: str
    standardization: GlobalStandardization

    def __len__(self):
        return self.labels.shape[0]

    @property
    def num_features(self):
        return self.pixels.shape[1]

    def as_tensor(self, indices=None):
        """(N, rows*cols, 1, 1) tensor of the selected examples"""
        rows = self.pixels if indices is None else self.pixels[indices]
        return Tensor4.from_nc(rows)


def _open(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx(path, expected_magic):
    """
    Parse an IDX file into a uint8 array.

    Layout: big-endian u32 magic (0x0000 08 ndim), ndim big-endian u32 sizes,
    then the raw bytes in row-major order.
    """
    try:
        with _open(path) as handle:
            raw = handle.read()
    except OSError as e:
        raise IngestionError(path, f"cannot read file ({e})") from e

    if len(raw) < 4:
        raise IngestionError(path, "truncated header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise IngestionError(
            path, f"bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )

    ndim = magic & 0xFF
    header_size = 4 + 4 * ndim
    if len(raw) < header_size:
        raise IngestionError(path, "truncated header")
    dims = struct.unpack(f">{ndim}I", raw[4:header_size])

    expected = int(np.prod(dims))
    payload = raw[header_size:]
    if len(payload) != expected:
        raise IngestionError(
            path, f"truncated file: expected {expected} data bytes, found {len(payload)}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def standardize_global(pixels, standardization=None, source="<pixels>"):
    """
    Subtract one scalar mean and divide by one scalar std.

    Without constants they are computed from `pixels` (the training split);
    the test split passes the training constants back in.
    """
    pixels = np.asarray(pixels, dtype=float)
    if standardization is None:
        # float rounding leaves a ~1e-18 std on constant data, so test the spread
        if pixels.size == 0 or np.ptp(pixels) == 0.0:
            raise IngestionError(source, "cannot standardize constant pixel values (std is 0)")
        standardization = GlobalStandardization(
            mean=float(pixels.mean()), std=float(pixels.std())
        )
    return standardization.apply(pixels), standardization


def load_mnist_idx(images_path, labels_path, split="train", standardization=None):
    """Read an image/label IDX pair, scale bytes to [0, 1] and standardize"""
    images = read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise IngestionError(
            labels_path,
            f"{labels.shape[0]} labels for {images.shape[0]} images in {images_path}",
        )

    pixels = images.reshape(images.shape[0], -1) / 255.0
    pixels, standardization = standardize_global(pixels, standardization, source=images_path)

    expected = EXPECTED_SIZES.get(split)
    if expected is not None and len(labels) != expected:
        logger.warning("%s split has %d examples (full MNIST has %d)", split, len(labels), expected)

    logger.info("loaded %d %s images from %s", len(labels), split, images_path)
    return Dataset(
        pixels=pixels,
        labels=labels.astype(np.int64),
        split=split,
        standardization=standardization,
    )


def _locate(data_dir, name):
    for candidate in (Path(data_dir) / name, Path(data_dir) / f"{name}.gz"):
        if candidate.exists():
            return candidate
    raise IngestionError(Path(data_dir) / name, "file not found (also tried .gz)")


def load_mnist(data_dir):
    """Train and test splits; the test split reuses the training constants"""
    train = load_mnist_idx(*(_locate(data_dir, n) for n in MNIST_FILES["train"]), split="train")
    test = load_mnist_idx(
        *(_locate(data_dir, n) for n in MNIST_FILES["test"]),
        split="test",
        standardization=train.standardization,
    )
    return train, test


@dataclass
class BatchIterator:
    """Seeded minibatch order; every epoch gets its own permutation"""

    seed: int
    batch_size: int
    drop_last: bool = False
    shuffle: bool = True
    epoch: int = field(default=0)

    def __post_init__(self):
        if self.batch_size < 1:
            raise UsageError(f"batch size must be at least 1, got {self.batch_size}")

    def order(self, size, epoch):
        if not self.shuffle:
            return np.arange(size)
        return np.random.default_rng((self.seed, epoch)).permutation(size)

    def num_batches(self, size):
        full, rest = divmod(size, self.batch_size)
        return full if self.drop_last or rest == 0 else full + 1


def batches(dataset, iterator):
    """Yield (Tensor4, labels) for one epoch and advance the iterator's epoch"""
    order = iterator.order(len(dataset), iterator.epoch)
    iterator.epoch += 1
    for start in range(0, len(order), iterator.batch_size):
        index = order[start : start + iterator.batch_size]
        if iterator.drop_last and len(index) < iterator.batch_size:
            break
        yield dataset.as_tensor(index), dataset.labels[index]
