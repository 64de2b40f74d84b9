"""MNIST-style IDX ingestion, normalization, and deterministic batching.

IDX container (big endian): u32 magic (0x00000803 images, 0x00000801 labels),
u32 dims, then the uint8 payload. Gzip-compressed files are accepted
transparently. Pixels normalize to [0, 1] as byte / 255 exactly.
"""

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"


class IdxFormatError(ValueError):
    """Bad magic, truncated payload, or out-of-range label in an IDX stream."""


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # (N, rows, cols) float64 in [0, 1]
    labels: np.ndarray  # (N,) int64 in [0, 10)

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.images.shape[0]} images vs {self.labels.shape[0]} labels"
            )

    def __len__(self):
        return self.images.shape[0]

    def take(self, n):
        """First n examples (the desk-scale subset)."""
        return Dataset(images=self.images[:n], labels=self.labels[:n])


def parse_idx_images(data):
    """Parse an images IDX byte stream to a (N, rows, cols) uint8 array."""
    if len(data) < 16:
        raise IdxFormatError(f"image header needs 16 bytes, stream has {len(data)}")
    magic, n, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IMAGE_MAGIC:
        raise IdxFormatError(f"bad image magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}")
    expected = n * rows * cols
    payload = data[16:]
    if len(payload) != expected:
        raise IdxFormatError(f"image payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(n, rows, cols).copy()


def parse_idx_labels(data):
    """Parse a labels IDX byte stream to a (N,) uint8 array with entries < 10."""
    if len(data) < 8:
        raise IdxFormatError(f"label header needs 8 bytes, stream has {len(data)}")
    magic, n = struct.unpack(">II", data[:8])
    if magic != LABEL_MAGIC:
        raise IdxFormatError(f"bad label magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}")
    payload = data[8:]
    if len(payload) != n:
        raise IdxFormatError(f"label payload is {len(payload)} bytes, expected {n}")
    labels = np.frombuffer(payload, dtype=np.uint8).copy()
    if labels.size and labels.max() > 9:
        raise IdxFormatError(f"label {labels.max()} out of range [0, 10)")
    return labels


def write_idx_images(images):
    """Inverse of parse_idx_images; images must be uint8 (N, rows, cols)."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    return struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols) + images.tobytes()


def write_idx_labels(labels):
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    return struct.pack(">II", LABEL_MAGIC, labels.shape[0]) + labels.tobytes()


def _read_maybe_gzip(path):
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def _resolve(directory, stem):
    for candidate in (Path(directory) / stem, Path(directory) / (stem + ".gz")):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"{stem}[.gz] not found under {directory}")


def load_dataset(images_path, labels_path):
    """Load one images/labels IDX pair into a normalized Dataset."""
    images = parse_idx_images(_read_maybe_gzip(images_path))
    labels = parse_idx_labels(_read_maybe_gzip(labels_path))
    return Dataset(
        images=images.astype(np.float64) / 255.0,
        labels=labels.astype(np.int64),
    )


def load_mnist(directory, train=True):
    """Load the train or test split from a directory holding the standard
    four IDX files (plain or .gz)."""
    if train:
        return load_dataset(_resolve(directory, TRAIN_IMAGES), _resolve(directory, TRAIN_LABELS))
    return load_dataset(_resolve(directory, TEST_IMAGES), _resolve(directory, TEST_LABELS))


def serialize_dataset(ds):
    """Dataset back to (images_bytes, labels_bytes); round-trips bitwise with
    load (pixels were byte / 255, so round(x * 255) recovers the byte)."""
    images = np.round(ds.images * 255.0).astype(np.uint8)
    return write_idx_images(images), write_idx_labels(ds.labels.astype(np.uint8))


def batches(ds, batch_size, seed, shuffle=True, epoch=0):
    """Yield (images, labels) batches covering the dataset exactly once.

    The permutation is a pure function of (seed, epoch); the trailing partial
    batch is kept. Images gain the channel axis expected by the network.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    n = len(ds)
    if shuffle:
        order = np.random.default_rng(np.random.SeedSequence([seed, epoch])).permutation(n)
    else:
        order = np.arange(n)
    for start in range(0, n, batch_size):
        idx = order[start : start + batch_size]
        yield ds.images[idx][..., None], ds.labels[idx]
