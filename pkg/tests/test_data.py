import gzip
import struct

import numpy as np
import pytest

from scsp.data import (
    Dataset,
    IdxFormatError,
    batches,
    load_dataset,
    load_mnist,
    parse_idx_images,
    parse_idx_labels,
    serialize_dataset,
    write_idx_images,
    write_idx_labels,
)


def image_bytes(n=1, rows=28, cols=28, fill=7):
    header = struct.pack(">IIII", 0x00000803, n, rows, cols)
    return header + bytes([fill]) * (n * rows * cols)


class TestParseImages:
    def test_single_image(self):
        arr = parse_idx_images(image_bytes())
        assert arr.shape == (1, 28, 28)
        assert arr.dtype == np.uint8
        assert np.all(arr == 7)

    def test_wrong_magic(self):
        bad = struct.pack(">IIII", 0x00000801, 1, 28, 28) + bytes(784)
        with pytest.raises(IdxFormatError):
            parse_idx_images(bad)

    def test_truncated_payload(self):
        with pytest.raises(IdxFormatError):
            parse_idx_images(image_bytes()[:-5])

    def test_trailing_garbage(self):
        with pytest.raises(IdxFormatError):
            parse_idx_images(image_bytes() + b"x")


class TestParseLabels:
    def test_values(self):
        raw = struct.pack(">II", 0x00000801, 3) + bytes([7, 0, 9])
        assert parse_idx_labels(raw).tolist() == [7, 0, 9]

    def test_out_of_range_label(self):
        raw = struct.pack(">II", 0x00000801, 1) + bytes([10])
        with pytest.raises(IdxFormatError):
            parse_idx_labels(raw)

    def test_empty_file_valid(self):
        raw = struct.pack(">II", 0x00000801, 0)
        assert parse_idx_labels(raw).shape == (0,)

    def test_wrong_magic(self):
        raw = struct.pack(">II", 0x00000803, 1) + bytes([1])
        with pytest.raises(IdxFormatError):
            parse_idx_labels(raw)


class TestRoundTrip:
    def test_serialize_reparse_bitwise(self):
        rng = np.random.default_rng(0)
        images = rng.integers(0, 256, size=(5, 28, 28)).astype(np.uint8)
        labels = rng.integers(0, 10, size=5).astype(np.uint8)
        ds = Dataset(images=images.astype(np.float64) / 255.0, labels=labels.astype(np.int64))
        img_bytes, lbl_bytes = serialize_dataset(ds)
        images2 = parse_idx_images(img_bytes)
        labels2 = parse_idx_labels(lbl_bytes)
        assert np.array_equal(images, images2)
        assert np.array_equal(labels, labels2)
        ds2 = Dataset(images=images2.astype(np.float64) / 255.0, labels=labels2.astype(np.int64))
        assert np.array_equal(ds.images, ds2.images)  # bitwise float equality

    def test_normalization_is_byte_over_255(self):
        images = np.array([[[0, 51, 255]]], dtype=np.uint8)
        raw = write_idx_images(images)
        ds = Dataset(
            images=parse_idx_images(raw).astype(np.float64) / 255.0,
            labels=np.zeros(1, dtype=np.int64),
        )
        assert ds.images[0, 0, 0] == 0.0
        assert ds.images[0, 0, 1] == 51 / 255
        assert ds.images[0, 0, 2] == 1.0

    def test_gzip_transparent(self, tmp_path):
        images = np.full((2, 28, 28), 9, dtype=np.uint8)
        labels = np.array([1, 2], dtype=np.uint8)
        (tmp_path / "imgs.gz").write_bytes(gzip.compress(write_idx_images(images)))
        (tmp_path / "lbls.gz").write_bytes(gzip.compress(write_idx_labels(labels)))
        ds = load_dataset(tmp_path / "imgs.gz", tmp_path / "lbls.gz")
        assert len(ds) == 2
        assert ds.labels.tolist() == [1, 2]


class TestBatches:
    def _dataset(self, n):
        rng = np.random.default_rng(0)
        return Dataset(
            images=rng.random((n, 28, 28)),
            labels=rng.integers(0, 10, n).astype(np.int64),
        )

    def test_batch_sizes(self):
        ds = self._dataset(10)
        sizes = [len(lbl) for _, lbl in batches(ds, 4, seed=0)]
        assert sizes == [4, 4, 2]

    def test_shuffle_off_preserves_order(self):
        ds = self._dataset(8)
        images, labels = next(iter(batches(ds, 8, seed=0, shuffle=False)))
        assert np.array_equal(labels, ds.labels)
        assert np.array_equal(images[..., 0], ds.images)

    def test_same_seed_epoch_identical(self):
        ds = self._dataset(32)
        a = [lbl.tolist() for _, lbl in batches(ds, 8, seed=3, epoch=2)]
        b = [lbl.tolist() for _, lbl in batches(ds, 8, seed=3, epoch=2)]
        assert a == b

    def test_different_epoch_different_order(self):
        ds = self._dataset(64)
        a = np.concatenate([lbl for _, lbl in batches(ds, 8, seed=3, epoch=1)])
        b = np.concatenate([lbl for _, lbl in batches(ds, 8, seed=3, epoch=2)])
        assert not np.array_equal(a, b)

    def test_union_covers_dataset_once(self):
        ds = self._dataset(23)
        seen = np.concatenate([lbl for _, lbl in batches(ds, 5, seed=1, epoch=4)])
        assert sorted(seen.tolist()) == sorted(ds.labels.tolist())

    def test_channel_axis_added(self):
        ds = self._dataset(4)
        images, _ = next(iter(batches(ds, 2, seed=0)))
        assert images.shape == (2, 28, 28, 1)

    def test_bad_batch_size(self):
        with pytest.raises(ValueError):
            list(batches(self._dataset(4), 0, seed=0))


class TestLoadMnist:
    def test_loads_standard_names(self, small_digits_dir):
        train = load_mnist(small_digits_dir, train=True)
        test = load_mnist(small_digits_dir, train=False)
        assert len(train) == 768
        assert len(test) == 384
        assert train.images.min() >= 0.0 and train.images.max() <= 1.0
        assert train.labels.min() >= 0 and train.labels.max() <= 9

    def test_take_subset(self, small_digits_dir):
        train = load_mnist(small_digits_dir, train=True)
        assert len(train.take(100)) == 100
        assert np.array_equal(train.take(100).images, train.images[:100])

    def test_missing_directory(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_mnist(tmp_path / "nope", train=True)


def test_dataset_length_mismatch_rejected():
    with pytest.raises(ValueError):
        Dataset(images=np.zeros((3, 28, 28)), labels=np.zeros(2, dtype=np.int64))
