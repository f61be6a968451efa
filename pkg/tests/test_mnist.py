import gzip
import os
import struct

import numpy as np
import pytest

from flhdc import mnist
from flhdc.mnist import (
    BadMagicError,
    DimensionMismatchError,
    TruncatedFileError,
    load_split,
    read_images,
    read_labels,
    write_idx,
)
from flhdc.scenario import load_mnist


def hand_written_idx(path, magic, dims, payload):
    # built with struct directly so the reader is checked against the raw format
    with open(path, "wb") as fh:
        fh.write(struct.pack(">I", magic))
        for n in dims:
            fh.write(struct.pack(">I", n))
        fh.write(bytes(payload))


def make_dir(tmp_path, n_train=6, n_test=4, rows=3, cols=2, gz=False):
    rng = np.random.default_rng(0)
    arrays = {
        mnist.TRAIN_IMAGES: rng.integers(0, 256, (n_train, rows, cols)),
        mnist.TRAIN_LABELS: rng.integers(0, 10, n_train),
        mnist.TEST_IMAGES: rng.integers(0, 256, (n_test, rows, cols)),
        mnist.TEST_LABELS: rng.integers(0, 10, n_test),
    }
    for name, arr in arrays.items():
        path = tmp_path / name
        write_idx(path, arr)
        if gz:
            data = path.read_bytes()
            path.unlink()
            (tmp_path / (name + ".gz")).write_bytes(gzip.compress(data))
    return arrays


def test_magic_constants():
    assert mnist.IMAGE_MAGIC == 0x00000803
    assert mnist.LABEL_MAGIC == 0x00000801


def test_read_hand_written_files(tmp_path):
    hand_written_idx(tmp_path / "img", 0x803, (2, 2, 3), range(12))
    hand_written_idx(tmp_path / "lab", 0x801, (2,), [5, 0])
    imgs = read_images(tmp_path / "img")
    assert imgs.shape == (2, 2, 3) and imgs.dtype == np.uint8
    assert imgs[1, 0].tolist() == [6, 7, 8]
    X, y = load_split(tmp_path / "img", tmp_path / "lab")
    assert X.shape == (2, 6) and y.tolist() == [5, 0]


@pytest.mark.parametrize("gz", [False, True])
def test_load_directory_round_trip(tmp_path, gz):
    arrays = make_dir(tmp_path, gz=gz)
    data = load_mnist(tmp_path)
    assert data.m == 6 and data.n_classes == 10
    np.testing.assert_array_equal(data.X_train, arrays[mnist.TRAIN_IMAGES].reshape(6, -1))
    np.testing.assert_array_equal(data.y_test, arrays[mnist.TEST_LABELS])


def test_bad_magic(tmp_path):
    hand_written_idx(tmp_path / "img", 0x801, (1, 1, 1), [0])
    with pytest.raises(BadMagicError):
        read_images(tmp_path / "img")
    hand_written_idx(tmp_path / "lab", 0x803, (1,), [0])
    with pytest.raises(BadMagicError):
        read_labels(tmp_path / "lab")


def test_truncated(tmp_path):
    hand_written_idx(tmp_path / "img", 0x803, (2, 2, 2), range(7))
    with pytest.raises(TruncatedFileError):
        read_images(tmp_path / "img")
    (tmp_path / "short").write_bytes(b"\x00\x00\x08")
    with pytest.raises(TruncatedFileError):
        read_labels(tmp_path / "short")


def test_dimension_mismatch(tmp_path):
    hand_written_idx(tmp_path / "img", 0x803, (3, 1, 1), range(3))
    hand_written_idx(tmp_path / "lab", 0x801, (2,), [1, 2])
    with pytest.raises(DimensionMismatchError):
        load_split(tmp_path / "img", tmp_path / "lab")
    hand_written_idx(tmp_path / "long", 0x801, (2,), [1, 2, 3])
    with pytest.raises(DimensionMismatchError):
        read_labels(tmp_path / "long")


def test_errors_are_distinct():
    kinds = {BadMagicError, TruncatedFileError, DimensionMismatchError}
    assert len(kinds) == 3
    assert all(issubclass(k, mnist.IDXError) for k in kinds)
    assert not issubclass(BadMagicError, TruncatedFileError)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_mnist(tmp_path)


@pytest.mark.skipif(not os.environ.get("FLHDC_MNIST_DIR"), reason="FLHDC_MNIST_DIR not set")
def test_canonical_mnist():
    data = load_mnist(os.environ["FLHDC_MNIST_DIR"])
    assert data.X_train.shape == (60000, 784) and data.X_test.shape == (10000, 784)
    assert int(data.y_train[0]) == 5
    assert data.X_train.max() <= 255
