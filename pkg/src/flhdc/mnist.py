"""Reader for the IDX binary format used by the MNIST distribution."""

from __future__ import annotations

import gzip
import os
import struct

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"


class IDXError(ValueError):
    pass


class BadMagicError(IDXError):
    pass


class TruncatedFileError(IDXError):
    pass


class DimensionMismatchError(IDXError):
    pass


def _open(path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    return gzip.open(path, "rb") if head == b"\x1f\x8b" else open(path, "rb")


def _read(path, magic: int, ndim: int) -> np.ndarray:
    with _open(path) as fh:
        header = fh.read(4 + 4 * ndim)
        if len(header) < 4 + 4 * ndim:
            raise TruncatedFileError(f"{path}: header shorter than {4 + 4 * ndim} bytes")
        found, *dims = struct.unpack(f">{1 + ndim}I", header)
        if found != magic:
            raise BadMagicError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
        count = int(np.prod(dims))
        body = fh.read(count + 1)
    if len(body) < count:
        raise TruncatedFileError(f"{path}: {len(body)} of {count} data bytes present")
    if len(body) > count:
        raise DimensionMismatchError(f"{path}: trailing bytes beyond declared shape {dims}")
    return np.frombuffer(body, dtype=np.uint8).reshape(dims)


def read_images(path) -> np.ndarray:
    """(n, rows, cols) uint8 array."""
    return _read(path, IMAGE_MAGIC, 3)


def read_labels(path) -> np.ndarray:
    return _read(path, LABEL_MAGIC, 1)


def _find(directory, stem):
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx")):
        path = os.path.join(directory, name)
        if os.path.exists(path):
            return path
    raise FileNotFoundError(f"{stem} not found in {directory}")


def load_split(images_path, labels_path):
    images = read_images(images_path)
    labels = read_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise DimensionMismatchError(
            f"{images.shape[0]} images but {labels.shape[0]} labels")
    return images.reshape(images.shape[0], -1), labels.astype(np.intp)


def load_mnist(directory):
    """Return ``((X_train, y_train), (X_test, y_test))`` from a directory of IDX files.

    Plain or gzip-compressed files with the canonical names are accepted.
    """
    train = load_split(_find(directory, TRAIN_IMAGES), _find(directory, TRAIN_LABELS))
    test = load_split(_find(directory, TEST_IMAGES), _find(directory, TEST_LABELS))
    if train[0].shape[1] != test[0].shape[1]:
        raise DimensionMismatchError("train and test images differ in size")
    return train, test


def write_idx(path, array: np.ndarray) -> None:
    """Write a uint8 array as an IDX file (images: 3-D, labels: 1-D)."""
    array = np.asarray(array, dtype=np.uint8)
    magic = {1: LABEL_MAGIC, 3: IMAGE_MAGIC}[array.ndim]
    with open(path, "wb") as fh:
        fh.write(struct.pack(f">{1 + array.ndim}I", magic, *array.shape))
        fh.write(array.tobytes())
