"""MNIST IDX loading and the seeded synthetic stand-in."""
from __future__ import annotations

import gzip
import os
import struct
from pathlib import Path

import numpy as np

from ..errors import BadMagic, CountMismatch, DataError, TruncatedFile
from .mlp import Dataset

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
DATA_ENV = "QNOPT_DATA_DIR"
TRAIN_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
TEST_FILES = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")
STROKE_WIDTH = 1.2
INK_GAIN = 1.8


def _read(path) -> bytes:
    path = Path(path)
    if not path.exists() and Path(str(path) + ".gz").exists():
        path = Path(str(path) + ".gz")
    opener = gzip.open if path.suffix == ".gz" else open
    try:
        with opener(path, "rb") as fh:
            return fh.read()
    except FileNotFoundError as exc:
        raise DataError(f"missing data file {path}") from exc


def _parse(raw: bytes, magic: int, ndims: int, what: str) -> tuple[tuple[int, ...], np.ndarray]:
    header = 4 + 4 * ndims
    if len(raw) < 4:
        raise TruncatedFile(f"{what}: header cut short")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise BadMagic(f"{what}: magic {found:#010x}, expected {magic:#010x}")
    if len(raw) < header:
        raise TruncatedFile(f"{what}: header cut short")
    dims = struct.unpack(f">{ndims}I", raw[4:header])
    count = int(np.prod(dims))
    if len(raw) < header + count:
        raise TruncatedFile(f"{what}: expected {count} bytes of payload, found {len(raw) - header}")
    return dims, np.frombuffer(raw, dtype=np.uint8, count=count, offset=header)


def read_idx_images(path) -> np.ndarray:
    dims, body = _parse(_read(path), IMAGES_MAGIC, 3, "images")
    return body.reshape(dims)


def read_idx_labels(path) -> np.ndarray:
    dims, body = _parse(_read(path), LABELS_MAGIC, 1, "labels")
    return body.reshape(dims)


def load_idx(images_path, labels_path) -> Dataset:
    """Images scaled by 1/255 and flattened to rows; labels as int64."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise CountMismatch(f"{len(images)} images but {len(labels)} labels")
    x = images.reshape(len(images), -1).astype(float) / 255.0
    return Dataset(x, labels.astype(np.int64), 10)


def write_idx_images(path, images: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">I", IMAGES_MAGIC) + struct.pack(">3I", *images.shape))
        fh.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">I", LABELS_MAGIC) + struct.pack(">I", len(labels)))
        fh.write(labels.tobytes())


def _segment_distance(yy, xx, p, q) -> np.ndarray:
    d = q - p
    t = np.clip(((yy - p[0]) * d[0] + (xx - p[1]) * d[1]) / max(float(d @ d), 1e-12), 0.0, 1.0)
    return np.hypot(yy - p[0] - t * d[0], xx - p[1] - t * d[1])


def synthetic_digits(n: int = 1000, seed: int = 0, n_classes: int = 10, size: int = 28) -> Dataset:
    """Stroke-drawn 28x28 "digits": three pen strokes per class, jittered per sample.

    Stroke width and ink gain are set so pixel statistics sit near MNIST's
    (mean ~0.14, std ~0.31, zero background, ~13% of pixels above 0.5).
    Class layouts come from a fixed generator so every seed shares the same
    classes; ``seed`` only drives the per-sample draws.
    """
    layout = np.random.default_rng(12345)
    strokes = layout.uniform(6, size - 6, size=(n_classes, 3, 2, 2))
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, n_classes, size=n)
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    images = np.empty((n, size, size))
    for i, c in enumerate(labels):
        offset = rng.normal(0.0, 1.5, size=2)
        ink = np.zeros((size, size))
        for p, q in strokes[c]:
            p = p + offset + rng.normal(0.0, 1.0, size=2)
            q = q + offset + rng.normal(0.0, 1.0, size=2)
            ink = np.maximum(ink, np.exp(-_segment_distance(yy, xx, p, q) ** 2 / (2 * STROKE_WIDTH**2)))
        img = INK_GAIN * rng.uniform(0.8, 1.0) * ink
        img += (img > 0.05) * rng.normal(0.0, 0.05, size=(size, size))
        images[i] = np.clip(img, 0.0, 1.0)
    images = np.round(images * 255.0) / 255.0
    return Dataset(images.reshape(n, -1), labels.astype(np.int64), n_classes)


def load_mnist(data_dir=None, split: str = "train", limit: int | None = None) -> Dataset:
    """Load MNIST from ``data_dir`` (or $QNOPT_DATA_DIR); raises DataError if absent."""
    data_dir = data_dir or os.environ.get(DATA_ENV)
    if not data_dir:
        raise DataError(f"no MNIST directory given (flag or ${DATA_ENV})")
    names = TRAIN_FILES if split == "train" else TEST_FILES
    data = load_idx(Path(data_dir) / names[0], Path(data_dir) / names[1])
    return data.subset(np.arange(min(limit, len(data)))) if limit else data
