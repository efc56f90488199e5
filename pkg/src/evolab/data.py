"""IDX image/label ingestion, deterministic batching, pixel corruption.

Files are the classic big-endian IDX containers (optionally gzipped; the
two-byte gzip signature is sniffed so either naming convention works).
Pixels are normalized to [0, 1] by dividing by 255.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import ConfigError, FormatError, InputError
from .nn.model import IMAGE_SIDE, N_CLASSES
from .nn.ops import corrupt_positions

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049

# canonical basenames inside a dataset directory (".gz" variants accepted)
TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"


@dataclass
class Dataset:
    """Images in [0,1] with integer labels and a split tag."""

    images: np.ndarray  # (M, 1, 28, 28) float64
    labels: np.ndarray  # (M,) intp
    split: str = "train"

    def __post_init__(self) -> None:
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.intp)
        if self.images.ndim != 4 or self.images.shape[1:] != (1, IMAGE_SIDE, IMAGE_SIDE):
            raise InputError(
                f"images must be (M, 1, {IMAGE_SIDE}, {IMAGE_SIDE}), got {self.images.shape}"
            )
        if self.labels.shape != (self.images.shape[0],):
            raise InputError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= N_CLASSES):
            raise InputError("labels must lie in 0..9")
        if self.split not in ("train", "test"):
            raise InputError(f"split must be 'train' or 'test', got {self.split!r}")

    @property
    def n(self) -> int:
        return self.images.shape[0]

    def take(self, indices: np.ndarray) -> "Dataset":
        """Subset by index array, preserving the split tag."""
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.images[idx], self.labels[idx], self.split)


@dataclass(frozen=True)
class BatchPlan:
    """How one epoch is cut into batches.

    ``seed`` drives the epoch permutation; ``occluded`` classes are removed
    before shuffling so no emitted batch ever contains them.
    """

    batch_size: int
    seed: object = 0
    occluded: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ConfigError(f"batch_size must be a positive integer, got {self.batch_size}")
        occ = frozenset(int(c) for c in self.occluded)
        if not occ <= set(range(N_CLASSES)):
            raise ConfigError(f"occluded classes must be within 0..9, got {sorted(occ)}")
        object.__setattr__(self, "occluded", occ)


def _read_bytes(path: str | Path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def _parse_idx(buf: bytes, path: str | Path, magic_wanted: int, ndim: int) -> np.ndarray:
    header = 4 * (1 + ndim)
    if len(buf) < header:
        raise FormatError(
            f"{path}: truncated header, {len(buf)} bytes < {header} at offset 0"
        )
    magic = struct.unpack(">I", buf[:4])[0]
    if magic != magic_wanted:
        raise FormatError(
            f"{path}: bad magic {magic} at offset 0, expected {magic_wanted}"
        )
    dims = struct.unpack(f">{ndim}I", buf[4:header])
    count = int(np.prod(dims))
    if len(buf) != header + count:
        raise FormatError(
            f"{path}: expected {count} data bytes ending at offset {header + count}, "
            f"file holds {len(buf)}"
        )
    data = np.frombuffer(buf, dtype=np.uint8, offset=header)
    return data.reshape(dims)


def load_idx(images_path: str | Path, labels_path: str | Path, split: str = "train") -> Dataset:
    """Parse an IDX image/label file pair into a normalized dataset.

    Both files may be gzip-compressed. Raises a format error naming the file
    and offset on a bad magic, a truncated body, or an image/label count
    mismatch.
    """
    imgs = _parse_idx(_read_bytes(images_path), images_path, IMAGE_MAGIC, 3)
    labels = _parse_idx(_read_bytes(labels_path), labels_path, LABEL_MAGIC, 1)
    if imgs.shape[1:] != (IMAGE_SIDE, IMAGE_SIDE):
        raise FormatError(
            f"{images_path}: images are {imgs.shape[1]}x{imgs.shape[2]}, "
            f"expected {IMAGE_SIDE}x{IMAGE_SIDE}"
        )
    if imgs.shape[0] != labels.shape[0]:
        raise FormatError(
            f"count mismatch: {images_path} holds {imgs.shape[0]} images, "
            f"{labels_path} holds {labels.shape[0]} labels"
        )
    images = imgs.astype(np.float64)[:, None, :, :] / 255.0
    return Dataset(images, labels.astype(np.intp), split)


def load_mnist_dir(root: str | Path) -> tuple[Dataset, Dataset]:
    """Load the four canonical files under ``root`` as (train, test)."""
    root = Path(root)

    def find(name: str) -> Path:
        for candidate in (root / name, root / (name + ".gz")):
            if candidate.exists():
                return candidate
        raise InputError(f"missing {name}[.gz] under {root}")

    train = load_idx(find(TRAIN_IMAGES), find(TRAIN_LABELS), split="train")
    test = load_idx(find(TEST_IMAGES), find(TEST_LABELS), split="test")
    return train, test


def filtered_indices(dataset: Dataset, occluded: frozenset[int]) -> np.ndarray:
    """Indices of samples whose label is not occluded, in dataset order."""
    if not occluded:
        return np.arange(dataset.n, dtype=np.intp)
    mask = ~np.isin(dataset.labels, sorted(occluded))
    return np.flatnonzero(mask)


def batches(dataset: Dataset, plan: BatchPlan) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield one epoch of (images, labels) batches.

    Occluded-class samples are dropped before the shuffle; the permutation
    is a pure function of ``plan.seed``; a final short batch is emitted when
    the filtered size is not a multiple of the batch size.
    """
    idx = filtered_indices(dataset, plan.occluded)
    if plan.batch_size > idx.size:
        raise InputError(
            f"batch size {plan.batch_size} exceeds the {idx.size} usable samples"
        )
    order = np.random.default_rng(plan.seed).permutation(idx.size)
    idx = idx[order]
    for lo in range(0, idx.size, plan.batch_size):
        sel = idx[lo : lo + plan.batch_size]
        yield dataset.images[sel], dataset.labels[sel]


def corrupt_images(images: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Zero exactly round(fraction * pixels-per-image) positions per image.

    Positions are drawn uniformly per image from the generator's stream; the
    input array is left untouched.
    """
    return corrupt_positions(np.asarray(images, dtype=np.float64), fraction, rng)
