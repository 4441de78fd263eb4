"""Dataset sources (IDX files or synthetic blobs) and the non-IID shard partition."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FormatError

LABELS_MAGIC = 0x00000801
IMAGES_MAGIC = 0x00000803


@dataclass
class Dataset:
    features: np.ndarray  # (n, d) float32
    labels: np.ndarray  # (n,) int64
    num_classes: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ConfigurationError("features must be (n, d) with one label per row")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ConfigurationError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self):
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[indices], self.labels[indices], self.num_classes)


def _read_header(buf, path, magic, ndims):
    need = 4 * (1 + ndims)
    if len(buf) < need:
        raise FormatError(f"{path}: truncated header")
    got = struct.unpack(">I", buf[:4])[0]
    if got != magic:
        raise FormatError(f"{path}: bad magic number 0x{got:08x}, expected 0x{magic:08x}")
    return struct.unpack(f">{ndims}I", buf[4:need]), need


def load_idx(images_path, labels_path, num_classes: int | None = None) -> Dataset:
    """Read an unsigned-byte IDX image/label pair, scaling pixels to [0, 1]."""
    img = Path(images_path).read_bytes()
    lab = Path(labels_path).read_bytes()
    (n_img, rows, cols), off_i = _read_header(img, images_path, IMAGES_MAGIC, 3)
    (n_lab,), off_l = _read_header(lab, labels_path, LABELS_MAGIC, 1)
    if n_img != n_lab:
        raise FormatError(f"count mismatch: {n_img} images vs {n_lab} labels")
    if len(img) - off_i != n_img * rows * cols:
        raise FormatError(f"{images_path}: truncated pixel payload")
    if len(lab) - off_l != n_lab:
        raise FormatError(f"{labels_path}: truncated label payload")
    pixels = np.frombuffer(img, dtype=np.uint8, offset=off_i).reshape(n_img, rows * cols)
    labels = np.frombuffer(lab, dtype=np.uint8, offset=off_l).astype(np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if n_lab else 1
    return Dataset(pixels.astype(np.float32) / 255.0, labels, num_classes)


def save_idx(images_path, labels_path, images: np.ndarray, labels) -> None:
    """Write ``images`` (n, rows, cols) uint8 and ``labels`` as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    Path(images_path).write_bytes(struct.pack(">4I", IMAGES_MAGIC, n, rows, cols) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">2I", LABELS_MAGIC, len(labels)) + labels.tobytes())


def blob_centers(num_classes: int, dim: int, center_seed: int = 0,
                 clusters_per_class: int = 1) -> np.ndarray:
    """Cluster centers, shape ``(num_classes, clusters_per_class, dim)``."""
    rng = np.random.default_rng(center_seed)
    return rng.normal(size=(num_classes, clusters_per_class, dim))


def synth_blobs(num_classes: int, samples_per_class: int, dim: int, spread: float,
                seed: int, center_seed: int = 0, clusters_per_class: int = 1) -> Dataset:
    """Isotropic Gaussian clusters, samples grouped by class.

    Class centers depend only on ``center_seed`` so train and test sets drawn
    with different ``seed`` values share one distribution.  With
    ``clusters_per_class > 1`` each class is a mixture, its samples split
    round-robin across the class's clusters.
    """
    if min(num_classes, samples_per_class, dim, clusters_per_class) < 1:
        raise ConfigurationError("class count, samples per class, dim and clusters must be >= 1")
    if not spread > 0:
        raise ConfigurationError("spread must be positive")
    centers = blob_centers(num_classes, dim, center_seed, clusters_per_class)
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(num_classes), samples_per_class)
    mode = np.tile(np.arange(samples_per_class) % clusters_per_class, num_classes)
    noise = rng.normal(scale=spread, size=(len(labels), dim))
    return Dataset(centers[labels, mode] + noise, labels, num_classes)


@dataclass
class Partition:
    device_indices: list[np.ndarray]
    shard_size: int

    def __len__(self):
        return len(self.device_indices)

    def sizes(self) -> list[int]:
        return [len(ix) for ix in self.device_indices]


def partition_noniid(dataset: Dataset, num_shards: int, shards_per_device: int,
                     num_devices: int, seed: int) -> Partition:
    """Sort by label, cut into equal contiguous shards, deal shards to devices.

    Samples beyond ``num_shards * shard_size`` are dropped.
    """
    if min(num_shards, shards_per_device, num_devices) < 1:
        raise ConfigurationError("shard and device counts must be >= 1")
    shard_size = len(dataset) // num_shards
    if shard_size < 1:
        raise ConfigurationError(f"{len(dataset)} samples cannot fill {num_shards} shards")
    if shards_per_device * num_devices > num_shards:
        raise ConfigurationError(
            f"{num_devices} devices x {shards_per_device} shards exceeds {num_shards} shards")
    order = np.argsort(dataset.labels, kind="stable")
    shards = order[:num_shards * shard_size].reshape(num_shards, shard_size)
    perm = np.random.default_rng(seed).permutation(num_shards)
    devices = [np.concatenate(shards[perm[d * shards_per_device:(d + 1) * shards_per_device]])
               for d in range(num_devices)]
    return Partition(devices, shard_size)
