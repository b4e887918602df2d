"""Dataset loading, synthesis, normalization, and splitting.

Feature scaling into the model's grid range happens here, not in the
model: a network configured for [-1, 1] sees inputs in [-1, 1].  All
randomness flows through explicitly seeded generators.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

_ZSCORE_SPAN = 3.0  # grid range covers +/- this many standard deviations


@dataclass
class Dataset:
    features: np.ndarray      # (n, d) float64
    labels: np.ndarray        # (n,) ints in [0, class_count)
    class_count: int
    name: str = "dataset"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels).astype(np.intp)
        if self.features.ndim != 2:
            raise ValueError("features must be 2-D")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels length must match feature rows")
        if not np.all(np.isfinite(self.features)):
            raise ValueError(f"{self.name}: non-finite feature values")
        if self.n and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError(f"{self.name}: labels outside [0, {self.class_count})")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def take(self, indices: np.ndarray, name: str | None = None) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices],
                       self.class_count, name or self.name)


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.8
    val: float = 0.1
    test: float = 0.1
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train, self.val, self.test)
        if any(f <= 0 for f in fracs):
            raise ValueError("all split fractions must be positive")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {sum(fracs)}")


def _read_be32(fh) -> int:
    raw = fh.read(4)
    if len(raw) != 4:
        raise ValueError("truncated IDX file")
    return struct.unpack(">I", raw)[0]


def _map_unit_to_range(unit: np.ndarray, feature_range) -> np.ndarray:
    lo, hi = float(feature_range[0]), float(feature_range[1])
    if lo >= hi:
        raise ValueError("feature_range must be increasing")
    return lo + (hi - lo) * unit


def load_idx(images_path, labels_path, feature_range=(-1.0, 1.0),
             name: str = "idx") -> Dataset:
    """Load a big-endian IDX image/label pair into a flat float dataset.

    Pixels are scaled to [0, 1] and then mapped affinely onto
    ``feature_range``; images are flattened row-major.
    """
    with open(images_path, "rb") as fh:
        magic = _read_be32(fh)
        if magic != IDX_IMAGE_MAGIC:
            raise ValueError(f"bad image magic 0x{magic:08x} in {images_path}")
        count, rows, cols = _read_be32(fh), _read_be32(fh), _read_be32(fh)
        payload = fh.read()
    if len(payload) != count * rows * cols:
        raise ValueError(f"truncated image payload in {images_path}")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows * cols)

    with open(labels_path, "rb") as fh:
        magic = _read_be32(fh)
        if magic != IDX_LABEL_MAGIC:
            raise ValueError(f"bad label magic 0x{magic:08x} in {labels_path}")
        label_count = _read_be32(fh)
        label_payload = fh.read()
    if len(label_payload) != label_count:
        raise ValueError(f"truncated label payload in {labels_path}")
    if label_count != count:
        raise ValueError(f"image/label count mismatch: {count} vs {label_count}")

    labels = np.frombuffer(label_payload, dtype=np.uint8).astype(np.intp)
    features = _map_unit_to_range(pixels.astype(np.float64) / 255.0, feature_range)
    return Dataset(features, labels, class_count=int(labels.max()) + 1, name=name)


def load_csv(path, label_column: str, feature_range=(-1.0, 1.0),
             name: str | None = None) -> Dataset:
    """Load a rectangular numeric CSV with a header row.

    Features are z-scored (constant columns become zero), then scaled so
    three standard deviations span half of ``feature_range``.  Label
    values are assigned class ids in order of first appearance.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = list(reader)
    if label_column not in header:
        raise ValueError(f"{path}: no column named {label_column!r}")
    if not rows:
        raise ValueError(f"{path}: no data rows")
    label_idx = header.index(label_column)
    width = len(header)

    vocab: dict[str, int] = {}
    labels = np.empty(len(rows), dtype=np.intp)
    features = np.empty((len(rows), width - 1), dtype=np.float64)
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"{path}: ragged row {r + 2} "
                             f"({len(row)} cells, expected {width})")
        raw_label = row[label_idx].strip()
        if raw_label not in vocab:
            vocab[raw_label] = len(vocab)
        labels[r] = vocab[raw_label]
        cells = row[:label_idx] + row[label_idx + 1:]
        for c, cell in enumerate(cells):
            try:
                features[r, c] = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric feature cell {cell!r} at row {r + 2}"
                ) from None
    if len(vocab) < 2:
        raise ValueError(f"{path}: need at least two label classes")

    scaled = _zscore_into_range(features, feature_range)
    return Dataset(scaled, labels, class_count=len(vocab),
                   name=name or str(path))


def synth_classification(n: int = 500, dim: int = 20, classes: int = 3,
                         imbalance=(0.5, 0.3, 0.2), separation: float = 2.0,
                         seed: int = 0) -> Dataset:
    """Imbalanced Gaussian-cluster classification data.

    Class centers are random unit vectors scaled by ``separation``; samples
    add unit isotropic noise.  Class counts follow the prior proportions
    exactly (largest-remainder rounding), and rows are shuffled.
    """
    if n < classes:
        raise ValueError("need at least one sample per class")
    priors = np.asarray(imbalance, dtype=np.float64)
    if priors.shape != (classes,) or np.any(priors <= 0):
        raise ValueError(f"imbalance must be {classes} positive weights")
    priors = priors / priors.sum()

    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(classes, dim))
    centers *= separation / np.linalg.norm(centers, axis=1, keepdims=True)

    raw = priors * n
    counts = np.floor(raw).astype(int)
    remainder = n - counts.sum()
    for cls in np.argsort(raw - counts)[::-1][:remainder]:
        counts[cls] += 1

    labels = np.repeat(np.arange(classes), counts)
    features = centers[labels] + rng.normal(size=(n, dim))
    order = rng.permutation(n)
    return Dataset(features[order], labels[order], class_count=classes,
                   name=f"synthetic-{seed}")


def _zscore_into_range(features: np.ndarray, feature_range) -> np.ndarray:
    """Z-score columns (constant columns become exactly zero), then scale so
    three standard deviations span half the target range."""
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    constant = std < 1e-8
    z = (features - mean) / np.where(constant, 1.0, std)
    z[:, constant] = 0.0
    lo, hi = float(feature_range[0]), float(feature_range[1])
    if lo >= hi:
        raise ValueError("feature_range must be increasing")
    center, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return center + z * (half / _ZSCORE_SPAN)


def normalize_features(dataset: Dataset, feature_range=(-1.0, 1.0)) -> Dataset:
    """Z-score the features and scale them into ``feature_range``.

    Same convention as load_csv: three standard deviations reach the range
    ends, constant columns land on the range midpoint.
    """
    return Dataset(_zscore_into_range(dataset.features, feature_range),
                   dataset.labels, dataset.class_count, dataset.name)


def split(dataset: Dataset, spec: SplitSpec):
    """Shuffle once and cut into train/val/test parts.

    Raises if any part ends up empty or single-class (small or degenerate
    inputs should fail loudly rather than silently skew downstream fits).
    """
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(dataset.n)
    n_train = int(round(spec.train * dataset.n))
    n_val = int(round(spec.val * dataset.n))
    n_test = dataset.n - n_train - n_val
    sizes = {"train": n_train, "val": n_val, "test": n_test}
    if min(sizes.values()) < 1:
        raise ValueError(f"split produced an empty part: {sizes}")
    parts = []
    start = 0
    for part_name, size in sizes.items():
        idx = order[start:start + size]
        part = dataset.take(idx, name=f"{dataset.name}/{part_name}")
        if len(np.unique(part.labels)) < 2:
            raise ValueError(
                f"{part_name} split has fewer than 2 classes; "
                "use more data or different fractions"
            )
        parts.append(part)
        start += size
    return tuple(parts)
