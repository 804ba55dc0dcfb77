"""Dataset ingestion and synthesis.

Two file formats cover the handwriting-digit benchmarks: the big-endian IDX
binary format (native distribution of the 28x28 digit images) and plain
numeric CSV with an integer label column (carrier for the pen-stroke, postal
and font digit sets after a one-off conversion; see
``scripts/convert_datasets.py``).
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


class DataFormatError(ValueError):
    """A dataset file violates its declared format."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (one sample per column) with integer class labels."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str
    split: str

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        if self.features.shape[1] != self.labels.shape[0]:
            raise ValueError(
                f"{self.features.shape[1]} samples but {self.labels.shape[0]} labels"
            )
        if self.sample_count < 1:
            raise ValueError("dataset must contain at least one sample")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite values")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError(
                f"labels must lie in [0, {self.class_count}), "
                f"found range [{self.labels.min()}, {self.labels.max()}]"
            )
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def input_dim(self) -> int:
        return self.features.shape[0]

    @property
    def sample_count(self) -> int:
        return self.features.shape[1]


def _read_be_u32(buf: bytes, offset: int, path, what: str) -> int:
    if len(buf) < offset + 4:
        raise DataFormatError(
            f"{path}: truncated while reading {what} at byte offset {offset}"
        )
    return struct.unpack_from(">I", buf, offset)[0]


def idx_dimensions(path) -> tuple[int, ...]:
    """Header dimensions of an IDX file, e.g. (60000, 28, 28) for images."""
    buf = Path(path).read_bytes()
    magic = _read_be_u32(buf, 0, path, "magic")
    if magic == IDX_IMAGE_MAGIC:
        ndim = 3
    elif magic == IDX_LABEL_MAGIC:
        ndim = 1
    else:
        raise DataFormatError(
            f"{path}: bad magic 0x{magic:08x} at byte offset 0, "
            f"expected 0x{IDX_IMAGE_MAGIC:08x} (images) or 0x{IDX_LABEL_MAGIC:08x} (labels)"
        )
    return tuple(_read_be_u32(buf, 4 + 4 * i, path, f"dimension {i}") for i in range(ndim))


def load_idx(images_path, labels_path, name: str = "mnist", split: str = "train") -> Dataset:
    """Load an IDX image/label file pair.

    Pixels are flattened row-major to a d = rows*cols feature vector and
    scaled to [0, 1] by dividing by 255.
    """
    img_buf = Path(images_path).read_bytes()
    magic = _read_be_u32(img_buf, 0, images_path, "magic")
    if magic != IDX_IMAGE_MAGIC:
        raise DataFormatError(
            f"{images_path}: bad magic 0x{magic:08x} at byte offset 0, "
            f"expected 0x{IDX_IMAGE_MAGIC:08x}"
        )
    count = _read_be_u32(img_buf, 4, images_path, "image count")
    rows = _read_be_u32(img_buf, 8, images_path, "row count")
    cols = _read_be_u32(img_buf, 12, images_path, "column count")
    expected = 16 + count * rows * cols
    if len(img_buf) != expected:
        raise DataFormatError(
            f"{images_path}: payload ends at byte offset {len(img_buf)}, "
            f"expected {expected} for {count} images of {rows}x{cols}"
        )
    pixels = np.frombuffer(img_buf, dtype=np.uint8, offset=16)
    features = pixels.reshape(count, rows * cols).T.astype(np.float64) / 255.0

    lab_buf = Path(labels_path).read_bytes()
    magic = _read_be_u32(lab_buf, 0, labels_path, "magic")
    if magic != IDX_LABEL_MAGIC:
        raise DataFormatError(
            f"{labels_path}: bad magic 0x{magic:08x} at byte offset 0, "
            f"expected 0x{IDX_LABEL_MAGIC:08x}"
        )
    lab_count = _read_be_u32(lab_buf, 4, labels_path, "label count")
    if len(lab_buf) != 8 + lab_count:
        raise DataFormatError(
            f"{labels_path}: payload ends at byte offset {len(lab_buf)}, "
            f"expected {8 + lab_count} for {lab_count} labels"
        )
    if lab_count != count:
        raise DataFormatError(
            f"label count {lab_count} in {labels_path} does not match "
            f"image count {count} in {images_path}"
        )
    labels = np.frombuffer(lab_buf, dtype=np.uint8, offset=8).astype(np.int64)
    return Dataset(
        features=features,
        labels=labels,
        class_count=int(labels.max()) + 1,
        name=name,
        split=split,
    )


def load_csv(
    path,
    label_column: int = -1,
    has_header: bool = False,
    name: str | None = None,
    split: str = "train",
) -> Dataset:
    """Load a rectangular numeric CSV with one integer label column.

    Labels are remapped to the contiguous range [0, class_count) in sorted
    order of the distinct raw values.
    """
    rows: list[list[float]] = []
    raw_labels: list[int] = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for row_idx, row in enumerate(reader):
            if has_header and row_idx == 0:
                continue
            if not row:
                continue
            if width is None:
                width = len(row)
                lab_idx = label_column if label_column >= 0 else width + label_column
                if not 0 <= lab_idx < width:
                    raise DataFormatError(
                        f"{path}: label column {label_column} out of range for "
                        f"{width} columns"
                    )
            if len(row) != width:
                raise DataFormatError(
                    f"{path}: row {row_idx} has {len(row)} columns, expected {width}"
                )
            values = []
            for col_idx, cell in enumerate(row):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DataFormatError(
                        f"{path}: non-numeric cell at row {row_idx}, column {col_idx}: "
                        f"{cell!r}"
                    ) from None
            label = values.pop(lab_idx)
            if not float(label).is_integer():
                raise DataFormatError(
                    f"{path}: label at row {row_idx}, column {lab_idx} is not an "
                    f"integer: {label!r}"
                )
            raw_labels.append(int(label))
            rows.append(values)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")

    features = np.array(rows, dtype=np.float64).T
    classes = sorted(set(raw_labels))
    remap = {raw: i for i, raw in enumerate(classes)}
    labels = np.array([remap[r] for r in raw_labels], dtype=np.int64)
    return Dataset(
        features=features,
        labels=labels,
        class_count=len(classes),
        name=name or Path(path).stem,
        split=split,
    )


def save_csv(dataset: Dataset, path) -> None:
    """Write features plus a trailing label column, round-trip exact."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for i in range(dataset.sample_count):
            writer.writerow(
                [repr(float(v)) for v in dataset.features[:, i]] + [int(dataset.labels[i])]
            )


def one_hot(labels: np.ndarray, class_count: int) -> np.ndarray:
    """Class-indicator rows: 1 at the label's column, 0 elsewhere."""
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= class_count):
        raise ValueError(
            f"labels must lie in [0, {class_count}), found "
            f"[{labels.min()}, {labels.max()}]"
        )
    Y = np.zeros((labels.shape[0], class_count))
    Y[np.arange(labels.shape[0]), labels] = 1.0
    return Y


def normalize_minmax(dataset: Dataset, reference: Dataset | None = None) -> Dataset:
    """Affinely map each feature dimension to [0, 1].

    Statistics come from ``reference`` when given (normalize a test split
    with its training split's min/max, clamping to [0, 1]); otherwise from
    the dataset itself.  Dimensions that are constant in the statistics
    source map to 0.
    """
    source = reference.features if reference is not None else dataset.features
    lo = source.min(axis=1, keepdims=True)
    hi = source.max(axis=1, keepdims=True)
    span = hi - lo
    flat = (span == 0.0).ravel()
    span[flat.reshape(-1, 1)] = 1.0
    scaled = (dataset.features - lo) / span
    scaled[flat, :] = 0.0
    if reference is not None:
        np.clip(scaled, 0.0, 1.0, out=scaled)
    return Dataset(
        features=scaled,
        labels=dataset.labels.copy(),
        class_count=dataset.class_count,
        name=dataset.name,
        split=dataset.split,
    )


def synthetic_blobs(
    seed: int,
    n: int,
    d: int,
    class_count: int,
    spread: float,
    name: str = "blobs",
    split: str = "train",
) -> Dataset:
    """Gaussian clusters around unit-hypercube corners, one per class.

    Class k is centred on the corner whose j-th coordinate is bit j of k
    (classes beyond 2**d cycle through the corners).  Labels are assigned
    round-robin, so every class gets floor(n / class_count) or one more
    sample.  Deterministic per seed.
    """
    if class_count < 1 or n < class_count:
        raise ValueError(f"need n >= class_count >= 1, got n={n}, class_count={class_count}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if spread < 0:
        raise ValueError(f"spread must be >= 0, got {spread}")
    # low d bits of k pick the corner, so classes beyond 2**d wrap around
    corners = np.array(
        [[(k >> j) & 1 for j in range(d)] for k in range(class_count)],
        dtype=np.float64,
    )
    labels = np.arange(n, dtype=np.int64) % class_count
    rng = np.random.default_rng(seed)
    features = corners[labels].T.copy()
    if spread > 0:
        features += rng.normal(0.0, spread, size=(d, n))
    return Dataset(
        features=features,
        labels=labels,
        class_count=class_count,
        name=name,
        split=split,
    )
