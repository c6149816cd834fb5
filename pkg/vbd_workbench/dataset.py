"""
Loading, normalization, splitting and folding of labeled binary datasets.
"""

import gzip
import io
import logging
import struct
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from vbd_workbench.exceptions import DataFormatError, ValidationError
from vbd_workbench.utils import as_matrix, write_metadata_lines

logger = logging.getLogger("vbd-workbench.dataset")

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def _read_only(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class LabeledDataset:
    """
    Row-major feature matrix with binary labels (1 = positive, 0 = negative).

    Both arrays are copied and made read-only on construction.
    """

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = as_matrix(self.features, "features", allow_empty=True)
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise ValidationError(f"labels: expected a 1-D array, got shape {labels.shape}")
        if labels.shape[0] != features.shape[0]:
            raise ValidationError(
                f"labels: {labels.shape[0]} entries for {features.shape[0]} feature rows"
            )
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise ValidationError("labels: only 0 and 1 are allowed")

        object.__setattr__(self, "features", _read_only(features))
        object.__setattr__(self, "labels", _read_only(labels.astype(np.int64)))

    @property
    def feature_count(self) -> int:
        return int(self.features.shape[1])

    @property
    def instance_count(self) -> int:
        return int(self.features.shape[0])

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        """Rows at `indices`, in the given order."""
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features[indices], self.labels[indices])

    def class_counts(self) -> Tuple[int, int]:
        """(number of label-1 rows, number of label-0 rows)"""
        positives = int(self.labels.sum())
        return positives, self.instance_count - positives


@dataclass(frozen=True)
class BinarySplit:
    """Feature vectors of the minority and majority classes."""

    minority: np.ndarray
    majority: np.ndarray
    minority_label: int = 1

    @property
    def majority_label(self) -> int:
        return 1 - self.minority_label


@dataclass(frozen=True)
class NormalizationStats:
    """Per-feature minimum and maximum observed on the fitting set."""

    minimum: np.ndarray
    maximum: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "NormalizationStats":
        features = as_matrix(features, "fit_on")
        return cls(_read_only(features.min(axis=0)), _read_only(features.max(axis=0)))

    @property
    def constant(self) -> np.ndarray:
        """Boolean mask of features with max == min."""
        return self.maximum == self.minimum

    def apply(self, features: np.ndarray) -> np.ndarray:
        """Map features to [0, 1]; constant features map to 0, out-of-range values are clamped."""
        features = as_matrix(features, "apply_to", allow_empty=True)
        if features.shape[1] != self.minimum.shape[0]:
            raise ValidationError(
                f"dimension mismatch: stats fitted on {self.minimum.shape[0]} features, "
                f"data has {features.shape[1]}"
            )
        span = np.where(self.constant, 1.0, self.maximum - self.minimum)
        scaled = (features - self.minimum) / span
        scaled[:, self.constant] = 0.0
        return np.clip(scaled, 0.0, 1.0)

    def to_dict(self) -> dict:
        return {"minimum": self.minimum.tolist(), "maximum": self.maximum.tolist()}


@dataclass(frozen=True)
class FoldPlan:
    """Stratified assignment of every instance to one of `k` folds."""

    k: int
    assignments: np.ndarray = field(repr=False)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def folds(self) -> Iterator[Tuple[int, np.ndarray, np.ndarray]]:
        """Yield (fold, train_indices, test_indices) in fold order."""
        for fold in range(self.k):
            yield fold, self.train_indices(fold), self.test_indices(fold)


def _label_matches(raw: str, positive_label: Any) -> bool:
    if raw == str(positive_label).strip():
        return True
    try:
        return float(raw) == float(positive_label)
    except (TypeError, ValueError):
        return False


def _read_table(path: str, header: bool) -> Tuple[pd.DataFrame, Sequence[int]]:
    """
    Parse a CSV file into a frame of strings, skipping blank lines and whole-line '#' comments.

    Returns:
        (frame, 1-based file line number of each data row)
    """
    with open(path, "rb") as f:
        raw = f.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        line = raw.count(b"\n", 0, e.start) + 1
        raise DataFormatError(f"{path}: invalid UTF-8 at line {line} (byte offset {e.start})") from e

    kept = [(number, line) for number, line in enumerate(text.splitlines(), start=1)
            if line.strip() and not line.lstrip().startswith("#")]
    if not kept:
        raise DataFormatError(f"{path}: file is empty")

    try:
        frame = pd.read_csv(io.StringIO("\n".join(line for _, line in kept)), header=0 if header else None,
                            dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise DataFormatError(f"{path}: file is empty") from e
    except pd.errors.ParserError as e:
        raise DataFormatError(f"{path}: {e}") from e

    numbers = [number for number, _ in kept]
    return frame, numbers[1:] if header else numbers


def load_csv(path: str, label_column: Union[int, str], positive_label: Any,
             header: bool = False) -> LabeledDataset:
    """
    Load a labeled dataset from a UTF-8, comma-delimited CSV file.

    Whole lines starting with '#' are metadata comments and are skipped; '#' inside a cell is kept.

    Args:
        path: Path to the CSV file
        label_column: Column index, or header name when `header` is True
        positive_label: Raw label value mapped to class 1
        header: Whether the first row is a header row

    Returns:
        LabeledDataset with rows in file order
    """
    frame, line_numbers = _read_table(path, header)

    if frame.shape[0] == 0:
        raise DataFormatError(f"{path}: file contains no data rows")

    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if not header:
            raise ValidationError(f"label column '{label_column}' given by name but header=False")
        if label_column not in frame.columns:
            raise DataFormatError(f"{path}: missing label column '{label_column}'")
        label_position = list(frame.columns).index(label_column)
    else:
        label_position = int(label_column)
        if label_position < 0:
            label_position += frame.shape[1]
        if not 0 <= label_position < frame.shape[1]:
            raise DataFormatError(
                f"{path}: missing label column {label_column} (file has {frame.shape[1]} columns)"
            )

    raw_labels = frame.iloc[:, label_position].str.strip()
    distinct = sorted(raw_labels.unique())
    if len(distinct) != 2:
        raise DataFormatError(
            f"{path}: label column must hold exactly 2 distinct values, found {len(distinct)}: "
            f"{distinct[:5]}"
        )
    labels = np.array([1 if _label_matches(value, positive_label) else 0 for value in raw_labels])
    if labels.sum() == 0:
        raise ValidationError(f"positive label {positive_label!r} not found in {path} (values: {distinct})")

    cells = frame.drop(columns=frame.columns[label_position])
    try:
        features = cells.apply(lambda column: column.str.strip()).astype(np.float64).to_numpy()
    except ValueError:
        numeric = cells.apply(pd.to_numeric, errors="coerce")
        bad_rows, bad_cols = np.nonzero(numeric.isna().to_numpy())
        if bad_rows.size == 0:
            raise DataFormatError(f"{path}: feature columns are not all numeric")
        row, col = int(bad_rows[0]), int(bad_cols[0])
        source_col = col if col < label_position else col + 1
        line = line_numbers[row]
        raise DataFormatError(
            f"{path}: cannot parse {cells.iat[row, col]!r} as a number at line {line}, column {source_col}"
        )

    if not np.all(np.isfinite(features)):
        bad_rows, bad_cols = np.nonzero(~np.isfinite(features))
        raise DataFormatError(
            f"{path}: non-finite value at data row {int(bad_rows[0]) + 1}, feature {int(bad_cols[0])}"
        )

    dataset = LabeledDataset(features, labels)
    positives, negatives = dataset.class_counts()
    logger.info(f"Loaded {path}: n={dataset.instance_count}, d={dataset.feature_count}, "
                f"positives={positives}, negatives={negatives}")
    return dataset


def write_csv(dataset: LabeledDataset, path: str, header: bool = False,
              metadata: Optional[Mapping[str, Any]] = None) -> None:
    """
    Write a dataset as CSV with the label in the last column.

    Values are written with full round-trip precision. Metadata, if given, is
    written as leading '#' comment lines.
    """
    columns = [f"x{i}" for i in range(dataset.feature_count)] + ["label"]
    frame = pd.DataFrame(dataset.features, columns=columns[:-1])
    frame["label"] = dataset.labels
    with open(path, "w", encoding="utf-8", newline="") as f:
        write_metadata_lines(f, metadata)
        frame.to_csv(f, header=header, index=False, float_format="%.17g")
    logger.debug(f"Wrote {dataset.instance_count} rows to {path}")


def _open_idx(path: str):
    return gzip.open(path, "rb") if str(path).endswith(".gz") else open(path, "rb")


def _read_idx_header(handle, path: str, expected_magic: int, dims: int) -> Tuple[int, ...]:
    raw = handle.read(4 * (1 + dims))
    if len(raw) < 4 * (1 + dims):
        raise DataFormatError(f"{path}: truncated IDX header")
    magic, *shape = struct.unpack(f">{1 + dims}I", raw)
    if magic != expected_magic:
        raise DataFormatError(
            f"{path}: magic number mismatch (expected 0x{expected_magic:08x}, found 0x{magic:08x})"
        )
    return tuple(shape)


def load_idx(images_path: str, labels_path: str, limit: int, positive_class: int = 0) -> LabeledDataset:
    """
    Load MNIST-style IDX image and label files.

    Args:
        images_path: IDX3 image file (optionally gzip-compressed)
        labels_path: IDX1 label file (optionally gzip-compressed)
        limit: Maximum number of instances to read
        positive_class: Digit mapped to label 1; every other digit maps to 0

    Returns:
        LabeledDataset with pixels scaled to [0, 1]
    """
    if limit < 1:
        raise ValidationError(f"limit must be >= 1, got {limit}")

    with _open_idx(images_path) as f:
        count, rows, cols = _read_idx_header(f, images_path, IDX_IMAGES_MAGIC, 3)
        n = min(limit, count)
        payload = f.read(n * rows * cols)
    if len(payload) < n * rows * cols:
        raise DataFormatError(
            f"{images_path}: truncated payload ({len(payload)} of {n * rows * cols} bytes)"
        )

    with _open_idx(labels_path) as f:
        (label_count,) = _read_idx_header(f, labels_path, IDX_LABELS_MAGIC, 1)
        label_bytes = f.read(n)
    if label_count < n or len(label_bytes) < n:
        raise DataFormatError(f"{labels_path}: truncated payload ({len(label_bytes)} of {n} labels)")

    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(n, rows * cols).astype(np.float64) / 255.0
    digits = np.frombuffer(label_bytes, dtype=np.uint8)
    labels = (digits == positive_class).astype(np.int64)

    logger.info(f"Loaded {n} IDX images of {rows}x{cols} from {images_path}")
    return LabeledDataset(pixels, labels)


def fit_apply_minmax(fit_on: LabeledDataset,
                     apply_to: LabeledDataset) -> Tuple[NormalizationStats, LabeledDataset]:
    """
    Fit min-max statistics on one dataset and apply them to another.

    Returns:
        (stats, normalized copy of apply_to)
    """
    if fit_on.feature_count != apply_to.feature_count:
        raise ValidationError(
            f"dimension mismatch: fit_on has {fit_on.feature_count} features, "
            f"apply_to has {apply_to.feature_count}"
        )
    stats = NormalizationStats.fit(fit_on.features)
    if stats.constant.any():
        logger.warning(f"{int(stats.constant.sum())} constant feature(s) will be mapped to 0")
    return stats, LabeledDataset(stats.apply(apply_to.features), apply_to.labels)


def split_binary(data: LabeledDataset) -> BinarySplit:
    """
    Split a dataset into minority and majority classes by count.

    On equal counts the label-1 class is the minority.
    """
    positives = data.features[data.labels == 1]
    negatives = data.features[data.labels == 0]
    if positives.shape[0] == 0 or negatives.shape[0] == 0:
        raise ValidationError("split_binary requires both classes to be present")
    if positives.shape[0] <= negatives.shape[0]:
        return BinarySplit(_read_only(positives), _read_only(negatives), minority_label=1)
    return BinarySplit(_read_only(negatives), _read_only(positives), minority_label=0)


def centroid(instances: Any) -> np.ndarray:
    """Arithmetic per-feature mean of a non-empty list of vectors."""
    matrix = as_matrix(instances, "instances")
    return matrix.mean(axis=0)


def stratified_kfold(data: LabeledDataset, k: int, seed: int) -> FoldPlan:
    """
    Assign instances to k stratified folds.

    Each class is shuffled with the seeded generator and dealt round-robin;
    the deal continues across classes so overall fold sizes differ by at most one.
    """
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    positives, negatives = data.class_counts()
    if min(positives, negatives) < k:
        raise ValidationError(
            f"cannot build {k} stratified folds: class sizes are {positives} (label 1) "
            f"and {negatives} (label 0)"
        )

    rng = np.random.default_rng(seed)
    assignments = np.empty(data.instance_count, dtype=np.int64)
    offset = 0
    for label in (1, 0):
        members = rng.permutation(np.flatnonzero(data.labels == label))
        assignments[members] = (offset + np.arange(members.shape[0])) % k
        offset += members.shape[0]

    return FoldPlan(k, _read_only(assignments))
