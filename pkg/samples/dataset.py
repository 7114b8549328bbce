# samples/dataset.py
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from utils.errors import DegenerateDataError, IngestionError, SchemaError
from utils.rng import make_rng

# --- CSV Configuration ---
DEFAULT_LABEL_COLUMN = "label"
CSV_FLOAT_FORMAT = "%.17g"


class SamplingScheme(str, Enum):
    """How the (feature, label) pairs were collected."""
    IID = "iid"
    SEPARATE = "separate"


@dataclass(frozen=True)
class LabeledDataset:
    """
    n feature vectors in R^D paired with binary labels.
    Arrays are stored read-only; use `with_labels` / `subset` to derive new datasets.
    """
    features: np.ndarray
    labels: np.ndarray
    scheme: SamplingScheme = SamplingScheme.SEPARATE

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64, copy=True)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        if features.ndim != 2:
            raise SchemaError(f"features must be a 2-D array, got shape {features.shape}")

        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise SchemaError(
                f"labels must be a vector of length {features.shape[0]}, got shape {labels.shape}"
            )
        if features.shape[0] < 1:
            raise SchemaError("a dataset needs at least one row")
        if not np.all(np.isin(labels, (0, 1))):
            bad = np.setdiff1d(np.unique(labels), [0, 1])
            raise SchemaError(f"labels must be 0 or 1, found {bad.tolist()}")
        if not np.all(np.isfinite(features)):
            row, col = np.argwhere(~np.isfinite(features))[0]
            raise IngestionError(
                f"non-finite feature at row {row}, column {col}", row=int(row), column=str(col)
            )

        labels = labels.astype(np.int8, copy=True)
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "scheme", SamplingScheme(self.scheme))

    # --- Shape and class counts ---
    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n1(self) -> int:
        return int(self.labels.sum())

    @property
    def n0(self) -> int:
        return self.n - self.n1

    @property
    def pi1_hat(self) -> float:
        """Empirical class probability n1 / n."""
        return self.n1 / self.n

    def group(self, label: int) -> np.ndarray:
        return self.features[self.labels == label]

    def require_both_classes(self):
        """Raises unless the dataset can be used to fit a test (n >= 2, both labels present)."""
        if self.n < 2 or self.n0 == 0 or self.n1 == 0:
            raise DegenerateDataError(
                f"need both classes present and n >= 2 (n0={self.n0}, n1={self.n1})"
            )

    # --- Derived datasets ---
    def with_labels(self, labels: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(self.features, labels, self.scheme)

    def subset(self, index: np.ndarray) -> "LabeledDataset":
        index = np.asarray(index)
        return LabeledDataset(self.features[index], self.labels[index], self.scheme)


def load_csv(path: Union[str, Path], label_column: str = DEFAULT_LABEL_COLUMN) -> LabeledDataset:
    """
    Reads a comma-separated UTF-8 file with a header row. Every column other than
    `label_column` is a numeric feature. Row order is preserved and the scheme is
    Separate, since the labels are fixed by the file.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Input file not found: {path}")

    frame = pd.read_csv(path, sep=",", encoding="utf-8", header=0, dtype=str, keep_default_na=False)
    if label_column not in frame.columns:
        raise SchemaError(f"label column '{label_column}' not found in {path} (columns: {list(frame.columns)})")
    feature_columns = [c for c in frame.columns if c != label_column]
    if not feature_columns:
        raise SchemaError(f"{path} has no feature columns")

    # Data rows are reported 0-based, not counting the header.
    raw_labels = frame[label_column].str.strip()
    labels = pd.to_numeric(raw_labels, errors="coerce")
    missing = labels.isna()
    if missing.any():
        row = int(np.flatnonzero(missing.to_numpy())[0])
        raise IngestionError(
            f"missing or non-numeric label at row {row}, column '{label_column}'",
            row=row, column=label_column,
        )
    if not labels.isin([0, 1]).all():
        row = int(np.flatnonzero(~labels.isin([0, 1]).to_numpy())[0])
        raise SchemaError(
            f"label at row {row} is {raw_labels.iloc[row]!r}; labels must be 0 or 1"
        )

    features = np.empty((len(frame), len(feature_columns)), dtype=np.float64)
    for j, column in enumerate(feature_columns):
        values = pd.to_numeric(frame[column].str.strip(), errors="coerce").to_numpy(dtype=np.float64)
        bad = ~np.isfinite(values)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise IngestionError(
                f"missing or non-finite value at row {row}, column '{column}'",
                row=row, column=column,
            )
        features[:, j] = values

    return LabeledDataset(features, labels.to_numpy().astype(np.int8), SamplingScheme.SEPARATE)


def write_csv(
    data: LabeledDataset,
    path: Union[str, Path],
    label_column: str = DEFAULT_LABEL_COLUMN,
    feature_names=None,
):
    """
    Writes the dataset so that `load_csv` reads it back with identical features.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if feature_names is None:
        feature_names = [f"x{j + 1}" for j in range(data.dim)]
    frame = pd.DataFrame(data.features, columns=list(feature_names))
    frame[label_column] = data.labels.astype(int)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, encoding="utf-8")


def shuffle_for_iid(data: LabeledDataset, seed: int) -> LabeledDataset:
    """
    Randomly orders the (feature, label) pairs so the rows become exchangeable,
    which links separate sampling to the i.i.d. scheme.
    """
    order = make_rng(seed, "shuffle").permutation(data.n)
    return data.subset(order)


def load_points(path: Union[str, Path], id_column: str = "point_id") -> np.ndarray:
    """
    Reads test points (or any unlabeled feature matrix) from a CSV with a header
    row. An `id_column`, if present, is dropped; every other column is a coordinate.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Points file not found: {path}")
    frame = pd.read_csv(path, sep=",", encoding="utf-8", header=0, dtype=str, keep_default_na=False)
    frame = frame.drop(columns=[c for c in (id_column, DEFAULT_LABEL_COLUMN) if c in frame.columns])
    if frame.shape[1] == 0:
        raise SchemaError(f"{path} has no coordinate columns")
    points = np.empty(frame.shape, dtype=np.float64)
    for j, column in enumerate(frame.columns):
        values = pd.to_numeric(frame[column].str.strip(), errors="coerce").to_numpy(dtype=np.float64)
        bad = ~np.isfinite(values)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise IngestionError(f"missing or non-finite value at row {row}, column '{column}'", row=row, column=column)
        points[:, j] = values
    return points


def write_points(points: np.ndarray, path: Union[str, Path], feature_names=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    points = np.atleast_2d(points)
    if feature_names is None:
        feature_names = [f"x{j + 1}" for j in range(points.shape[1])]
    frame = pd.DataFrame(points, columns=list(feature_names))
    frame.insert(0, "point_id", np.arange(len(frame)))
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, encoding="utf-8")
