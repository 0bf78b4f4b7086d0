"""Load, clean, encode, scale and split tabular flow data.

Also provides a seeded synthetic two-cluster generator so the whole
attack/defence pipeline can run without any external dataset.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyDataset,
    EmptySplit,
    InvalidConfig,
    IoFailure,
    MissingLabelColumn,
    RaggedRow,
    ShapeMismatch,
)


@dataclass
class RawTable:
    """A parsed CSV: header names, rows of text cells, and the label column."""

    header: list[str]
    rows: list[list[str]]
    label_column: str

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def feature_columns(self) -> list[int]:
        return [i for i, name in enumerate(self.header) if name != self.label_column]

    def label_index(self) -> int:
        return self.header.index(self.label_column)


@dataclass
class ScalerParams:
    """Per-feature minimum and maximum observed on the fitting split."""

    minimum: np.ndarray
    maximum: np.ndarray

    @property
    def n_features(self) -> int:
        return self.minimum.shape[0]


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    scaler: ScalerParams | None = None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


@dataclass
class SplitSpec:
    train_fraction: float
    validation_fraction: float
    test_fraction: float
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_fraction, self.validation_fraction, self.test_fraction)
        for f in fracs:
            if not 0.0 < f < 1.0:
                raise EmptySplit(f"split fractions must lie in (0, 1), got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise InvalidConfig(f"split fractions must sum to 1, got {sum(fracs)!r}")


def load_csv(path, label_column: str = "Label") -> RawTable:
    """Read a comma-separated file with a header row; cells stay text.

    Header names are stripped of surrounding whitespace (flow exporters pad
    them inconsistently). Completely empty lines are ignored.
    """
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            reader = csv.reader(fh)
            header_row = next(reader, None)
            if header_row is None:
                raise IoFailure(f"{path}: file has no header row")
            header = [cell.strip() for cell in header_row]
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise RaggedRow(
                        f"{path}: line {lineno} has {len(row)} cells, header has {len(header)}"
                    )
                rows.append(row)
    except OSError as exc:
        raise IoFailure(f"could not read {path}: {exc}") from exc
    if label_column not in header:
        raise MissingLabelColumn(f"{path}: no column named {label_column!r} in header")
    return RawTable(header=header, rows=rows, label_column=label_column)


def _parse_columns(table: RawTable) -> np.ndarray:
    """Parse the feature cells to float64; unparseable cells become NaN."""
    n = table.n_rows
    feat_idx = table.feature_columns()
    out = np.empty((n, len(feat_idx)), dtype=np.float64)
    columns = list(zip(*table.rows)) if n else [() for _ in table.header]
    for j, col_i in enumerate(feat_idx):
        col = columns[col_i]
        try:
            out[:, j] = np.asarray(col, dtype=np.float64)
        except ValueError:
            vals = np.empty(n, dtype=np.float64)
            for i, cell in enumerate(col):
                try:
                    vals[i] = float(cell)
                except ValueError:
                    vals[i] = np.nan
            out[:, j] = vals
    return out


def clean(table: RawTable) -> RawTable:
    """Drop every row with a feature cell that is not a finite number.

    Empty cells, "NaN", "Infinity", "-Infinity" and non-numeric tokens all
    disqualify the row. Survivor order is preserved; cells remain text.
    """
    if table.n_rows == 0:
        raise EmptyDataset("table has no rows")
    values = _parse_columns(table)
    keep = np.isfinite(values).all(axis=1)
    if not keep.any():
        raise EmptyDataset("no rows survived cleaning")
    rows = [row for row, ok in zip(table.rows, keep) if ok]
    return RawTable(header=list(table.header), rows=rows, label_column=table.label_column)


def encode_labels(table: RawTable, benign_token: str = "BENIGN") -> np.ndarray:
    """0 where the label cell equals benign_token (case-insensitive, trimmed), else 1."""
    li = table.label_index()
    token = benign_token.strip().casefold()
    return np.array(
        [0 if row[li].strip().casefold() == token else 1 for row in table.rows],
        dtype=np.int64,
    )


def build_dataset(table: RawTable, benign_token: str = "BENIGN") -> Dataset:
    """Turn a cleaned table into an unscaled Dataset (features + binary labels)."""
    X = _parse_columns(table)
    if not np.isfinite(X).all():
        raise EmptyDataset("table contains non-finite feature cells; run clean() first")
    y = encode_labels(table, benign_token)
    names = [table.header[i] for i in table.feature_columns()]
    return Dataset(X=X, y=y, feature_names=names, scaler=None)


def scale_minmax(X: np.ndarray, params: ScalerParams | None = None) -> tuple[np.ndarray, ScalerParams]:
    """Min-max scale each feature into [0, 1].

    With params absent, fit per-feature min/max on X and transform; otherwise
    transform with the given params and clip into [0, 1]. Features whose
    fitted max equals their min map to 0.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D matrix, got shape {X.shape}")
    if params is None:
        params = ScalerParams(minimum=X.min(axis=0), maximum=X.max(axis=0))
    elif params.n_features != X.shape[1]:
        raise ShapeMismatch(
            f"scaler has {params.n_features} features, matrix has {X.shape[1]}"
        )
    span = params.maximum - params.minimum
    constant = span == 0
    safe_span = np.where(constant, 1.0, span)
    out = (X - params.minimum) / safe_span
    out[:, constant] = 0.0
    np.clip(out, 0.0, 1.0, out=out)
    return out, params


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded shuffle, then partition into train/validation/test by fraction."""
    n = dataset.n
    if n == 0:
        raise EmptyDataset("cannot split an empty dataset")
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(n)
    n_train = int(n * spec.train_fraction)
    n_val = int(n * spec.validation_fraction)
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise EmptySplit(
            f"{n} rows cannot fill fractions "
            f"({spec.train_fraction}, {spec.validation_fraction}, {spec.test_fraction})"
        )
    parts = (
        perm[:n_train],
        perm[n_train : n_train + n_val],
        perm[n_train + n_val :],
    )
    return tuple(
        Dataset(
            X=dataset.X[idx],
            y=dataset.y[idx],
            feature_names=list(dataset.feature_names),
            scaler=dataset.scaler,
        )
        for idx in parts
    )


def synth_generate(n_per_class: int, n_features: int, separation: float, seed: int) -> Dataset:
    """Two seeded Gaussian clusters, min-max scaled to [0, 1].

    Class 0 is centered at 0 and class 1 at ``separation`` in every feature,
    both with unit variance before scaling.
    """
    if n_per_class < 1:
        raise InvalidConfig("n_per_class must be at least 1")
    if n_features < 2:
        raise InvalidConfig("n_features must be at least 2")
    rng = np.random.default_rng(seed)
    x0 = rng.normal(0.0, 1.0, size=(n_per_class, n_features))
    x1 = rng.normal(float(separation), 1.0, size=(n_per_class, n_features))
    X = np.vstack([x0, x1])
    y = np.r_[np.zeros(n_per_class, dtype=np.int64), np.ones(n_per_class, dtype=np.int64)]
    X_scaled, scaler = scale_minmax(X)
    names = [f"f{j + 1}" for j in range(n_features)]
    return Dataset(X=X_scaled, y=y, feature_names=names, scaler=scaler)
