"""Dataset ingestion and preprocessing: CSV parsing with one-hot encoding and
imputation, standardization, and correlation-based feature selection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd


class DataError(ValueError):
    pass


DEFAULT_LABEL_MAPPING = {"+": 1, "-": -1}


@dataclass
class Dataset:
    features: np.ndarray          # (m, n) float64
    labels: np.ndarray            # (m,) int, values in {-1, +1}
    feature_names: list[str]
    categorical_vocab: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.features)):
            raise DataError("non-finite feature values after ingestion")
        bad = set(np.unique(self.labels)) - {-1, 1}
        if bad:
            raise DataError(f"labels outside {{-1,+1}}: {sorted(bad)}")

    @property
    def m(self) -> int:
        return self.features.shape[0]


@dataclass
class ScalerParams:
    mu: np.ndarray
    sigma: np.ndarray


@dataclass
class FeatureSelection:
    selected: list[int]
    scores: np.ndarray
    threshold: float


def ingest_csv(path, label_column: str, label_mapping: dict | None = None,
               vocab: dict[str, list[str]] | None = None) -> Dataset:
    """Parse a CSV into a numeric Dataset.

    Categorical columns are one-hot encoded (vocabulary recorded, or aligned
    to a previously recorded one); missing numerics take the column median,
    missing categoricals the column mode.
    """
    mapping = DEFAULT_LABEL_MAPPING if label_mapping is None else label_mapping
    df = pd.read_csv(path)
    if df.empty:
        raise DataError(f"empty dataset file: {path}")
    if label_column not in df.columns:
        raise DataError(f"missing label column {label_column!r}")

    raw_labels = df[label_column]
    labels = np.empty(len(df), dtype=np.int64)
    for i, val in enumerate(raw_labels):
        key = val if val in mapping else str(val)
        if key not in mapping:
            raise DataError(f"unmapped label value {val!r} at row {i}")
        labels[i] = mapping[key]

    feats = df.drop(columns=[label_column])
    out_cols: list[np.ndarray] = []
    names: list[str] = []
    out_vocab: dict[str, list[str]] = {}
    for col in feats.columns:
        series = feats[col]
        if pd.api.types.is_numeric_dtype(series):
            vals = series.astype(float)
            if vals.isna().any():
                vals = vals.fillna(vals.median())
            out_cols.append(vals.to_numpy())
            names.append(col)
        else:
            series = series.astype("string")
            if series.isna().any():
                mode = series.mode(dropna=True)
                if mode.empty:
                    raise DataError(f"categorical column {col!r} has no values")
                series = series.fillna(mode.iloc[0])
            if vocab is not None and col in vocab:
                cats = vocab[col]
            else:
                cats = sorted(series.unique().tolist())
            out_vocab[col] = list(cats)
            for cat in cats:
                out_cols.append((series == cat).to_numpy().astype(float))
                names.append(f"{col}={cat}")
    if not out_cols:
        raise DataError("no feature columns found")
    X = np.column_stack(out_cols)
    return Dataset(X, labels, names, out_vocab)


def drop_constant_columns(ds: Dataset) -> Dataset:
    keep = [j for j in range(ds.features.shape[1]) if np.ptp(ds.features[:, j]) > 0]
    return Dataset(ds.features[:, keep], ds.labels,
                   [ds.feature_names[j] for j in keep], ds.categorical_vocab)


def fit_scaler(ds: Dataset) -> ScalerParams:
    if ds.m == 0:
        raise DataError("cannot fit scaler on empty dataset")
    mu = ds.features.mean(axis=0)
    sigma = ds.features.std(axis=0)  # population stddev
    if np.any(sigma <= 0):
        bad = [ds.feature_names[j] for j in np.where(sigma <= 0)[0]]
        raise DataError(f"zero-variance columns must be dropped before scaling: {bad}")
    return ScalerParams(mu, sigma)


def standardize(ds: Dataset, scaler: ScalerParams) -> Dataset:
    if np.any(scaler.sigma <= 0):
        raise DataError("scaler has non-positive sigma")
    X = (ds.features - scaler.mu) / scaler.sigma
    return Dataset(X, ds.labels, list(ds.feature_names), ds.categorical_vocab)


def select_features(ds: Dataset, threshold: float = 0.1) -> FeatureSelection:
    """Filter selection: keep |Pearson corr(feature, label)| >= threshold,
    falling back to the top-2 by score when fewer than 2 survive."""
    y = ds.labels.astype(float)
    yc = y - y.mean()
    y_norm = np.sqrt((yc**2).sum())
    scores = np.zeros(ds.features.shape[1])
    for j in range(ds.features.shape[1]):
        xc = ds.features[:, j] - ds.features[:, j].mean()
        denom = np.sqrt((xc**2).sum()) * y_norm
        scores[j] = abs(float(xc @ yc) / denom) if denom > 0 else 0.0
    selected = [j for j in range(len(scores)) if scores[j] >= threshold]
    if len(selected) < 2:
        selected = list(np.argsort(-scores)[: min(2, len(scores))])
    return FeatureSelection(sorted(int(j) for j in selected), scores, threshold)


def train_test_split(ds: Dataset, seed: int, test_ratio: float = 0.2) -> tuple[Dataset, Dataset]:
    if not 0 < test_ratio < 1:
        raise DataError("test_ratio must be in (0,1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.m)
    n_test = int(ds.m * test_ratio)
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    mk = lambda idx: Dataset(ds.features[idx], ds.labels[idx],
                             list(ds.feature_names), ds.categorical_vocab)
    return mk(train_idx), mk(test_idx)
