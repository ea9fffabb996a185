"""Datasets, CSV ingestion, seeded splitting and standardization.

All regression code in this package operates on standardized inputs and
targets (zero mean, unit standard deviation, statistics computed on the
training split only).  The :class:`Dataset` carries those statistics so
predictions and metrics can be restored to original units.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "load_csv",
    "split_standardize",
    "init_inducing",
    "synth1d_generate",
    "synth1d_f",
]


class CsvFormatError(ValueError):
    """Raised when an input CSV is ragged, non-numeric, or non-finite."""


@dataclass
class Dataset:
    """Inputs X (N x D), targets y (N,), plus de-scaling statistics.

    ``x_mean``/``x_std`` and ``y_mean``/``y_std`` describe the affine map
    from the stored (standardized) values back to original units.  For data
    constructed directly in model units, use the identity statistics.
    """

    X: np.ndarray
    y: np.ndarray
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.x_mean = np.asarray(self.x_mean, dtype=float).ravel()
        self.x_std = np.asarray(self.x_std, dtype=float).ravel()
        self.y_mean = float(self.y_mean)
        self.y_std = float(self.y_std)
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y row counts differ")
        if self.X.shape[0] < 1:
            raise ValueError("dataset needs at least one row")
        if not (np.all(self.x_std > 0) and self.y_std > 0):
            raise ValueError("standardization stds must be positive")

    @classmethod
    def raw(cls, X: np.ndarray, y: np.ndarray) -> "Dataset":
        """Wrap already-scaled data with identity statistics."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return cls(X, y, np.zeros(X.shape[1]), np.ones(X.shape[1]), 0.0, 1.0)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def input_dim(self) -> int:
        return self.X.shape[1]

    def y_original(self) -> np.ndarray:
        return self.y * self.y_std + self.y_mean


def load_csv(path) -> tuple[np.ndarray, list[str] | None]:
    """Read a rectangular numeric CSV (last column is the target).

    A first row that fails to parse as numbers is treated as a header and
    its names are returned.  Ragged rows and non-numeric or non-finite
    cells raise :class:`CsvFormatError` naming the offending row/column.
    """
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise CsvFormatError(f"{path}: empty file")

    header = None
    start = 0
    first = [c.strip() for c in lines[0].split(",")]
    try:
        [float(c) for c in first]
    except ValueError:
        header = first
        start = 1

    width = None
    for i, line in enumerate(lines[start:], start=start + 1):
        cells = [c.strip() for c in line.split(",")]
        if width is None:
            width = len(cells)
            if header is not None and len(header) != width:
                raise CsvFormatError(
                    f"{path}: header has {len(header)} fields, row {i} has {width}"
                )
        elif len(cells) != width:
            raise CsvFormatError(
                f"{path}: row {i} has {len(cells)} fields, expected {width}"
            )
        parsed = []
        for j, cell in enumerate(cells, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise CsvFormatError(
                    f"{path}: non-numeric cell at row {i}, column {j}: {cell!r}"
                ) from None
            if not math.isfinite(v):
                raise CsvFormatError(
                    f"{path}: non-finite cell at row {i}, column {j}: {cell!r}"
                )
            parsed.append(v)
        rows.append(parsed)

    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    values = np.asarray(rows, dtype=float)
    if values.shape[1] < 2:
        raise CsvFormatError(f"{path}: need at least one feature and one target column")
    return values, header


def _standardize_pair(X_tr, y_tr, X_te, y_te):
    """Standardize both splits with statistics from the training split."""
    x_mean = X_tr.mean(axis=0)
    x_std = X_tr.std(axis=0)
    const = x_std <= 0
    if np.any(const):
        warnings.warn(
            f"constant input column(s) {np.where(const)[0].tolist()}: std forced to 1"
        )
        x_std = np.where(const, 1.0, x_std)
    y_mean = float(y_tr.mean())
    y_std = float(y_tr.std())
    if y_std <= 0:
        warnings.warn("constant targets: y std forced to 1")
        y_std = 1.0

    def make(X, y):
        return Dataset((X - x_mean) / x_std, (y - y_mean) / y_std,
                       x_mean, x_std, y_mean, y_std)

    return make(X_tr, y_tr), make(X_te, y_te)


def split_standardize(
    raw: np.ndarray, fraction: float, seed: int, split_index: int = 0
) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, train/test split, and train-statistics standardization.

    The first ceil(fraction * N) shuffled rows become the training split.
    The same (seed, split_index) always yields the same indices.
    """
    raw = np.asarray(raw, dtype=float)
    n = raw.shape[0]
    if n < 5:
        raise ValueError("need at least 5 rows to split")
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    rng = np.random.default_rng([seed, split_index])
    perm = rng.permutation(n)
    n_train = int(math.ceil(fraction * n))
    tr, te = perm[:n_train], perm[n_train:]
    X, y = raw[:, :-1], raw[:, -1]
    return _standardize_pair(X[tr], y[tr], X[te], y[te])


def split_indices(n: int, fraction: float, seed: int, split_index: int = 0):
    """Train/test row indices for the shuffle used by split_standardize."""
    rng = np.random.default_rng([seed, split_index])
    perm = rng.permutation(n)
    n_train = int(math.ceil(fraction * n))
    return perm[:n_train], perm[n_train:]


def init_inducing(train: Dataset, m: int, seed: int) -> np.ndarray:
    """Copy M distinct seeded-random training rows into the inducing set Z."""
    n = train.n
    if m > n:
        warnings.warn(f"requested M={m} > N={n}; clamping to N")
        m = n
    rng = np.random.default_rng([seed, 0xA11CE])
    idx = rng.choice(n, size=m, replace=False)
    return train.X[idx].copy()


def synth1d_f(x: np.ndarray) -> np.ndarray:
    """Ground-truth curve for the 1-D synthetic benchmark."""
    return np.sin(3.0 * x) + 0.3 * np.cos(np.pi * x)


def synth1d_generate(
    seed: int,
    n_train: int = 120,
    noise_std: float = 0.3,
    n_test: int = 200,
) -> tuple[Dataset, Dataset]:
    """1-D benchmark: noisy draws of sin(3x) + 0.3 cos(pi x) observed only
    on [-5,-2] and [2,5], tested on a uniform grid spanning the gap.

    Both splits are standardized with training statistics, consistent with
    the benchmark protocol.
    """
    if n_train < 10:
        raise ValueError("n_train must be at least 10")
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 1.0, size=n_train)
    # two equal-length bands on either side of the gap
    x_tr = np.where(u < 0.5, -5.0 + 6.0 * u, 2.0 + 6.0 * (u - 0.5))
    y_tr = synth1d_f(x_tr) + noise_std * rng.standard_normal(n_train)
    x_te = np.linspace(-5.0, 5.0, n_test)
    y_te = synth1d_f(x_te) + noise_std * rng.standard_normal(n_test)
    return _standardize_pair(
        x_tr[:, None], y_tr, x_te[:, None], y_te
    )
