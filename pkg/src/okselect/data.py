"""Dataset ingestion, preprocessing and stream ordering.

Datasets are dense and immutable once built. ``preprocess`` rescales every
feature to [-1, 1] and labels to {-1, +1} (classification) or [0, 1]
(regression) using statistics of the whole dataset.
"""

from __future__ import annotations

import enum
import io
import math
import os
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, InvalidTaskError, ParseError
from .kernels import gaussian_cross


class Task(str, enum.Enum):
    CLASSIFICATION = "cls"
    REGRESSION = "reg"

    @classmethod
    def parse(cls, value) -> "Task":
        if isinstance(value, Task):
            return value
        aliases = {"cls": cls.CLASSIFICATION, "classification": cls.CLASSIFICATION,
                   "reg": cls.REGRESSION, "regression": cls.REGRESSION}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise InvalidInputError(f"unknown task {value!r}") from None


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    task: Task | None
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(self.features, dtype=np.float64)
        y = np.ascontiguousarray(self.labels, dtype=np.float64)
        if X.ndim != 2:
            raise InvalidInputError(f"features must be a matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise InvalidInputError(f"{y.shape[0]} labels for {X.shape[0]} rows")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def T(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.T

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.task == other.task
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels))

    def take(self, order, limit: int | None = None) -> "Dataset":
        idx = np.asarray(getattr(order, "permutation", order))
        if limit is not None:
            idx = idx[:limit]
        return Dataset(self.name, self.task, self.features[idx], self.labels[idx])


@dataclass(frozen=True, eq=False)
class StreamOrder:
    permutation: np.ndarray
    seed: int | None

    def __len__(self):
        return self.permutation.shape[0]


# -- parsing -----------------------------------------------------------------

def _text(data) -> str:
    if isinstance(data, (bytes, bytearray)):
        return data.decode("utf-8")
    return str(data)


def parse_libsvm(data, name: str = "libsvm") -> Dataset:
    """Parse ``label idx:val ...`` lines (1-based indices) into a dense dataset.

    Absent indices are 0; the dimension is the largest index seen. A repeated
    index on one line keeps the last value and emits a warning.
    """
    rows, labels = [], []
    d = 0
    for lineno, line in enumerate(io.StringIO(_text(data)), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise ParseError(f"bad label {tokens[0]!r}", lineno, 1) from None
        entries = {}
        for col, tok in enumerate(tokens[1:], start=2):
            idx_s, sep, val_s = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise ParseError(f"malformed feature token {tok!r}", lineno, col) from None
            if idx < 1:
                raise ParseError(f"feature index must be >= 1, got {idx}", lineno, col)
            if idx in entries:
                warnings.warn(f"line {lineno}: duplicate feature index {idx}; keeping the last value",
                              stacklevel=2)
            entries[idx] = val
            d = max(d, idx)
        rows.append(entries)
        labels.append(label)
    if not rows:
        raise ParseError("no data rows")
    X = np.zeros((len(rows), d))
    for i, entries in enumerate(rows):
        for idx, val in entries.items():
            X[i, idx - 1] = val
    return Dataset(name, None, X, np.array(labels))


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def parse_csv(data, label_column: int = -1, name: str = "csv", label_map: dict | None = None) -> Dataset:
    """Parse a rectangular numeric CSV; every column but ``label_column`` is a feature.

    A first row containing any non-numeric cell is taken as a header.
    ``label_map`` translates non-numeric label cells (e.g. ``{"g": 1, "h": -1}``).
    """
    lines = [ln for ln in _text(data).splitlines() if ln.strip()]
    if not lines:
        raise ParseError("no data rows")
    table = [[c.strip() for c in ln.split(",")] for ln in lines]
    start = 0
    first = table[0]
    label_idx = label_column if label_column >= 0 else len(first) + label_column
    if any(not _is_number(c) for j, c in enumerate(first)
           if not (label_map and j == label_idx and c in label_map)):
        start = 1
    width = len(first)
    if width < 2:
        raise InvalidInputError("CSV needs at least one feature column besides the label")
    if not 0 <= label_idx < width:
        raise InvalidInputError(f"label column {label_column} out of range for {width} columns")
    body = table[start:]
    if not body:
        raise ParseError("no data rows after header")
    X = np.empty((len(body), width - 1))
    y = np.empty(len(body))
    for i, row in enumerate(body):
        lineno = i + start + 1
        if len(row) != width:
            raise ParseError(f"expected {width} cells, found {len(row)}", lineno)
        k = 0
        for j, cell in enumerate(row):
            if j == label_idx and label_map and cell in label_map:
                y[i] = label_map[cell]
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r}", lineno, j + 1) from None
            if j == label_idx:
                y[i] = v
            else:
                X[i, k] = v
                k += 1
    return Dataset(name, None, X, y)


def to_libsvm(ds: Dataset) -> bytes:
    """Dense LIBSVM text; every index is written so the dimension survives a round trip."""
    out = io.StringIO()
    for row, label in zip(ds.features, ds.labels):
        out.write(repr(float(label)))
        for j, v in enumerate(row, start=1):
            out.write(f" {j}:{float(v)!r}")
        out.write("\n")
    return out.getvalue().encode()


def to_csv(ds: Dataset) -> bytes:
    out = io.StringIO()
    for row, label in zip(ds.features, ds.labels):
        out.write(",".join([repr(float(label))] + [repr(float(v)) for v in row]))
        out.write("\n")
    return out.getvalue().encode()


# -- preprocessing -----------------------------------------------------------

def _minmax(col: np.ndarray, lo: float, hi: float) -> np.ndarray:
    cmin, cmax = col.min(), col.max()
    if cmin == lo and cmax == hi:
        return col.copy()
    if cmax == cmin:
        return np.full_like(col, 0.0 if lo < 0 else lo)
    return lo + (hi - lo) * (col - cmin) / (cmax - cmin)


def preprocess(raw: Dataset, task) -> Dataset:
    task = Task.parse(task)
    if raw.T < 2:
        raise InvalidInputError(f"need at least 2 rows to rescale, got {raw.T}")
    X = np.empty_like(raw.features)
    for j in range(raw.d):
        X[:, j] = _minmax(raw.features[:, j], -1.0, 1.0)
    y = raw.labels
    if task is Task.CLASSIFICATION:
        values = np.unique(y)
        if values.shape[0] > 2:
            raise InvalidTaskError(f"classification needs 2 label values, found {values.shape[0]}")
        if values.shape[0] == 2:
            y = np.where(y == values[0], -1.0, 1.0)
        elif values[0] not in (-1.0, 1.0):
            y = np.ones_like(y)
        else:
            y = y.copy()
    else:
        y = _minmax(y, 0.0, 1.0)
    return Dataset(raw.name, task, X, y)


def permute(dataset: Dataset, seed) -> StreamOrder:
    """Seeded uniform random order (numpy's Fisher-Yates shuffle)."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(dataset.T)
    perm.setflags(write=False)
    return StreamOrder(perm, seed if isinstance(seed, (int, np.integer)) else None)


# -- loading -------------------------------------------------------------------

def load_file(path, fmt: str | None = None, label_column: int = -1, name: str | None = None) -> Dataset:
    path = Path(path)
    fmt = fmt or ("libsvm" if path.suffix in (".svm", ".libsvm", ".txt") else "csv")
    data = path.read_bytes()
    name = name or path.stem
    if fmt == "libsvm":
        return parse_libsvm(data, name=name)
    if fmt == "csv":
        return parse_csv(data, label_column=label_column, name=name)
    raise InvalidInputError(f"unknown format {fmt!r}")


# name -> (task, label column, label map) for files placed under the data dir
KNOWN_DATASETS = {
    "magic04": (Task.CLASSIFICATION, -1, {"g": 1.0, "h": -1.0}),
    "elevators": (Task.REGRESSION, -1, None),
    "bank": (Task.REGRESSION, -1, None),
    "ailerons": (Task.REGRESSION, -1, None),
    "phishing": (Task.CLASSIFICATION, 0, None),
    "a9a": (Task.CLASSIFICATION, 0, None),
    "susy": (Task.CLASSIFICATION, 0, None),
}


def data_dir() -> Path:
    return Path(os.environ.get("OKSELECT_DATA", "data"))


def _keel_magic() -> bytes | None:
    try:
        from importlib import resources
        return (resources.files("keel_ds") / "data/balanced/raw/magic.dat").read_bytes()
    except (ModuleNotFoundError, FileNotFoundError, OSError):
        return None


def load_named(name: str) -> Dataset:
    """Load a benchmark dataset by name and preprocess it.

    Looks for ``<name>.csv`` / ``<name>.data`` / ``<name>.libsvm`` in the data
    directory (``$OKSELECT_DATA``, default ``./data``). magic04 falls back to
    the copy bundled with the ``keel-ds`` package.
    """
    key = name.lower()
    if key not in KNOWN_DATASETS:
        raise InvalidInputError(f"unknown dataset {name!r}; known: {sorted(KNOWN_DATASETS)}")
    task, label_col, label_map = KNOWN_DATASETS[key]
    base = data_dir()
    for suffix in (".csv", ".data", ".dat"):
        p = base / f"{key}{suffix}"
        if p.exists():
            return preprocess(parse_csv(p.read_bytes(), label_col, key, label_map), task)
    for suffix in (".libsvm", ".svm", ".txt"):
        p = base / f"{key}{suffix}"
        if p.exists():
            return preprocess(parse_libsvm(p.read_bytes(), key), task)
    if key == "magic04":
        raw = _keel_magic()
        if raw is not None:
            return preprocess(parse_csv(raw, label_col, key, label_map), task)
    raise FileNotFoundError(f"dataset {name!r} not found under {base.resolve()}")


# -- synthetic streams ---------------------------------------------------------

def realizable_regression(T: int, d: int = 3, width: float = 1.0, n_centers: int = 20,
                          norm: float = 0.5, noise: float = 0.0, seed=None) -> Dataset:
    """Stream labelled by a fixed function in the Gaussian RKHS of ``width``.

    ``f0 = sum_j a_j k(c_j, .)`` with positive ``a_j`` scaled so that
    ``||f0|| = norm``; labels ``f0(x) + noise`` lie in [0, norm] when noise is 0.
    """
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-1.0, 1.0, size=(n_centers, d))
    a = rng.uniform(0.2, 1.0, size=n_centers)
    gamma = 1.0 / (2.0 * width * width)

    def gram(A, B):
        return gaussian_cross(A, B, gamma)

    a *= norm / math.sqrt(a @ gram(centers, centers) @ a)
    X = rng.uniform(-1.0, 1.0, size=(T, d))
    y = gram(X, centers) @ a
    if noise:
        y = y + noise * rng.standard_normal(T)
    return Dataset(f"realizable-w{width:g}", Task.REGRESSION, X, y)


def separation_stream(T: int, d: int = 2, seed=None) -> Dataset:
    """Regression stream with all labels 0, for two constant arms predicting 0 and 1."""
    rng = np.random.default_rng(seed)
    return Dataset("separation", Task.REGRESSION, rng.uniform(-1.0, 1.0, size=(T, d)), np.zeros(T))
