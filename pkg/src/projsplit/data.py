"""Dataset ingestion: dense CSV, MatrixMarket and synthetic Gaussian data."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.io
import scipy.sparse

from .errors import ConfigError, DataError

__all__ = [
    "DatasetSpec",
    "FORMATS",
    "ingest",
    "load_dataset",
    "normalize_columns",
    "read_dense_csv",
    "synthetic",
    "write_dense_csv",
    "write_matrix_market",
]

FORMATS = ("csv", "mtx", "synthetic")

PathLike = Union[str, Path]


@dataclass
class DatasetSpec:
    """Where the data matrix and right-hand side come from.

    For files, ``b`` is read from ``b_path`` if given and otherwise taken
    from column ``b_column`` of the data file (default: the last column of a
    CSV). Synthetic data uses ``m``, ``d`` and ``seed``.
    """

    format: str = "synthetic"
    path: Optional[str] = None
    b_path: Optional[str] = None
    b_column: Optional[int] = None
    normalize: bool = True
    m: int = 100
    d: int = 1000
    seed: int = 1

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ConfigError(f"unknown dataset format {self.format!r}; choose from {FORMATS}")
        if self.format != "synthetic" and not self.path:
            raise ConfigError(f"format {self.format!r} needs a dataset path")
        if self.format == "synthetic" and (self.m < 1 or self.d < 1):
            raise ConfigError("synthetic data needs m, d >= 1")


def synthetic(m: int, d: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """``Q`` (m x d) and ``b`` (m) with i.i.d. standard normal entries."""
    rng = np.random.default_rng(seed)
    Q = rng.standard_normal((m, d))
    b = rng.standard_normal(m)
    return Q, b


def normalize_columns(Q: np.ndarray) -> np.ndarray:
    """Scale every column to unit Euclidean norm; zero columns stay zero."""
    norms = np.linalg.norm(Q, axis=0)
    zero = norms == 0
    if np.any(zero):
        idx = np.flatnonzero(zero)
        warnings.warn(f"{idx.size} zero column(s) left unscaled (first: {idx[0]})", stacklevel=2)
    return Q / np.where(zero, 1.0, norms)


def read_dense_csv(path: PathLike) -> np.ndarray:
    """Read a rectangular numeric CSV; a leading all-text row is a header.

    Parse failures report the 1-based line and column.
    """
    rows: list[list[float]] = []
    width = None
    try:
        with open(path, newline="") as fh:
            for line_no, fields in enumerate(csv.reader(fh), start=1):
                if not fields or all(not f.strip() for f in fields):
                    continue
                if line_no == 1 and not any(_is_number(f) for f in fields):
                    continue
                row = []
                for col, field in enumerate(fields, start=1):
                    try:
                        row.append(float(field))
                    except ValueError:
                        raise DataError(f"{path}:{line_no}:{col}: cannot parse {field.strip()!r} as a number") from None
                if width is None:
                    width = len(row)
                elif len(row) != width:
                    raise DataError(f"{path}:{line_no}: expected {width} columns, found {len(row)}")
                rows.append(row)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no numeric rows")
    return np.array(rows)


def _is_number(field: str) -> bool:
    try:
        float(field)
    except ValueError:
        return False
    return True


def _read_matrix_market(path: PathLike) -> np.ndarray:
    try:
        M = scipy.io.mmread(str(path))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read MatrixMarket file {path}: {exc}") from exc
    M = M.toarray() if scipy.sparse.issparse(M) else np.asarray(M)
    return np.asarray(M, dtype=float)


def _read_any(path: PathLike) -> np.ndarray:
    return _read_matrix_market(path) if str(path).endswith(".mtx") else read_dense_csv(path)


def ingest(
    path: PathLike,
    fmt: str = "csv",
    normalize: bool = True,
    b_column: Optional[int] = None,
    b_path: Optional[PathLike] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Load ``(Q, b)`` from a data file.

    ``b`` comes from ``b_path`` when given, else from column ``b_column``
    of the file (which is then removed from ``Q``). A CSV with neither uses
    its last column; a MatrixMarket file must name one.
    """
    if fmt == "csv":
        M = read_dense_csv(path)
    elif fmt == "mtx":
        M = _read_matrix_market(path)
    else:
        raise DataError(f"ingest handles csv and mtx files, not {fmt!r}")
    if M.ndim != 2:
        raise DataError(f"{path}: expected a matrix")
    if b_path is not None:
        Q = M
        b = _read_any(b_path).ravel()
    else:
        if b_column is None:
            if fmt == "mtx":
                raise DataError("MatrixMarket data needs --b-path or --b-column")
            b_column = -1
        cols = M.shape[1]
        if not -cols <= b_column < cols or cols < 2:
            raise DataError(f"{path}: b column {b_column} outside the {cols} available")
        j = b_column % cols
        b = M[:, j].copy()
        Q = np.delete(M, j, axis=1)
    if b.shape[0] != Q.shape[0]:
        raise DataError(f"Q has {Q.shape[0]} rows but b has {b.shape[0]} entries")
    if normalize:
        Q = normalize_columns(Q)
    return Q, b


def load_dataset(spec: DatasetSpec) -> tuple[np.ndarray, np.ndarray]:
    if spec.format == "synthetic":
        Q, b = synthetic(spec.m, spec.d, spec.seed)
        return (normalize_columns(Q) if spec.normalize else Q), b
    return ingest(spec.path, spec.format, spec.normalize, spec.b_column, spec.b_path)


def write_dense_csv(path: PathLike, Q: np.ndarray, b: Optional[np.ndarray] = None) -> None:
    """Write ``Q`` (with ``b`` appended as the last column) as plain CSV."""
    M = Q if b is None else np.column_stack([Q, b])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in M:
        writer.writerow([repr(float(v)) for v in row])
    Path(path).write_text(buf.getvalue())


def write_matrix_market(path: PathLike, M: np.ndarray) -> None:
    """Write ``M`` in MatrixMarket coordinate format."""
    scipy.io.mmwrite(str(path), scipy.sparse.coo_matrix(np.asarray(M, dtype=float)))
