"""Finite-sum datasets: LIBSVM text I/O, synthetic problems, column scaling.

A Dataset holds the raw (a_i, y_i) pairs of an empirical-risk objective.
Feature rows are kept sparse (CSR) when the file is mostly zeros and dense
otherwise; both storage forms behave identically downstream.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

# Files with more than this fraction of nonzeros are stored densely.
DENSITY_CUTOFF = 0.5

# Columns already this close to unit norm are left untouched by
# scale_columns, which makes the operation idempotent at the byte level.
_UNIT_NORM_SLACK = 1e-13

_TASKS = ("regression", "classification")


@dataclass(eq=False)
class Dataset:
    """Immutable design matrix + labels.

    rows: (n, d) ndarray or scipy CSR matrix, one example per row.
    labels: length-n vector; exactly +/-1 for classification tasks.
    """

    rows: object
    labels: np.ndarray
    task: str
    name: str = ""

    def __post_init__(self):
        if self.task not in _TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        self.labels = np.asarray(self.labels, dtype=float)
        if not sp.issparse(self.rows):
            self.rows = np.asarray(self.rows, dtype=float)
        if self.rows.ndim != 2:
            raise ValueError("rows must be 2-dimensional")
        n, d = self.rows.shape
        if n < 1 or d < 1:
            raise ValueError(f"need n >= 1 and d >= 1, got shape {(n, d)}")
        if self.labels.shape != (n,):
            raise ValueError(
                f"labels shape {self.labels.shape} does not match n = {n}"
            )
        values = self.rows.data if sp.issparse(self.rows) else self.rows
        if not np.all(np.isfinite(values)) or not np.all(np.isfinite(self.labels)):
            raise ValueError("dataset contains NaN or Inf entries")
        if self.task == "classification":
            bad = set(np.unique(self.labels)) - {-1.0, 1.0}
            if bad:
                raise ValueError(f"classification labels must be +/-1, got {bad}")

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def row(self, i: int) -> np.ndarray:
        """Return example i as a dense 1-d vector."""
        if sp.issparse(self.rows):
            return self.rows.getrow(i).toarray().ravel()
        return self.rows[i]

    def dense_rows(self) -> np.ndarray:
        return self.rows.toarray() if sp.issparse(self.rows) else self.rows

    def __eq__(self, other):
        # value equality; the name is presentation only
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.task == other.task
            and self.rows.shape == other.rows.shape
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.dense_rows(), other.dense_rows())
        )


def parse_libsvm(path, d: int | None = None, name: str | None = None) -> Dataset:
    """Read a LIBSVM-format text file.

    Each data line is ``<label> <idx>:<val> ...`` with 1-based, strictly
    increasing indices; ``#`` starts a comment; blank lines are skipped.
    The feature dimension is the largest index seen unless `d` overrides it
    (needed when a subset file misses trailing features).

    Label convention: files whose labels are exactly {-1,+1} are kept;
    {0,1} and {1,2} are remapped smaller -> -1, larger -> +1. Anything else
    is treated as regression targets and kept verbatim, so a regression
    file whose targets happen to all be 0/1 will be read as classification.
    """
    path = str(path)
    labels: list[float] = []
    rowptr = [0]
    col_idx: list[int] = []
    values: list[float] = []
    max_index = 0

    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                labels.append(float(tokens[0]))
            except ValueError:
                raise ValueError(
                    f"{path}: line {lineno}: bad label {tokens[0]!r}"
                ) from None
            prev = 0
            for tok in tokens[1:]:
                idx_s, _, val_s = tok.partition(":")
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ValueError(
                        f"{path}: line {lineno}: bad feature pair {tok!r}"
                    ) from None
                if idx <= prev:
                    raise ValueError(
                        f"{path}: line {lineno}: indices must be strictly "
                        f"increasing and 1-based (saw {idx} after {prev})"
                    )
                prev = idx
                col_idx.append(idx - 1)
                values.append(val)
            max_index = max(max_index, prev)
            rowptr.append(len(col_idx))

    n = len(labels)
    if n == 0:
        raise ValueError(f"{path}: empty file (no data lines)")
    if d is None:
        d = max_index
        if d == 0:
            raise ValueError(f"{path}: no features anywhere in the file")
    elif d < max_index:
        raise ValueError(
            f"{path}: dimension override d={d} is smaller than max index {max_index}"
        )

    rows = sp.csr_matrix(
        (np.array(values, dtype=float), np.array(col_idx, dtype=np.int64), rowptr),
        shape=(n, d),
    )
    if rows.nnz > DENSITY_CUTOFF * n * d:
        rows = rows.toarray()

    y = np.array(labels)
    uniq = set(np.unique(y))
    if uniq <= {-1.0, 1.0}:
        task = "classification"
    elif uniq <= {0.0, 1.0}:
        y = np.where(y == 0.0, -1.0, 1.0)
        task = "classification"
    elif uniq <= {1.0, 2.0}:
        y = np.where(y == 1.0, -1.0, 1.0)
        task = "classification"
    else:
        task = "regression"

    return Dataset(rows=rows, labels=y, task=task,
                   name=name if name is not None else os.path.basename(path))


def write_libsvm(ds: Dataset, path) -> None:
    """Write `ds` in LIBSVM format. Zeros are dropped, so a trailing
    all-zero column needs the `d` override when the file is read back."""

    def fmt(v: float) -> str:
        return repr(float(v))

    with open(str(path), "w") as fh:
        sparse = sp.issparse(ds.rows)
        for i in range(ds.n):
            y = ds.labels[i]
            label = str(int(y)) if ds.task == "classification" else fmt(y)
            if sparse:
                start, stop = ds.rows.indptr[i], ds.rows.indptr[i + 1]
                idx = ds.rows.indices[start:stop]
                val = ds.rows.data[start:stop]
                order = np.argsort(idx)
                pairs = [(int(idx[k]) + 1, val[k]) for k in order if val[k] != 0.0]
            else:
                row = ds.rows[i]
                pairs = [(j + 1, row[j]) for j in np.nonzero(row)[0]]
            fh.write(" ".join([label] + [f"{j}:{fmt(v)}" for j, v in pairs]) + "\n")


def generate_synthetic(
    n: int,
    d: int,
    seed: int,
    kind: str = "regression",
    noise: float = 0.0,
) -> Dataset:
    """Gaussian synthetic problem, a pure function of its arguments.

    Stream layout (fixed so callers can reproduce the hidden parameter):
    rows ~ N(0,1) per coordinate are drawn first, then x_true ~ N(0,1),
    then the noise variables. Regression labels are <a_i, x_true> plus
    noise * N(0,1); classification labels are sign(<a_i, x_true>) with
    each sign flipped independently with probability `noise`.
    """
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if kind not in _TASKS:
        raise ValueError(f"unknown kind {kind!r}")
    if noise < 0:
        raise ValueError("noise must be >= 0")

    rng = np.random.default_rng(seed)
    rows = rng.standard_normal((n, d))
    x_true = rng.standard_normal(d)
    margins = rows @ x_true
    if kind == "regression":
        y = margins + noise * rng.standard_normal(n)
    else:
        y = np.where(margins >= 0, 1.0, -1.0)
        y = np.where(rng.random(n) < noise, -y, y)
    return Dataset(rows=rows, labels=y, task=kind,
                   name=f"synthetic-{kind}-n{n}-d{d}-s{seed}")


def scale_columns(ds: Dataset) -> Dataset:
    """Divide every column with nonzero norm by its Euclidean norm.

    Columns whose norm is already within 1e-13 of 1 are left untouched;
    that keeps rescaling an already-scaled dataset an exact no-op.
    """
    if sp.issparse(ds.rows):
        norms = np.sqrt(np.asarray(ds.rows.multiply(ds.rows).sum(axis=0)).ravel())
    else:
        norms = np.sqrt((ds.rows**2).sum(axis=0))

    scale = np.ones(ds.d)
    needs = (norms > 0) & (np.abs(norms - 1.0) > _UNIT_NORM_SLACK)
    scale[needs] = 1.0 / norms[needs]
    if not np.any(needs):
        rows = ds.rows.copy()
    elif sp.issparse(ds.rows):
        rows = ds.rows @ sp.diags(scale)
        rows = sp.csr_matrix(rows)
    else:
        rows = ds.rows * scale[np.newaxis, :]
    return Dataset(rows=rows, labels=ds.labels.copy(), task=ds.task, name=ds.name)
