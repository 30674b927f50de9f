"""Readers for the two CSV formats the solver toolkit emits.

A trace file carries one convergence run; a tune file carries the
closed-form tuning sweep over batch sizes.  Both are plain comma
separated text with a fixed header and no quoting.  Blank fields (a
trace written without a reference solution) parse as NaN and are
dropped series-wise by the figure builder.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TRACE_HEADER = ("grad_evals", "epoch_equiv", "wall_s",
                "suboptimality", "dist_sq", "lyapunov")
TUNE_HEADER = ("b", "alpha", "loop_m", "complexity")


class PlotInputError(ValueError):
    """Bad or missing input; the message always names the file."""


@dataclass(frozen=True)
class Table:
    """One parsed CSV: column name -> float array, NaN for blanks."""

    path: Path
    columns: dict


def _read_csv(path, header) -> Table:
    path = Path(path)
    if not path.is_file():
        raise PlotInputError(f"{path}: no such file")
    lines = path.read_text().splitlines()
    if not lines or tuple(lines[0].split(",")) != header:
        raise PlotInputError(
            f"{path}: expected header {','.join(header)!r}, "
            f"got {lines[0] if lines else '<empty file>'!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != len(header):
            raise PlotInputError(f"{path}:{lineno}: expected "
                                 f"{len(header)} fields, got {len(fields)}")
        row = []
        for name, field in zip(header, fields):
            if field == "":
                row.append(math.nan)
                continue
            try:
                row.append(float(field))
            except ValueError:
                raise PlotInputError(f"{path}:{lineno}: bad value "
                                     f"{field!r} in column {name}") from None
        rows.append(row)
    data = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    return Table(path=path,
                 columns={name: data[:, j] for j, name in enumerate(header)})


def read_trace(path) -> Table:
    """Parse one convergence trace CSV."""
    return _read_csv(path, TRACE_HEADER)


def read_tune(path) -> Table:
    """Parse one tuning-sweep CSV."""
    return _read_csv(path, TUNE_HEADER)
