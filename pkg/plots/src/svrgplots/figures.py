"""Figure assembly and deterministic rendering.

Every figure is written twice, as SVG and as PNG, with pinned style
parameters, a fixed SVG hash salt, and no embedded timestamps, so
rerendering unchanged inputs reproduces both files byte for byte.
"""

import glob
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # must run before pyplot loads a backend

import matplotlib.pyplot as plt
import numpy as np

from .traces import PlotInputError, read_trace, read_tune

X_CHOICES = ("epoch_equiv", "wall_s", "b")
Y_CHOICES = ("suboptimality", "complexity", "step_size")

# tune sweeps live on the b axis, convergence traces on the other two
_TRACE_XS = ("epoch_equiv", "wall_s")
_Y_COLUMN = {"suboptimality": "suboptimality",
             "complexity": "complexity",
             "step_size": "alpha"}
_AXIS_LABEL = {
    "epoch_equiv": "epochs (gradient evaluations / n)",
    "wall_s": "wall clock (s)",
    "b": "mini-batch size b",
    "suboptimality": "f(x) - f*",
    "complexity": "total gradient evaluations",
    "step_size": "step size",
}

_RC = {
    "svg.hashsalt": "svrgplots",
    "svg.fonttype": "none",  # keep label text as text, not glyph paths
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 9,
    "lines.linewidth": 1.6,
}


@dataclass(frozen=True)
class FigureSpec:
    """One figure: which files, which axes, where to write.

    inputs holds file paths or glob patterns (at least one).  output is
    the target path; a trailing .svg or .png is stripped and both
    variants are written.  labels, when given, must match the expanded
    input count one to one; otherwise file stems label the lines.
    """

    inputs: tuple
    x: str
    y: str
    output: Path
    labels: tuple = None
    title: str = None

    def __post_init__(self):
        if not self.inputs:
            raise PlotInputError("a figure needs at least one input file")
        if self.x not in X_CHOICES:
            raise PlotInputError(f"unknown x axis {self.x!r}; "
                                 f"choose from {', '.join(X_CHOICES)}")
        if self.y not in Y_CHOICES:
            raise PlotInputError(f"unknown y axis {self.y!r}; "
                                 f"choose from {', '.join(Y_CHOICES)}")
        if self.y == "suboptimality" and self.x not in _TRACE_XS:
            raise PlotInputError("suboptimality is plotted against "
                                 "epoch_equiv or wall_s, not b")
        if self.y != "suboptimality" and self.x != "b":
            raise PlotInputError(f"{self.y} is plotted against b")


@dataclass(frozen=True)
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray


def expand_inputs(patterns):
    """Resolve glob patterns against the filesystem, in sorted order; a
    pattern that matches nothing is an error, a literal path passes
    through (existence is checked at read time)."""
    out = []
    for pattern in patterns:
        text = str(pattern)
        if any(ch in text for ch in "*?["):
            matches = sorted(glob.glob(text))
            if not matches:
                raise PlotInputError(f"{text}: no files match")
            out.extend(Path(m) for m in matches)
        else:
            out.append(Path(text))
    return out


def build_series(spec: FigureSpec):
    """Read every input of the spec into plottable (label, x, y) series."""
    paths = expand_inputs(spec.inputs)
    if spec.labels is not None and len(spec.labels) != len(paths):
        raise PlotInputError(f"{len(spec.labels)} labels given for "
                             f"{len(paths)} input files")
    reader = read_tune if spec.x == "b" else read_trace
    series = []
    for k, path in enumerate(paths):
        table = reader(path)
        xs = table.columns[spec.x]
        ys = table.columns[_Y_COLUMN[spec.y]]
        keep = ~(np.isnan(xs) | np.isnan(ys))
        if not np.any(keep):
            raise PlotInputError(f"{path}: empty series, no usable rows "
                                 f"for {spec.y} vs {spec.x}")
        label = spec.labels[k] if spec.labels is not None else path.stem
        series.append(Series(label=str(label), x=xs[keep], y=ys[keep]))
    return series


def _targets(output):
    text = str(output)
    if text.endswith(".svg") or text.endswith(".png"):
        text = text[:-4]
    return Path(text + ".svg"), Path(text + ".png")


def render(spec: FigureSpec):
    """Write the figure as SVG and PNG; returns both paths."""
    series = build_series(spec)
    svg_path, png_path = _targets(spec.output)
    svg_path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots()
        try:
            for s in series:
                ax.plot(s.x, s.y, label=s.label)
            if spec.y == "suboptimality":
                ax.set_yscale("log")
            ax.set_xlabel(_AXIS_LABEL[spec.x])
            ax.set_ylabel(_AXIS_LABEL[spec.y])
            if spec.title:
                ax.set_title(spec.title)
            ax.legend()
            fig.tight_layout()
            # Date: None strips the SVG timestamp; PNG carries none
            fig.savefig(svg_path, format="svg", metadata={"Date": None})
            fig.savefig(png_path, format="png")
        finally:
            plt.close(fig)
    return [svg_path, png_path]
