"""svrg-plot: render figures from trace CSVs and tuning-sweep CSVs.

Two modes. Flag mode describes a single figure inline:

    svrg-plot --inputs 'runs/*.csv' --x epoch_equiv --y suboptimality \
              --out fig/convergence

Spec mode renders every [figure:NAME] section of an INI file, with
paths resolved relative to the spec file:

    svrg-plot --spec figures.ini

Exit code 0 on success, 1 for bad inputs or a bad spec, 2 for an
unexpected failure.
"""

import argparse
import configparser
import sys
from pathlib import Path

from .figures import X_CHOICES, Y_CHOICES, FigureSpec, render
from .traces import PlotInputError

_SECTION_PREFIX = "figure:"
_KEYS = ("inputs", "x", "y", "output", "labels", "title")


def _split_list(text):
    parts = []
    for chunk in text.replace(",", "\n").splitlines():
        chunk = chunk.strip()
        if chunk:
            parts.append(chunk)
    return parts


def _spec_from_section(parser, section, base_dir):
    unknown = set(parser[section]) - set(_KEYS)
    if unknown:
        raise PlotInputError(f"[{section}] has unknown keys: "
                             f"{', '.join(sorted(unknown))}")
    get = parser[section].get
    for key in ("inputs", "x", "y", "output"):
        if get(key) is None:
            raise PlotInputError(f"[{section}] is missing {key}")
    inputs = tuple(str(base_dir / p) for p in _split_list(get("inputs")))
    labels = get("labels")
    return FigureSpec(
        inputs=inputs,
        x=get("x"),
        y=get("y"),
        output=base_dir / get("output"),
        labels=tuple(_split_list(labels)) if labels is not None else None,
        title=get("title"),
    )


def load_spec_file(path):
    """Parse an INI spec file into (name, FigureSpec) pairs."""
    path = Path(path)
    if not path.is_file():
        raise PlotInputError(f"{path}: no such file")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise PlotInputError(f"{path}: {exc}") from None
    specs = []
    for section in parser.sections():
        if not section.startswith(_SECTION_PREFIX):
            raise PlotInputError(f"{path}: unexpected section [{section}]; "
                                 f"figures are named [figure:NAME]")
        name = section[len(_SECTION_PREFIX):]
        specs.append((name, _spec_from_section(parser, section, path.parent)))
    if not specs:
        raise PlotInputError(f"{path}: no [figure:NAME] sections")
    return specs


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="svrg-plot",
        description="render figures from trace and tuning CSVs")
    parser.add_argument("--spec", metavar="FILE",
                        help="INI file of [figure:NAME] sections")
    parser.add_argument("--inputs", nargs="+", metavar="PATH",
                        help="trace or tune CSVs; glob patterns allowed")
    parser.add_argument("--x", choices=X_CHOICES)
    parser.add_argument("--y", choices=Y_CHOICES)
    parser.add_argument("--out", metavar="PATH",
                        help="output path; .svg and .png are both written")
    parser.add_argument("--labels", metavar="A,B,...",
                        help="legend labels, one per input")
    parser.add_argument("--title")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        if args.spec is not None:
            if (args.inputs or args.x or args.y or args.out
                    or args.labels or args.title):
                parser.error("--spec excludes the single-figure flags")
            specs = load_spec_file(args.spec)
        else:
            missing = [flag for flag, value in
                       (("--inputs", args.inputs), ("--x", args.x),
                        ("--y", args.y), ("--out", args.out))
                       if not value]
            if missing:
                parser.error(f"flag mode needs {', '.join(missing)}")
            labels = tuple(_split_list(args.labels)) if args.labels else None
            specs = [("figure", FigureSpec(
                inputs=tuple(args.inputs), x=args.x, y=args.y,
                output=Path(args.out), labels=labels, title=args.title))]
        for name, spec in specs:
            written = render(spec)
            print(f"{name}: wrote {written[0]} and {written[1]}")
        return 0
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    except PlotInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
