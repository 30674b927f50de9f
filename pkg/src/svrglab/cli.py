"""Command line front end.

Four subcommands: `run` executes an experiment config, `tune` prints the
closed-form tuning table for a problem, `constants` prints its smoothness
constants at one batch size, and `gen-synthetic` writes a synthetic
dataset to disk. Exit code 0 means success, 1 a bad invocation or config,
2 a failure while running.
"""
import argparse
import dataclasses
import os
import sys

from .dataset import generate_synthetic, write_libsvm
from .harness import (
    ConfigError,
    DatasetSpec,
    build_dataset,
    load_config,
    run_experiment,
    tune_table,
    write_tune_csv,
)
from .problem import LossModel, smoothness_profile
from .sampling import BNiceSampling, expected_residual, expected_smoothness
from .tuning import optimal_loop, step_size_free

_SYNTH_KEYS = ("n", "d", "seed", "kind", "noise")


def _parse_synthetic(text) -> DatasetSpec:
    """Parse "n=300,d=10[,seed=1][,kind=regression][,noise=0.5]"."""
    fields = {}
    for part in text.split(","):
        key, sep, value = part.partition("=")
        key = key.strip()
        if not sep or key not in _SYNTH_KEYS:
            raise ConfigError(f"bad --synthetic entry {part.strip()!r}; "
                              f"known keys: {', '.join(_SYNTH_KEYS)}")
        fields[key] = value.strip()
    if "n" not in fields or "d" not in fields:
        raise ConfigError("--synthetic needs at least n and d")
    try:
        return DatasetSpec(
            n=int(fields["n"]), d=int(fields["d"]),
            seed=int(fields.get("seed", "0")),
            kind=fields.get("kind", "regression"),
            noise=float(fields.get("noise", "0")),
        )
    except ValueError as exc:
        raise ConfigError(f"bad --synthetic value: {exc}") from None


def _load_problem(args):
    if (args.dataset is None) == (args.synthetic is None):
        raise ConfigError("give exactly one of --dataset and --synthetic")
    if args.dataset is not None:
        if not os.path.isfile(args.dataset):
            raise ConfigError(f"dataset file not found: {args.dataset}")
        spec = DatasetSpec(path=args.dataset, scale=args.scale)
    else:
        spec = _parse_synthetic(args.synthetic)
        if args.scale:
            spec = dataclasses.replace(spec, scale=True)
    ds = build_dataset(spec)
    model = LossModel(ds, family=args.loss, lam=args.lam)
    return model, smoothness_profile(model)


def _cmd_run(args):
    cfg = load_config(args.config)
    summary = run_experiment(cfg)
    runs = summary["runs"]
    diverged = sum(r["status"] != "ok" for r in runs)
    note = f", {diverged} diverged" if diverged else ""
    print(f"{len(runs)} runs written to {cfg.output_dir}{note}")
    return 0


def _cmd_tune(args):
    _, profile = _load_problem(args)
    table = tune_table(profile, epsilon=args.epsilon)
    print(f"{'b':>8} {'alpha':>14} {'loop_m':>10} {'complexity':>14}")
    for row in table["rows"]:
        print(f"{row['b']:>8d} {row['alpha']:>14.8g} "
              f"{row['loop_m']:>10d} {row['complexity']:>14.8g}")
    print(f"closed-form optimal b = {table['b_star']} "
          f"(with loop length m = n)")
    if args.csv is not None:
        sweep = tune_table(profile, epsilon=args.epsilon,
                           batch_sizes=range(1, profile.n + 1))
        write_tune_csv(args.csv, sweep)
        print(f"wrote full b-sweep to {args.csv}")
    return 0


def _cmd_constants(args):
    model, profile = _load_problem(args)
    b = args.b
    if not 1 <= b <= profile.n:
        raise ConfigError(f"--b must lie in [1, {profile.n}], got {b}")
    scheme = BNiceSampling(profile.n, b)
    print(f"dataset = {model.dataset.name!r}")
    print(f"n = {profile.n}")
    print(f"d = {model.d}")
    print(f"L_max = {profile.L_max!r}")
    print(f"L = {profile.L!r}")
    print(f"mu = {profile.mu!r}")
    print(f"expected_smoothness(b={b}) = {expected_smoothness(scheme, profile)!r}")
    print(f"expected_residual(b={b}) = {expected_residual(scheme, profile)!r}")
    print(f"step_size(b={b}) = {step_size_free(b, profile)!r}")
    print(f"loop_m(b={b}) = {optimal_loop(b, profile)}")
    return 0


def _cmd_gen_synthetic(args):
    ds = generate_synthetic(args.n, args.d, seed=args.seed, kind=args.kind,
                            noise=args.noise)
    write_libsvm(ds, args.out)
    print(f"wrote {ds.n} x {ds.d} {ds.task} dataset to {args.out}")
    return 0


def _add_problem_flags(sub, epsilon=False):
    sub.add_argument("--dataset", help="LIBSVM file to load")
    sub.add_argument("--synthetic", metavar="SPEC",
                     help='synthetic problem, e.g. "n=300,d=10,seed=1"')
    sub.add_argument("--loss", required=True, choices=("ridge", "logistic"))
    sub.add_argument("--lambda", dest="lam", type=float, required=True,
                     help="regularizer strength")
    sub.add_argument("--scale", action="store_true",
                     help="normalize feature columns first")
    if epsilon:
        sub.add_argument("--epsilon", type=float, default=1e-4,
                         help="target accuracy in the complexity bound")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svrglab",
        description="variance-reduced solvers with closed-form tuning")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="execute an experiment config")
    run.add_argument("config", help="INI experiment description")
    run.set_defaults(func=_cmd_run)

    tune = commands.add_parser("tune", help="print the tuning table")
    _add_problem_flags(tune, epsilon=True)
    tune.add_argument("--csv", metavar="PATH", default=None,
                      help="also write the full b = 1..n sweep as CSV")
    tune.set_defaults(func=_cmd_tune)

    consts = commands.add_parser("constants",
                                 help="print smoothness constants")
    _add_problem_flags(consts)
    consts.add_argument("--b", type=int, default=1, help="batch size")
    consts.set_defaults(func=_cmd_constants)

    gen = commands.add_parser("gen-synthetic",
                              help="write a synthetic LIBSVM file")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--d", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--kind", choices=("regression", "classification"),
                     default="regression")
    gen.add_argument("--noise", type=float, default=0.0)
    gen.add_argument("--out", required=True, help="output path")
    gen.set_defaults(func=_cmd_gen_synthetic)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything the run itself broke on
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
