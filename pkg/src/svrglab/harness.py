"""Experiment harness: INI configs in, trace CSVs and a run summary out.

A config names one dataset, one loss, and any number of solver sections.
Solver parameters may be numbers or the symbols "optimal" / "auto" / "n" /
"theory" / "1/n", which the harness resolves through the tuning module
before anything runs; summaries only ever contain the resolved numbers.
Every (solver, seed) pair becomes one trace CSV whose rows are cumulative
per-example gradient counts, so reruns of the same config are
byte-identical as long as wall-clock timing stays off.
"""
from __future__ import annotations

import configparser
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import generate_synthetic, parse_libsvm, scale_columns
from .optimizers import (
    DivergenceError,
    FreeSvrgConfig,
    LSvrgDConfig,
    TraceRecord,
    run_free_svrg,
    run_lsvrg_d,
    run_reference_svrg,
)
from .problem import LossModel, reference_solution, smoothness_profile
from .sampling import expected_residual, expected_smoothness, make_scheme
from .tuning import (
    optimal_batch_lsvrgd,
    optimal_batch_m_eq_n,
    optimal_batch_m_eq_n_over_b,
    optimal_loop,
    step_size_free,
    step_size_lsvrgd,
    total_complexity_free,
)

TRACE_FIELDS = ("grad_evals", "epoch_equiv", "wall_s",
                "suboptimality", "dist_sq", "lyapunov")

# values below this are clipped in the CSV so log plots never see zero
SUBOPT_FLOOR = 1e-16

_WORKERS_VAR = "SVRGLAB_WORKERS"
_ALGORITHMS = ("free_svrg", "lsvrg_d", "reference_svrg")
_LOSSES = ("ridge", "logistic")
_SAMPLINGS = ("b_nice", "single_element", "partition", "independent")
_BOOLEANS = configparser.ConfigParser.BOOLEAN_STATES


class ConfigError(ValueError):
    """The experiment description is wrong, as opposed to a run failing."""


@dataclass(frozen=True)
class DatasetSpec:
    """Where the data comes from; exactly one of path / (n, d) is set."""

    path: str | None = None
    n: int | None = None
    d: int | None = None
    kind: str = "regression"
    noise: float = 0.0
    seed: int = 0
    scale: bool = False


@dataclass(frozen=True)
class SolverSpec:
    name: str
    algorithm: str
    b: object = 1          # int or "optimal"
    m: object = None       # int, "n", "optimal", "theory"
    p: object = None       # float, "1/n", "optimal"
    alpha: object = "auto"
    seeds: int = 1
    budget: float = 1.0    # epoch equivalents
    sampling: str = "b_nice"
    probabilities: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec
    loss: str
    lam: float
    output_dir: str
    solvers: tuple
    epsilon: float = 1e-4
    base_seed: int = 0
    reference_tol: float = 1e-10
    timing: bool = False


@dataclass(frozen=True)
class ResolvedRun:
    """Concrete numbers a single run executes with. m is None for the
    single-loop method, p for the outer-loop ones; iterations counts outer
    loops or single-loop steps accordingly."""

    algorithm: str
    b: int
    m: int | None
    p: float | None
    alpha: float
    iterations: int


def _int(value, where):
    try:
        return int(str(value))
    except ValueError:
        raise ConfigError(f"{where} must be an integer, got {value!r}") from None


def _float(value, where):
    try:
        return float(str(value))
    except ValueError:
        raise ConfigError(f"{where} must be a number, got {value!r}") from None


def _bool(value, where):
    key = str(value).lower()
    if key not in _BOOLEANS:
        raise ConfigError(f"{where} must be a boolean, got {value!r}")
    return _BOOLEANS[key]


def _no_leftovers(raw, section):
    if raw:
        key = sorted(raw)[0]
        raise ConfigError(f"unknown key {key!r} in [{section}]")


def _parse_dataset(raw, loss, config_dir):
    scale = _bool(raw.pop("scale", "false"), "dataset scale")
    if "path" in raw:
        path = os.path.join(config_dir, raw.pop("path"))
        raw.pop("source", None)
        _no_leftovers(raw, "dataset")
        if not os.path.isfile(path):
            raise ConfigError(f"dataset file not found: {path}")
        return DatasetSpec(path=path, scale=scale)
    if raw.pop("source", None) != "synthetic":
        raise ConfigError("dataset needs either a path or source = synthetic")
    if "n" not in raw or "d" not in raw:
        raise ConfigError("synthetic dataset needs n and d")
    default_kind = "classification" if loss == "logistic" else "regression"
    spec = DatasetSpec(
        n=_int(raw.pop("n"), "dataset n"),
        d=_int(raw.pop("d"), "dataset d"),
        kind=raw.pop("kind", default_kind),
        noise=_float(raw.pop("noise", "0"), "dataset noise"),
        seed=_int(raw.pop("seed", "0"), "dataset seed"),
        scale=scale,
    )
    _no_leftovers(raw, "dataset")
    return spec


def _symbol_or(raw_value, symbols, convert, where):
    if raw_value in symbols:
        return raw_value
    return convert(raw_value, where)


def _parse_solver(name, raw, config_dir):
    if not name:
        raise ConfigError("solver section needs a name: [solver:NAME]")
    algorithm = raw.pop("algorithm", None)
    if algorithm not in _ALGORITHMS:
        raise ConfigError(
            f"solver {name!r}: unknown algorithm {algorithm!r}, "
            f"expected one of {', '.join(_ALGORITHMS)}")
    if "budget" not in raw:
        raise ConfigError(f"solver {name!r} needs a budget (in epochs)")
    budget = _float(raw.pop("budget"), f"solver {name!r} budget")
    if budget < 1.0:
        raise ConfigError(
            f"solver {name!r}: budget must cover at least one epoch")
    seeds = _int(raw.pop("seeds", "1"), f"solver {name!r} seeds")
    if seeds < 1:
        raise ConfigError(f"solver {name!r}: seeds must be >= 1")
    sampling = raw.pop("sampling", "b_nice")
    if sampling not in _SAMPLINGS:
        raise ConfigError(f"solver {name!r}: unknown sampling {sampling!r}")
    probabilities = raw.pop("probabilities", None)
    if probabilities is not None:
        probabilities = os.path.join(config_dir, probabilities)
        if not os.path.isfile(probabilities):
            raise ConfigError(f"probabilities file not found: {probabilities}")
    if sampling in ("single_element", "independent") and probabilities is None:
        raise ConfigError(
            f"solver {name!r}: {sampling} sampling needs a probabilities file")

    b = _symbol_or(raw.pop("b", "1"), ("optimal",), _int,
                   f"solver {name!r} b")
    m = raw.pop("m", None)
    if m is not None:
        m = _symbol_or(m, ("n", "optimal", "theory"), _int,
                       f"solver {name!r} m")
    p = raw.pop("p", None)
    if p is not None:
        p = _symbol_or(p, ("1/n", "optimal"), _float, f"solver {name!r} p")
    alpha = _symbol_or(raw.pop("alpha", "auto"), ("auto",), _float,
                       f"solver {name!r} alpha")
    _no_leftovers(raw, f"solver:{name}")
    return SolverSpec(name=name, algorithm=algorithm, b=b, m=m, p=p,
                      alpha=alpha, seeds=seeds, budget=budget,
                      sampling=sampling, probabilities=probabilities)


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment INI file.

    Relative paths inside the file (dataset, output_dir, probabilities)
    are taken relative to the file itself, so a config directory can be
    moved wholesale.
    """
    path = str(path)
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    config_dir = os.path.dirname(os.path.abspath(path))
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    sections = {s: dict(parser[s]) for s in parser.sections()}
    for required in ("dataset", "problem", "experiment"):
        if required not in sections:
            raise ConfigError(f"missing [{required}] section")

    problem = sections.pop("problem")
    loss = problem.pop("loss", None)
    if loss not in _LOSSES:
        raise ConfigError(f"unknown loss {loss!r}, "
                          f"expected one of {', '.join(_LOSSES)}")
    if "lambda" not in problem:
        raise ConfigError("problem section needs lambda")
    lam = _float(problem.pop("lambda"), "lambda")
    if lam < 0:
        raise ConfigError("lambda must be >= 0")
    _no_leftovers(problem, "problem")

    dataset = _parse_dataset(sections.pop("dataset"), loss, config_dir)

    experiment = sections.pop("experiment")
    if "output_dir" not in experiment:
        raise ConfigError("experiment section needs output_dir")
    output_dir = os.path.join(config_dir, experiment.pop("output_dir"))
    epsilon = _float(experiment.pop("epsilon", "1e-4"), "epsilon")
    if not 0.0 < epsilon < 1.0:
        raise ConfigError("epsilon must lie in (0, 1)")
    base_seed = _int(experiment.pop("base_seed", "0"), "base_seed")
    reference_tol = _float(experiment.pop("reference_tol", "1e-10"),
                           "reference_tol")
    if reference_tol <= 0:
        raise ConfigError("reference_tol must be positive")
    timing = _bool(experiment.pop("timing", "false"), "timing")
    _no_leftovers(experiment, "experiment")

    solvers = []
    for section, raw in sections.items():
        prefix, _, name = section.partition(":")
        if prefix != "solver":
            raise ConfigError(f"unknown section [{section}]")
        solvers.append(_parse_solver(name, raw, config_dir))
    if not solvers:
        raise ConfigError("config defines no [solver:NAME] section")

    return ExperimentConfig(dataset=dataset, loss=loss, lam=lam,
                            output_dir=output_dir, solvers=tuple(solvers),
                            epsilon=epsilon, base_seed=base_seed,
                            reference_tol=reference_tol, timing=timing)


def build_dataset(spec: DatasetSpec):
    if spec.path is not None:
        ds = parse_libsvm(spec.path)
    else:
        ds = generate_synthetic(spec.n, spec.d, seed=spec.seed,
                                kind=spec.kind, noise=spec.noise)
    return scale_columns(ds) if spec.scale else ds


def _as_batch(value, n, who):
    b = _int(value, f"{who} b")
    if not 1 <= b <= n:
        raise ConfigError(f"{who}: b must lie in [1, {n}], got {b}")
    return b


def _as_step(value, who):
    alpha = _float(value, f"{who} alpha")
    if alpha <= 0:
        raise ConfigError(f"{who}: alpha must be positive")
    return alpha


def _outer_iterations(budget, n, b, m):
    return max(1, math.floor(budget * n / (n + 2.0 * b * m)))


def resolve_solver(spec: SolverSpec, profile) -> ResolvedRun:
    """Turn symbolic parameters into numbers for one solver spec.

    The closed forms behind "optimal" b and m and "auto" alpha are derived
    for b-nice sampling, so those symbols are rejected under any other
    scheme rather than silently mistuned.
    """
    n = profile.n
    who = f"solver {spec.name!r}"
    if spec.algorithm not in _ALGORITHMS:
        raise ConfigError(f"{who}: unknown algorithm {spec.algorithm!r}")

    needs_tuning = (spec.b == "optimal" or spec.m == "optimal"
                    or (spec.alpha == "auto"
                        and spec.algorithm != "reference_svrg"))
    if needs_tuning and spec.sampling != "b_nice":
        raise ConfigError(
            f"{who}: closed-form tuning assumes b_nice sampling; give "
            f"explicit b, m and alpha for {spec.sampling}")

    if spec.algorithm == "lsvrg_d":
        if spec.m is not None:
            raise ConfigError(f"{who}: the single-loop method has no loop "
                              "length m; set the reset probability p")
        b = (optimal_batch_lsvrgd(profile) if spec.b == "optimal"
             else _as_batch(spec.b, n, who))
        p_raw = spec.p if spec.p is not None else "optimal"
        if p_raw in ("optimal", "1/n"):
            p = 1.0 / n
        else:
            p = _float(p_raw, f"{who} p")
            if not 0.0 < p <= 1.0:
                raise ConfigError(f"{who}: p must lie in (0, 1], got {p}")
        alpha = (step_size_lsvrgd(p, b, profile) if spec.alpha == "auto"
                 else _as_step(spec.alpha, who))
        # expected evals per step: 2b for the estimate, n on a p-coin reset
        iters = max(1, math.floor(spec.budget * n / (2.0 * b + p * n)))
        return ResolvedRun(spec.algorithm, b, None, p, alpha, iters)

    if spec.p is not None:
        raise ConfigError(f"{who}: {spec.algorithm} takes no reset "
                          "probability p")

    if spec.algorithm == "reference_svrg":
        if spec.b == "optimal":
            raise ConfigError(f"{who}: reference_svrg has no closed-form "
                              "batch size; give an integer b")
        b = _as_batch(spec.b, n, who)
        m_raw = spec.m if spec.m is not None else "theory"
        if m_raw == "theory":
            m = math.ceil(20.0 * profile.L_max / profile.mu)
        elif m_raw == "n":
            m = n
        elif m_raw == "optimal":
            raise ConfigError(f"{who}: reference_svrg has no optimal loop "
                              'length; use m = theory or an integer')
        else:
            m = _int(m_raw, f"{who} m")
        alpha = (1.0 / (10.0 * profile.L_max) if spec.alpha == "auto"
                 else _as_step(spec.alpha, who))
        return ResolvedRun(spec.algorithm, b, m, None, alpha,
                           _outer_iterations(spec.budget, n, b, m))

    m_raw = spec.m if spec.m is not None else "optimal"
    if spec.b == "optimal":
        # the best batch depends on which loop-length regime is asked for
        b = (optimal_batch_m_eq_n(profile) if m_raw == "n"
             else optimal_batch_m_eq_n_over_b(profile))
    else:
        b = _as_batch(spec.b, n, who)
    if m_raw == "n":
        m = n
    elif m_raw == "optimal":
        m = optimal_loop(b, profile)
    elif m_raw == "theory":
        raise ConfigError(f"{who}: m = theory is the reference_svrg rule")
    else:
        m = _int(m_raw, f"{who} m")
        if m < 1:
            raise ConfigError(f"{who}: m must be >= 1, got {m}")
    alpha = (step_size_free(b, profile) if spec.alpha == "auto"
             else _as_step(spec.alpha, who))
    return ResolvedRun(spec.algorithm, b, m, None, alpha,
                       _outer_iterations(spec.budget, n, b, m))


def build_scheme(spec: SolverSpec, b: int, n: int):
    probabilities = None
    if spec.probabilities is not None:
        probabilities = np.loadtxt(spec.probabilities, dtype=float, ndmin=1)
    return make_scheme(spec.sampling, n, b=b, probabilities=probabilities)


def _format_field(value, floor=False):
    if value is None:
        return ""
    value = float(value)
    if floor:
        value = max(value, SUBOPT_FLOOR)
    return repr(value)


def write_trace_csv(path, trace, timing=False) -> None:
    """Serialize a RunTrace. repr() keeps every float round-trippable;
    wall times are zeroed unless timing is on so reruns compare equal."""
    lines = [",".join(TRACE_FIELDS)]
    for r in trace.records:
        lines.append(",".join([
            str(int(r.grad_evals)),
            repr(float(r.epoch_equiv)),
            repr(float(r.wall_s)) if timing else "0.0",
            _format_field(r.suboptimality, floor=True),
            _format_field(r.dist_sq),
            _format_field(r.lyapunov),
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


TUNE_FIELDS = ("b", "alpha", "loop_m", "complexity")


def write_tune_csv(path, table) -> None:
    """Serialize a tune_table result, one row per batch size."""
    lines = [",".join(TUNE_FIELDS)]
    for row in table["rows"]:
        lines.append(",".join([
            str(int(row["b"])),
            repr(float(row["alpha"])),
            str(int(row["loop_m"])),
            repr(float(row["complexity"])),
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace_csv(path):
    """Inverse of write_trace_csv; returns (header, records) with blank
    fields mapped back to None."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].split(",") != list(TRACE_FIELDS):
        raise ValueError(f"{path}: not a trace file (bad header)")
    records = []
    for line in lines[1:]:
        f = line.split(",")
        records.append(TraceRecord(
            grad_evals=int(f[0]),
            epoch_equiv=float(f[1]),
            wall_s=float(f[2]),
            suboptimality=float(f[3]) if f[3] else None,
            dist_sq=float(f[4]) if f[4] else None,
            lyapunov=float(f[5]) if f[5] else None,
        ))
    return lines[0].split(","), records


@dataclass(frozen=True)
class _RunJob:
    solver: str
    resolved: ResolvedRun
    scheme: object
    seed: int
    trace_path: str
    smoothness: float
    residual: float


def _dispatch(model, profile, reference, x0, job):
    r = job.resolved
    if r.algorithm == "free_svrg":
        cfg = FreeSvrgConfig(m=r.m, alpha=r.alpha, scheme=job.scheme,
                             outer_iters=r.iterations, seed=job.seed)
        return run_free_svrg(model, cfg, x0=x0, reference=reference,
                             profile=profile)
    if r.algorithm == "lsvrg_d":
        cfg = LSvrgDConfig(p=r.p, alpha=r.alpha, scheme=job.scheme,
                           total_iters=r.iterations, seed=job.seed)
        return run_lsvrg_d(model, cfg, x0=x0, reference=reference,
                           profile=profile)
    return run_reference_svrg(model, job.scheme, m=r.m, alpha=r.alpha,
                              outer_iters=r.iterations, seed=job.seed,
                              x0=x0, reference=reference, profile=profile)


def _execute_run(payload):
    model, profile, reference, x0, timing, job = payload
    r = job.resolved
    entry = {
        "solver": job.solver,
        "algorithm": r.algorithm,
        "seed": job.seed,
        "resolved": {"b": r.b, "m": r.m, "p": r.p, "alpha": r.alpha,
                     "iterations": r.iterations},
        "constants": {"expected_smoothness": job.smoothness,
                      "expected_residual": job.residual},
    }
    try:
        trace = _dispatch(model, profile, reference, x0, job)
    except DivergenceError as exc:
        entry.update(status="diverged", trace=None, error=str(exc),
                     final_suboptimality=None, grad_evals=None)
        return entry
    write_trace_csv(job.trace_path, trace, timing=timing)
    last = trace.records[-1]
    entry.update(status="ok", trace=os.path.basename(job.trace_path),
                 final_suboptimality=last.suboptimality,
                 grad_evals=last.grad_evals)
    return entry


def _worker_count():
    value = os.environ.get(_WORKERS_VAR, "1")
    try:
        return max(1, int(value))
    except ValueError:
        raise ConfigError(
            f"{_WORKERS_VAR} must be an integer, got {value!r}") from None


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run every (solver, seed) pair and write traces plus summary.json.

    The reference solution is computed once and shared by all runs. A run
    that diverges is recorded as such and the rest of the experiment
    continues; the summary is the returned dict, with only its
    generated_at field varying between reruns.
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = build_dataset(cfg.dataset)
    model = LossModel(ds, family=cfg.loss, lam=cfg.lam)
    profile = smoothness_profile(model)
    reference = reference_solution(model, tol=cfg.reference_tol,
                                   profile=profile)
    x0 = np.zeros(model.d)

    jobs = []
    for spec in cfg.solvers:
        resolved = resolve_solver(spec, profile)
        scheme = build_scheme(spec, resolved.b, profile.n)
        smooth = expected_smoothness(scheme, profile)
        resid = expected_residual(scheme, profile)
        for run_index in range(spec.seeds):
            seed = cfg.base_seed + run_index
            jobs.append(_RunJob(
                solver=spec.name, resolved=resolved, scheme=scheme,
                seed=seed,
                trace_path=str(out / f"{spec.name}_seed{seed}.csv"),
                smoothness=smooth, residual=resid))

    payloads = [(model, profile, reference, x0, cfg.timing, job)
                for job in jobs]
    workers = _worker_count()
    if workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_execute_run, payloads))
    else:
        entries = [_execute_run(p) for p in payloads]

    summary = {
        "dataset": {"name": ds.name, "n": model.n, "d": model.d,
                    "scaled": cfg.dataset.scale},
        "problem": {"loss": cfg.loss, "lambda": cfg.lam},
        "constants": {"L_max": profile.L_max, "L": profile.L,
                      "mu": profile.mu, "f_star": reference[1],
                      "reference_tol": cfg.reference_tol},
        "epsilon": cfg.epsilon,
        "base_seed": cfg.base_seed,
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "runs": entries,
    }
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def tune_table(profile, epsilon: float = 1e-4, batch_sizes=None) -> dict:
    """Tuning table for the outer-loop method with loop length m = n.

    Default rows cover b = 1, the closed-form optimum, sqrt(n) and n;
    pass batch_sizes to sweep an explicit list instead.  Each row carries
    the step size, the theory loop length and the predicted total
    complexity at that batch size.
    """
    n = profile.n
    b_star = optimal_batch_m_eq_n(profile)
    if batch_sizes is None:
        batch_sizes = sorted({1, b_star, math.isqrt(n), n})
    rows = []
    for b in batch_sizes:
        rows.append({
            "b": b,
            "alpha": step_size_free(b, profile),
            "loop_m": optimal_loop(b, profile),
            "complexity": total_complexity_free(b, n, profile,
                                                epsilon=epsilon),
        })
    return {"b_star": b_star, "rows": rows}
