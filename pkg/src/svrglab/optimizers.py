"""Variance-reduced solvers over arbitrary sampling schemes.

Three loops share one gradient estimator: an outer-loop method with a
weighted inner average and no restarts (run_free_svrg), a single-loop
method with coin-flip anchor resets and a decaying step size
(run_lsvrg_d), and the classic restarting baseline (run_reference_svrg).
All traces count individual per-example gradient evaluations, which is
the complexity measure the tuning module's formulas predict.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .problem import smoothness_profile
from .sampling import expected_residual, expected_smoothness, subsampled_gradient

# ||x||^2 beyond this counts as divergence (also catches NaN/Inf)
_NORM_SQ_CAP = 1e30


class DivergenceError(RuntimeError):
    """Iterate left the representable range; the step size is too large."""


@dataclass(frozen=True)
class TraceRecord:
    grad_evals: int
    epoch_equiv: float
    wall_s: float
    suboptimality: float | None
    dist_sq: float | None
    lyapunov: float | None


@dataclass
class RunTrace:
    records: list
    final_x: np.ndarray
    metadata: dict


@dataclass
class FreeSvrgConfig:
    m: int
    alpha: float
    scheme: object
    outer_iters: int
    seed: int
    # draw w_s = x_s^t with probability p_t instead of averaging
    sample_reference: bool = False

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("inner loop length m must be >= 1")
        if self.alpha <= 0:
            raise ValueError("step size alpha must be positive")
        if self.outer_iters < 1:
            raise ValueError("outer_iters must be >= 1")


@dataclass
class LSvrgDConfig:
    p: float
    alpha: float
    scheme: object
    total_iters: int
    seed: int

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ValueError("reset probability p must lie in (0, 1]")
        if self.alpha <= 0:
            raise ValueError("step size alpha must be positive")
        if self.total_iters < 1:
            raise ValueError("total_iters must be >= 1")


def inner_weights(alpha: float, mu: float, m: int):
    """Geometric inner-iterate weights.

    Returns (S_m, p) with S_m = sum_{t<m} (1-alpha*mu)^(m-1-t) and
    p_t = (1-alpha*mu)^(m-1-t)/S_m, so later iterates weigh more.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    prod = alpha * mu
    if not 0 < prod < 1:
        raise ValueError(f"alpha*mu = {prod:g} must lie in (0, 1); "
                         "the step size is too large for valid weights")
    powers = (1.0 - prod) ** np.arange(m - 1, -1, -1, dtype=float)
    total = float(powers.sum())
    return total, powers / total


def variance_reduced_gradient(model, x, w, grad_f_w, realization):
    """grad f_v(x) - grad f_v(w) + grad f(w), sharing one realization
    between both sub-sampled terms. Costs 2|S| per-example gradients."""
    g_x = subsampled_gradient(model, x, realization)
    g_w = subsampled_gradient(model, w, realization)
    return g_x - g_w + grad_f_w


def _check_x0(x0, d):
    x = np.array(x0, dtype=float)
    if x.shape != (d,):
        raise ValueError(f"x0 must have shape ({d},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    return x


def _guard(x, alpha, where):
    norm_sq = float(x @ x)
    if not norm_sq <= _NORM_SQ_CAP:
        raise DivergenceError(
            f"diverged at {where} with step size {alpha:g} "
            f"(||x||^2 = {norm_sq:g})")


def _suboptimality(value, f_star):
    raw = value - f_star
    # a reference f* carries float error; tiny negatives are zero
    if -1e-9 < raw < 0.0:
        return 0.0
    return raw


class _Recorder:
    """Accumulates trace records; keeps grad_evals strictly increasing by
    replacing the previous record on a tie."""

    def __init__(self, model, reference, lyap_fn):
        self.model = model
        self.reference = reference
        self.lyap_fn = lyap_fn
        self.records = []

    def snapshot(self, evals, wall, x, w, extra=None):
        sub = dist = lyap = None
        if self.reference is not None:
            x_star, f_star = self.reference
            diff = x - x_star
            dist = float(diff @ diff)
            sub = _suboptimality(self.model.value(x), f_star)
            if self.lyap_fn is not None:
                anchor_gap = _suboptimality(self.model.value(w), f_star)
                lyap = dist + self.lyap_fn(anchor_gap, extra)
        rec = TraceRecord(grad_evals=evals,
                          epoch_equiv=evals / self.model.n,
                          wall_s=wall, suboptimality=sub, dist_sq=dist,
                          lyapunov=lyap)
        if self.records and self.records[-1].grad_evals == evals:
            self.records[-1] = rec
        else:
            self.records.append(rec)


def run_free_svrg(model, cfg: FreeSvrgConfig, x0, reference=None,
                  profile=None) -> RunTrace:
    """Outer-loop method without restarts: each loop anchors at the
    weighted average of the previous loop's inner iterates and the inner
    sequence carries over."""
    prof = profile if profile is not None else smoothness_profile(model)
    S_m, p_t = inner_weights(cfg.alpha, prof.mu, cfg.m)
    decay = 1.0 - cfg.alpha * prof.mu
    rho = None
    lyap_fn = None
    if reference is not None:
        rho = expected_residual(cfg.scheme, prof)
        coeff = 8.0 * cfg.alpha**2 * rho * S_m
        lyap_fn = lambda anchor_gap, extra: coeff * anchor_gap

    rng = np.random.default_rng(cfg.seed)
    x = _check_x0(x0, model.d)
    w = x.copy()
    evals = 0
    recorder = _Recorder(model, reference, lyap_fn)
    recorder.snapshot(evals, 0.0, x, w)

    started = time.perf_counter()
    for s in range(cfg.outer_iters):
        grad_w = model.full_gradient(w)
        evals += model.n
        acc = np.zeros(model.d)
        picked = None
        if cfg.sample_reference:
            t_star = int(rng.choice(cfg.m, p=p_t))
        for t in range(cfg.m):
            acc = acc * decay + x
            if cfg.sample_reference and t == t_star:
                picked = x.copy()
            r = cfg.scheme.draw(rng)
            g = variance_reduced_gradient(model, x, w, grad_w, r)
            evals += 2 * r.indices.size
            x = x - cfg.alpha * g
            _guard(x, cfg.alpha, f"outer loop {s + 1}, inner step {t}")
        w = picked if cfg.sample_reference else acc / S_m
        recorder.snapshot(evals, time.perf_counter() - started, x, w)

    metadata = {
        "algorithm": "free_svrg",
        "m": cfg.m, "alpha": cfg.alpha, "outer_iters": cfg.outer_iters,
        "seed": cfg.seed, "scheme": cfg.scheme.kind,
        "sample_reference": cfg.sample_reference,
        "n": model.n, "d": model.d,
        "mu": prof.mu, "L": prof.L, "L_max": prof.L_max,
        "S_m": S_m, "expected_residual": rho,
        "grad_evals_total": evals,
    }
    return RunTrace(records=recorder.records, final_x=x, metadata=metadata)


def run_lsvrg_d(model, cfg: LSvrgDConfig, x0, reference=None,
                profile=None) -> RunTrace:
    """Single-loop method: every step uses the current anchor, then a
    p-coin decides whether to re-anchor (resetting the step size) or to
    shrink the step size by sqrt(1-p)."""
    lyap_fn = None
    if reference is not None:
        prof = profile if profile is not None else smoothness_profile(model)
        L_s = expected_smoothness(cfg.scheme, prof)
        base = 8.0 * L_s / (cfg.p * (3.0 - 2.0 * cfg.p))
        # extra carries the step size in force at snapshot time
        lyap_fn = lambda anchor_gap, extra: base * extra**2 * anchor_gap

    rng = np.random.default_rng(cfg.seed)
    x = _check_x0(x0, model.d)
    w = x.copy()
    grad_w = model.full_gradient(w)
    evals = model.n
    batch = float(np.sum(cfg.scheme.inclusion_probabilities()))
    every = max(1, math.ceil(model.n / batch - 1e-9))

    recorder = _Recorder(model, reference, lyap_fn)
    alpha_k = cfg.alpha
    recorder.snapshot(evals, 0.0, x, w, extra=alpha_k)

    steps_since_reset = 0
    resets = 0
    started = time.perf_counter()
    for k in range(cfg.total_iters):
        r = cfg.scheme.draw(rng)
        g = variance_reduced_gradient(model, x, w, grad_w, r)
        evals += 2 * r.indices.size
        x_prev = x
        x = x - alpha_k * g
        if rng.random() < cfg.p:
            w = x_prev
            grad_w = model.full_gradient(w)
            evals += model.n
            alpha_k = cfg.alpha
            steps_since_reset = 0
            resets += 1
        else:
            steps_since_reset += 1
            alpha_k = cfg.alpha * (1.0 - cfg.p) ** (steps_since_reset / 2)
        _guard(x, cfg.alpha, f"iteration {k + 1}")
        done = k + 1
        if done % every == 0 or done == cfg.total_iters:
            recorder.snapshot(evals, time.perf_counter() - started, x, w,
                              extra=alpha_k)

    metadata = {
        "algorithm": "lsvrg_d",
        "p": cfg.p, "alpha": cfg.alpha, "total_iters": cfg.total_iters,
        "seed": cfg.seed, "scheme": cfg.scheme.kind,
        "n": model.n, "d": model.d,
        "alpha_final": alpha_k, "steps_since_reset": steps_since_reset,
        "reset_count": resets,
        "grad_evals_total": evals,
    }
    return RunTrace(records=recorder.records, final_x=x, metadata=metadata)


def run_reference_svrg(model, scheme, m=None, alpha=None, outer_iters=1,
                       seed=0, x0=None, reference=None,
                       profile=None) -> RunTrace:
    """Classic restarting baseline: every outer loop starts from the
    anchor and the new anchor is the plain average of the inner iterates.
    Defaults follow the usual conservative tuning m = ceil(20 L_max/mu),
    alpha = 1/(10 L_max)."""
    if outer_iters < 1:
        raise ValueError("outer_iters must be >= 1")
    prof = profile if profile is not None else smoothness_profile(model)
    if m is None:
        m = math.ceil(20.0 * prof.L_max / prof.mu)
    if alpha is None:
        alpha = 1.0 / (10.0 * prof.L_max)
    if m < 1:
        raise ValueError("inner loop length m must be >= 1")
    if alpha <= 0:
        raise ValueError("step size alpha must be positive")

    rng = np.random.default_rng(seed)
    w = _check_x0(x0 if x0 is not None else np.zeros(model.d), model.d)
    evals = 0
    recorder = _Recorder(model, reference, None)
    recorder.snapshot(evals, 0.0, w, w)

    started = time.perf_counter()
    for s in range(outer_iters):
        grad_w = model.full_gradient(w)
        evals += model.n
        x = w.copy()
        avg = np.zeros(model.d)
        for t in range(m):
            r = scheme.draw(rng)
            g = variance_reduced_gradient(model, x, w, grad_w, r)
            evals += 2 * r.indices.size
            x = x - alpha * g
            avg += x
            _guard(x, alpha, f"outer loop {s + 1}, inner step {t}")
        w = avg / m
        recorder.snapshot(evals, time.perf_counter() - started, w, w)

    metadata = {
        "algorithm": "reference_svrg",
        "m": m, "alpha": alpha, "outer_iters": outer_iters, "seed": seed,
        "scheme": scheme.kind, "n": model.n, "d": model.d,
        "mu": prof.mu, "L_max": prof.L_max,
        "grad_evals_total": evals,
    }
    return RunTrace(records=recorder.records, final_x=w, metadata=metadata)
