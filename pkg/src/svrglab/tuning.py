"""Closed-form tuning for the anchored and decreasing-step solvers.

Total-complexity models count individual gradient evaluations needed to
reach a target accuracy.  Every closed-form minimizer here can be
cross-checked against ``brute_force_optimal_batch``, which does the
integer grid search directly.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .problem import SmoothnessProfile
from .sampling import BNiceSampling, expected_residual, expected_smoothness

_MAX_GRID = 10**6
_FAMILIES = ("free_svrg", "free_svrg_m_over_b", "lsvrg_d")


def _check_batch(b, n):
    if not 1 <= b <= n or int(b) != b:
        raise ValueError(f"b must lie in [1, n] and be integral, got b={b} n={n}")


def _check_epsilon(epsilon):
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")


def _bnice_pair(b, profile):
    scheme = BNiceSampling(profile.n, int(b))
    return (expected_smoothness(scheme, profile),
            expected_residual(scheme, profile))


def step_size_free(b, profile):
    """Largest step size for which the anchored solver's envelope still
    contracts, equal to 1/(2(L(b) + 2 rho(b))) for uniform mini-batching."""
    n = profile.n
    _check_batch(b, n)
    if n == 1 or b == n:
        return 1.0 / (2.0 * profile.L)
    if b == 1:
        return 1.0 / (6.0 * profile.L_max)
    return 0.5 * b * (n - 1) / (3.0 * (n - b) * profile.L_max
                                + n * (b - 1) * profile.L)


def zeta(p):
    """Shrink factor of the decreasing-step bound; rises from 7/4 to 3."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if p == 1.0:
        return 3.0
    # 1 - (1-p)^{3/2} without cancellation for small p
    core = -math.expm1(1.5 * math.log1p(-p))
    return (7.0 - 4.0 * p) * core / (p * (2.0 - p) * (3.0 - 2.0 * p))


def step_size_lsvrgd(p, b, profile):
    smooth, _ = _bnice_pair_checked(b, profile)
    return 1.0 / (2.0 * zeta(p) * smooth)


def _bnice_pair_checked(b, profile):
    _check_batch(b, profile.n)
    return _bnice_pair(b, profile)


def total_complexity_free(b, m, profile, epsilon=1e-4):
    """Gradient evaluations for the anchored solver with batch size b and
    loop length m.  m may be fractional: m = n/b models one full data pass
    per anchor refresh."""
    _check_epsilon(epsilon)
    if not m >= 1:
        raise ValueError(f"m must be >= 1, got {m}")
    smooth, resid = _bnice_pair_checked(b, profile)
    n = profile.n
    return (2.0 * (n / m + 2.0 * b)
            * max((smooth + 2.0 * resid) / profile.mu, float(m))
            * math.log(1.0 / epsilon))


def total_complexity_lsvrgd(b, p, profile, epsilon=1e-4):
    """Gradient evaluations for the decreasing-step solver with batch size
    b and reset probability p."""
    _check_epsilon(epsilon)
    z = zeta(p)
    smooth, _ = _bnice_pair_checked(b, profile)
    return (2.0 * (2.0 * b + p * profile.n)
            * max(1.5 * z * smooth / profile.mu, 1.0 / p)
            * math.log(1.0 / epsilon))


def optimal_loop(b, profile):
    """Loop length minimizing the anchored solver's complexity at batch
    size b, rounded up to an integer."""
    smooth, resid = _bnice_pair_checked(b, profile)
    return max(1, math.ceil((smooth + 2.0 * resid) / profile.mu))


def _floor_clamp(value, n):
    if not math.isfinite(value):
        return n
    return int(max(1, min(n, math.floor(value))))


def optimal_batch_m_eq_n(profile):
    """Batch size minimizing complexity when the loop length is fixed at n.

    Case boundaries resolve to the branch listed first; the complexity is
    continuous across them so either choice is near-optimal.
    """
    n, L, L_max, mu = profile.n, profile.L, profile.L_max, profile.mu
    if n == 1:
        return 1
    hat_den = n * L - 3.0 * L_max
    b_hat = (math.sqrt((n / 2.0) * (3.0 * L_max - L) / hat_den)
             if hat_den > 0 else math.inf)
    til_den = n * (n - 1) * mu - n * L + 3.0 * L_max
    b_til = ((3.0 * L_max - L) * n / til_den
             if til_den > 0 else math.inf)
    if n <= L / mu:
        if L_max >= n * L / 3.0:
            return n
        return _floor_clamp(b_hat, n)
    if n < 3.0 * L_max / mu:
        if L_max >= n * L / 3.0:
            return _floor_clamp(b_til, n)
        return _floor_clamp(min(b_hat, b_til), n)
    return 1


def optimal_batch_m_eq_n_over_b(profile):
    """Batch size minimizing complexity when each anchor refresh makes one
    full data pass (loop length n/b).

    Every b up to the returned value is optimal; the largest is returned
    because bigger batches parallelize better.
    """
    n, L, L_max, mu = profile.n, profile.L, profile.L_max, profile.mu
    if n == 1:
        return 1
    if n <= 3.0 * L_max / L:
        return n
    if n <= 3.0 * L_max / mu:
        return 1
    # crossover of b * kappa(b) = n: complexity is flat left of it
    den = n * L - 3.0 * L_max
    b_bar = (n * (n - 1) * mu - n * (3.0 * L_max - L)) / den if den > 0 else math.inf
    return _floor_clamp(b_bar, n)


def optimal_batch_lsvrgd(profile):
    """Batch size minimizing the decreasing-step complexity at reset
    probability 1/n."""
    n, L, L_max, mu = profile.n, profile.L, profile.L_max, profile.mu
    if n == 1:
        return 1
    c = 1.5 * zeta(1.0 / n)
    if n >= c * L_max / mu:
        return 1
    hat_den = n * L - L_max
    b_hat = (math.sqrt((n / 2.0) * (L_max - L) / hat_den)
             if hat_den > 0 else math.inf)
    if c * L / mu < n:
        til_den = mu * n * (n - 1) - c * (n * L - L_max)
        b_til = c * n * (L_max - L) / til_den if til_den > 0 else math.inf
        return _floor_clamp(min(b_hat, b_til), n)
    return _floor_clamp(b_hat, n)


class BatchSearch(NamedTuple):
    best_b: int
    batch_grid: np.ndarray
    complexity_grid: np.ndarray


def brute_force_optimal_batch(profile, complexity_fn):
    """Exact integer minimization of complexity_fn over b in [1, n].

    Ties break toward the smaller batch size.
    """
    n = profile.n
    if n > _MAX_GRID:
        raise ValueError(f"exhaustive batch search needs n <= {_MAX_GRID}, got {n}")
    batch_grid = np.arange(1, n + 1, dtype=np.int64)
    complexity_grid = np.array([float(complexity_fn(int(b))) for b in batch_grid])
    best_b = int(batch_grid[int(np.argmin(complexity_grid))])
    return BatchSearch(best_b, batch_grid, complexity_grid)


@dataclass(frozen=True)
class ComplexityModel:
    """A complexity curve over batch sizes for one solver configuration."""

    profile: SmoothnessProfile
    family: str
    m: Optional[float] = None
    p: Optional[float] = None
    epsilon: float = 1e-4

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown complexity family {self.family!r}")
        _check_epsilon(self.epsilon)
        if self.family == "free_svrg" and not (self.m is not None and self.m >= 1):
            raise ValueError("free_svrg family needs a loop length m >= 1")
        if self.family == "lsvrg_d" and not (
                self.p is not None and 0.0 < self.p <= 1.0):
            raise ValueError("lsvrg_d family needs a reset probability p in (0, 1]")

    def evaluate(self, b):
        if self.family == "free_svrg":
            return total_complexity_free(b, self.m, self.profile,
                                         epsilon=self.epsilon)
        if self.family == "free_svrg_m_over_b":
            return total_complexity_free(b, self.profile.n / b, self.profile,
                                         epsilon=self.epsilon)
        return total_complexity_lsvrgd(b, self.p, self.profile,
                                       epsilon=self.epsilon)
