"""Finite-sum objectives f(x) = (1/n) sum_i f_i(x) for ridge and
l2-regularized logistic regression: values, analytic gradients, and the
smoothness / strong-convexity constants everything downstream tunes with.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

_FAMILIES = ("ridge", "logistic")


class PowerIterationError(RuntimeError):
    """Power iteration failed to reach the residual tolerance."""


class ReferenceBudgetError(RuntimeError):
    """Gradient descent ran out of iterations before the target tolerance."""


class LossModel:
    """Loss family + regularizer over a dataset.

    ridge:    f_i(x) = 1/2 (<a_i,x> - y_i)^2 + lam/2 ||x||^2
    logistic: f_i(x) = log(1 + exp(-y_i <a_i,x>)) + lam/2 ||x||^2

    lam >= 0 is accepted here; smoothness_profile refuses models whose
    strong-convexity constant would not be positive.
    """

    def __init__(self, dataset, family: str, lam: float):
        if family not in _FAMILIES:
            raise ValueError(f"unknown loss family {family!r}")
        if lam < 0:
            raise ValueError("regularizer lam must be >= 0")
        if family == "logistic":
            bad = set(np.unique(dataset.labels)) - {-1.0, 1.0}
            if bad:
                raise ValueError(f"logistic loss needs +/-1 labels, got {bad}")
        self.dataset = dataset
        self.family = family
        self.lam = float(lam)

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def d(self) -> int:
        return self.dataset.d

    def _margins(self, x):
        return self.dataset.rows @ x

    def value(self, x) -> float:
        z = self._margins(x)
        y = self.dataset.labels
        reg = 0.5 * self.lam * float(x @ x)
        if self.family == "ridge":
            return 0.5 * float(np.mean((z - y) ** 2)) + reg
        # np.logaddexp(0, -t) is the overflow-safe log(1 + exp(-t))
        return float(np.mean(np.logaddexp(0.0, -y * z))) + reg

    def value_i(self, x, i: int) -> float:
        a = self.dataset.row(i)
        y = self.dataset.labels[i]
        reg = 0.5 * self.lam * float(x @ x)
        t = float(a @ x)
        if self.family == "ridge":
            return 0.5 * (t - y) ** 2 + reg
        return float(np.logaddexp(0.0, -y * t)) + reg

    def _residual_weights(self, z, y):
        # c_i such that grad of the data term is (1/n) sum c_i a_i
        if self.family == "ridge":
            return z - y
        return -y * expit(-y * z)

    def gradient_i(self, x, i: int):
        a = self.dataset.row(i)
        y = self.dataset.labels[i]
        c = self._residual_weights(np.array([float(a @ x)]), np.array([y]))[0]
        return c * a + self.lam * x

    def full_gradient(self, x):
        z = self._margins(x)
        c = self._residual_weights(z, self.dataset.labels)
        g = self.dataset.rows.T @ (c / self.n)
        return np.asarray(g).ravel() + self.lam * x

    def mean_weighted_gradient(self, x, indices, weights):
        """(1/n) sum_{i in indices} weights_i * grad f_i(x); the workhorse
        behind sub-sampled gradient estimates. Cost O(|indices| * d)."""
        indices = np.asarray(indices, dtype=np.int64)
        weights = np.asarray(weights, dtype=float)
        if indices.size == 0:
            return np.zeros(self.d)
        sub = self.dataset.rows[indices]
        z = np.asarray(sub @ x).ravel()
        c = self._residual_weights(z, self.dataset.labels[indices])
        g = sub.T @ (weights * c / self.n)
        return np.asarray(g).ravel() + (weights.sum() / self.n) * self.lam * x


def _row_norms_sq(rows) -> np.ndarray:
    if sp.issparse(rows):
        return np.asarray(rows.multiply(rows).sum(axis=1)).ravel()
    return (rows**2).sum(axis=1)


def _power_method(matvec, dim, rel_tol, max_iters, abs_floor=0.0) -> float:
    """Largest eigenvalue of a symmetric PSD operator given by matvec.

    Stops when the eigenpair residual ||Mv - lam v|| drops below
    max(rel_tol * |lam|, abs_floor). Deterministic start vector.
    """
    rng = np.random.default_rng(0)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    resid = np.inf
    for _ in range(max_iters):
        w = matvec(v)
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0
        lam = float(v @ w)
        resid = float(np.linalg.norm(w - lam * v))
        if resid <= max(rel_tol * abs(lam), abs_floor):
            return lam
        v = w / norm_w
    raise PowerIterationError(
        f"no convergence after {max_iters} iterations "
        f"(residual {resid:.3e}, estimate {lam:.6e})"
    )


def largest_gram_eigenvalue(rows, rel_tol: float = 1e-8,
                            max_iters: int = 10000) -> float:
    """lambda_max(A^T A) via power iteration on v -> A^T (A v).

    Never forms the Gram matrix, so sparse row storage stays sparse."""
    d = rows.shape[1]
    return _power_method(
        lambda v: np.asarray(rows.T @ (rows @ v)).ravel(), d, rel_tol, max_iters
    )


def smallest_gram_eigenvalue(rows, rel_tol: float = 1e-8,
                             max_iters: int = 10000) -> float:
    """lambda_min(A^T A) via the complement trick: with c = lambda_max,
    lambda_min = c - lambda_max(cI - A^T A). Absolute accuracy ~rel_tol*c."""
    top = largest_gram_eigenvalue(rows, rel_tol, max_iters)
    if top == 0.0:
        return 0.0
    d = rows.shape[1]
    shifted = _power_method(
        lambda v: top * v - np.asarray(rows.T @ (rows @ v)).ravel(),
        d, rel_tol, max_iters, abs_floor=rel_tol * top,
    )
    return max(top - shifted, 0.0)


def per_example_smoothness(model: LossModel) -> np.ndarray:
    """L_i for each example: ||a_i||^2 (+lam) for ridge, ||a_i||^2/4 (+lam)
    for logistic (the 1/4 is the sigmoid curvature bound)."""
    sq = _row_norms_sq(model.dataset.rows)
    factor = 1.0 if model.family == "ridge" else 4.0
    return sq / factor + model.lam


@dataclass(eq=False)
class SmoothnessProfile:
    """All smoothness constants of one model: per-example L_i, their max,
    the full-objective L, and the strong convexity constant mu."""

    L_i: np.ndarray
    L_max: float
    L: float
    mu: float
    n: int
    model: LossModel | None = field(default=None, repr=False)


def smoothness_profile(model: LossModel, rel_tol: float = 1e-8,
                       max_iters: int = 10000) -> SmoothnessProfile:
    """Compute the model's smoothness profile.

    ridge:    L = lambda_max(A^T A)/n + lam,  mu = lambda_min(A^T A)/n + lam
    logistic: L = lambda_max(A^T A)/(4n) + lam,  mu = lam (the data term is
              only positive semidefinite, so the regularizer is the honest
              lower bound)

    Raises if mu would not be positive or the ordering invariants
    L_max >= L >= mu and nL >= L_max fail beyond eigensolver tolerance.
    """
    rows = model.dataset.rows
    n = model.n
    L_i = per_example_smoothness(model)
    L_max = float(L_i.max())
    top = largest_gram_eigenvalue(rows, rel_tol, max_iters)
    factor = 1.0 if model.family == "ridge" else 4.0
    L = top / (factor * n) + model.lam
    if model.family == "ridge":
        mu = smallest_gram_eigenvalue(rows, rel_tol, max_iters) / n + model.lam
    else:
        mu = model.lam
    if mu <= 0.0:
        raise ValueError(
            "strong convexity constant is not positive; "
            "use a regularizer lam > 0"
        )
    slack = 1e-6 * max(L_max, 1.0)
    if not (L_max >= L - slack and L >= mu - slack and n * L >= L_max - slack):
        raise RuntimeError(
            f"smoothness ordering violated: L_max={L_max}, L={L}, mu={mu}, n={n}"
        )
    return SmoothnessProfile(L_i=L_i, L_max=L_max, L=L, mu=min(mu, L),
                             n=n, model=model)


def block_smoothness_sum(model: LossModel, indices) -> float:
    """Smoothness constant of sum_{i in B} f_i: the block Gram eigenvalue
    (scaled for the loss curvature) plus |B| copies of the regularizer."""
    indices = np.asarray(indices, dtype=np.int64)
    sub = model.dataset.rows[indices]
    factor = 1.0 if model.family == "ridge" else 4.0
    return largest_gram_eigenvalue(sub) / factor + indices.size * model.lam


def reference_solution(model: LossModel, tol: float,
                       max_iters: int = 200000,
                       profile: SmoothnessProfile | None = None):
    """Near-exact minimizer by deterministic gradient descent.

    Steps with 1/L from the origin until ||grad f(x)|| <= tol * mu, which
    by the PL inequality puts f(x) - f* below tol^2 * mu / 2. Returns
    (x, f(x)).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    prof = profile if profile is not None else smoothness_profile(model)
    step = 1.0 / prof.L
    target = tol * prof.mu
    x = np.zeros(model.d)
    grad_norm = np.inf
    for _ in range(max_iters):
        g = model.full_gradient(x)
        grad_norm = float(np.linalg.norm(g))
        if grad_norm <= target:
            return x, model.value(x)
        x = x - step * g
    raise ReferenceBudgetError(
        f"{max_iters} iterations exhausted; achieved gradient norm "
        f"{grad_norm:.3e} vs target {target:.3e}"
    )
