"""Sampling schemes over [n], their sampling vectors, and the expected
smoothness / expected residual constants that govern step sizes.

A scheme assigns probabilities to subsets S of the ground set. Each draw
is turned into the unbiased reweighting v_i = 1[i in S]/p_i, so the
sub-sampled gradient (1/n) sum_i v_i grad f_i matches the full gradient
in expectation. Constants come in closed form per kind, with full-support
enumeration available at small n as the oracle.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .problem import block_smoothness_sum

_MAX_SUPPORT = 10**6
_PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class SampleRealization:
    """One drawn subset with its sampling-vector weights 1/p_i."""

    indices: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class ConstantPair:
    expected_smoothness: float
    expected_residual: float


class SamplingScheme:
    """Base class; subclasses define the law, closed-form constants, and
    pairwise inclusion probabilities."""

    kind = ""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("ground-set size n must be >= 1")
        self.n = int(n)

    def _realize(self, indices) -> SampleRealization:
        indices = np.asarray(indices, dtype=np.int64)
        p = self.inclusion_probabilities()
        return SampleRealization(indices=indices, weights=1.0 / p[indices])

    def inclusion_probabilities(self) -> np.ndarray:
        raise NotImplementedError

    def pair_probability_matrix(self) -> np.ndarray:
        """P_ij = P(i in S and j in S); diagonal is the marginals."""
        raise NotImplementedError

    def draw(self, rng) -> SampleRealization:
        raise NotImplementedError

    def enumerate_support(self):
        """All (probability, realization) pairs. Oracle use; small n only."""
        raise NotImplementedError

    def variance_matrix(self) -> np.ndarray:
        """Var(v): (i,i) entry 1/p_i - 1, (i,j) entry P_ij/(p_i p_j) - 1."""
        p = self.inclusion_probabilities()
        var = self.pair_probability_matrix() / np.outer(p, p) - 1.0
        np.fill_diagonal(var, 1.0 / p - 1.0)
        return var

    def variance_spectral_norm(self) -> float:
        return float(max(np.linalg.eigvalsh(self.variance_matrix())[-1], 0.0))

    def _smoothness_constant(self, profile) -> float:
        raise NotImplementedError

    def _residual_constant(self, profile) -> float:
        raise NotImplementedError


class BNiceSampling(SamplingScheme):
    """Uniform over all subsets of size b (mini-batching without
    replacement)."""

    kind = "b_nice"

    def __init__(self, n: int, b: int):
        super().__init__(n)
        if not 1 <= b <= self.n:
            raise ValueError(f"batch size b={b} outside 1..{self.n}")
        self.b = int(b)

    def inclusion_probabilities(self):
        return np.full(self.n, self.b / self.n)

    def pair_probability_matrix(self):
        n, b = self.n, self.b
        off = b * (b - 1) / (n * (n - 1)) if n > 1 else 1.0
        P = np.full((n, n), off)
        np.fill_diagonal(P, b / n)
        return P

    def draw(self, rng):
        return self._realize(np.sort(rng.choice(self.n, size=self.b,
                                                replace=False)))

    def enumerate_support(self):
        count = math.comb(self.n, self.b)
        if count > _MAX_SUPPORT:
            raise ValueError(f"support of size {count} is too large to "
                             "enumerate")
        prob = 1.0 / count
        return [(prob, self._realize(subset))
                for subset in itertools.combinations(range(self.n), self.b)]

    def variance_spectral_norm(self):
        n, b = self.n, self.b
        if b == n or n == 1:
            return 0.0
        return n * (n - b) / (b * (n - 1))

    def _smoothness_constant(self, profile):
        n, b = self.n, self.b
        if n == 1:
            return profile.L
        return ((n - b) / (b * (n - 1)) * profile.L_max
                + n * (b - 1) / (b * (n - 1)) * profile.L)

    def _residual_constant(self, profile):
        n, b = self.n, self.b
        if n == 1:
            return 0.0
        return (n - b) / (b * (n - 1)) * profile.L_max


class SingleElementSampling(SamplingScheme):
    """S is one index, drawn by an arbitrary probability vector."""

    kind = "single_element"

    def __init__(self, probabilities):
        p = np.asarray(probabilities, dtype=float)
        super().__init__(p.size)
        if np.any(p <= 0):
            raise ValueError("all probabilities must be positive")
        if abs(p.sum() - 1.0) > _PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {p.sum()}, expected 1")
        self.p = p

    def inclusion_probabilities(self):
        return self.p

    def pair_probability_matrix(self):
        P = np.zeros((self.n, self.n))
        np.fill_diagonal(P, self.p)
        return P

    def draw(self, rng):
        return self._realize([rng.choice(self.n, p=self.p)])

    def enumerate_support(self):
        return [(float(self.p[i]), self._realize([i])) for i in range(self.n)]

    def _smoothness_constant(self, profile):
        return float(np.max(profile.L_i / self.p)) / self.n

    def _residual_constant(self, profile):
        # variance is bounded by the second moment, so rho = L works
        return self._smoothness_constant(profile)


class PartitionSampling(SamplingScheme):
    """S is one block of a fixed partition of [n], drawn by block
    probability."""

    kind = "partition"

    def __init__(self, blocks, block_probabilities):
        blocks = [np.sort(np.asarray(blk, dtype=np.int64)) for blk in blocks]
        q = np.asarray(block_probabilities, dtype=float)
        if len(blocks) != q.size:
            raise ValueError("one probability per block required")
        flat = np.concatenate(blocks) if blocks else np.array([], dtype=np.int64)
        n = int(flat.max()) + 1 if flat.size else 0
        if flat.size != n or np.unique(flat).size != n:
            raise ValueError("blocks do not partition the ground set")
        super().__init__(n)
        if np.any(q <= 0):
            raise ValueError("all block probabilities must be positive")
        if abs(q.sum() - 1.0) > _PROB_SUM_TOL:
            raise ValueError(f"block probabilities sum to {q.sum()}, "
                             "expected 1")
        self.blocks = blocks
        self.q = q
        self._block_of = np.empty(n, dtype=np.int64)
        for k, blk in enumerate(blocks):
            self._block_of[blk] = k

    def inclusion_probabilities(self):
        return self.q[self._block_of]

    def pair_probability_matrix(self):
        same = self._block_of[:, None] == self._block_of[None, :]
        return np.where(same, self.inclusion_probabilities()[None, :], 0.0)

    def draw(self, rng):
        k = int(rng.choice(self.q.size, p=self.q))
        return self._realize(self.blocks[k])

    def enumerate_support(self):
        return [(float(self.q[k]), self._realize(blk))
                for k, blk in enumerate(self.blocks)]

    def variance_spectral_norm(self):
        # Var(v) acts on the span of the block indicators as
        # diag(|B|/q_B) - s s^T with s_B = sqrt(|B|), and as zero elsewhere
        sizes = np.array([blk.size for blk in self.blocks], dtype=float)
        s = np.sqrt(sizes)
        K = np.diag(sizes / self.q) - np.outer(s, s)
        return float(max(np.linalg.eigvalsh(K)[-1], 0.0))

    def _smoothness_constant(self, profile):
        if profile.model is None:
            raise ValueError("partition constants need the model reference "
                             "carried by the smoothness profile")
        worst = max(block_smoothness_sum(profile.model, blk) / q
                    for blk, q in zip(self.blocks, self.q))
        return worst / self.n

    def _residual_constant(self, profile):
        return self.variance_spectral_norm() * profile.L_max / self.n


class IndependentSampling(SamplingScheme):
    """Every index enters S by its own independent coin flip."""

    kind = "independent"

    def __init__(self, probabilities):
        p = np.asarray(probabilities, dtype=float)
        super().__init__(p.size)
        if np.any(p <= 0) or np.any(p > 1):
            raise ValueError("inclusion probabilities must lie in (0, 1]")
        self.p = p

    def inclusion_probabilities(self):
        return self.p

    def pair_probability_matrix(self):
        P = np.outer(self.p, self.p)
        np.fill_diagonal(P, self.p)
        return P

    def draw(self, rng):
        return self._realize(np.flatnonzero(rng.random(self.n) < self.p))

    def enumerate_support(self):
        free = np.flatnonzero(self.p < 1.0)
        certain = np.flatnonzero(self.p == 1.0)
        if 2 ** free.size > _MAX_SUPPORT:
            raise ValueError(f"support of size 2^{free.size} is too large "
                             "to enumerate")
        support = []
        for coins in itertools.product((False, True), repeat=free.size):
            mask = np.array(coins, dtype=bool)
            prob = float(np.prod(np.where(mask, self.p[free],
                                          1.0 - self.p[free])))
            indices = np.sort(np.concatenate([certain, free[mask]]))
            support.append((prob, self._realize(indices)))
        return support

    def variance_spectral_norm(self):
        return float(1.0 / self.p.min() - 1.0)

    def _smoothness_constant(self, profile):
        extra = (1.0 - self.p) / self.p * profile.L_i / self.n
        return profile.L + float(np.max(extra))

    def _residual_constant(self, profile):
        return self.variance_spectral_norm() * profile.L_max / self.n


def expected_smoothness(scheme: SamplingScheme, profile) -> float:
    """Constant L satisfying
    E||grad f_v(x) - grad f_v(x*)||^2 <= 2 L (f(x) - f(x*))."""
    return float(scheme._smoothness_constant(profile))


def expected_residual(scheme: SamplingScheme, profile) -> float:
    """Constant rho satisfying, with h = grad f_v(x) - grad f_v(x*),
    E||h - E[h]||^2 <= 2 rho (f(x) - f(x*))."""
    return float(scheme._residual_constant(profile))


def constant_pair(scheme: SamplingScheme, profile) -> ConstantPair:
    L_s = expected_smoothness(scheme, profile)
    rho = expected_residual(scheme, profile)
    if L_s < profile.mu * (1.0 - 1e-9):
        raise RuntimeError(
            f"expected smoothness {L_s} fell below mu={profile.mu}; "
            "constants are inconsistent")
    return ConstantPair(expected_smoothness=L_s, expected_residual=rho)


def subsampled_gradient(model, x, realization: SampleRealization):
    """(1/n) sum_{i in S} v_i grad f_i(x); unbiased for the full gradient."""
    return model.mean_weighted_gradient(x, realization.indices,
                                        realization.weights)


def monte_carlo_mean_weights(scheme: SamplingScheme, draws: int, rng):
    """Empirical mean of the sampling vector; fallback unbiasedness check
    when the support is too large to enumerate."""
    acc = np.zeros(scheme.n)
    for _ in range(draws):
        r = scheme.draw(rng)
        acc[r.indices] += r.weights
    return acc / draws


def _contiguous_blocks(n: int, b: int):
    return [np.arange(start, min(start + b, n))
            for start in range(0, n, b)]


def make_scheme(kind: str, n: int, b: int | None = None,
                probabilities=None) -> SamplingScheme:
    """Build a scheme from flat config values.

    b_nice and partition take the batch/block size b (partition blocks are
    contiguous, block probability proportional to size); single_element
    and independent take a probability vector of length n.
    """
    if kind == "b_nice":
        if b is None:
            raise ValueError("b_nice needs a batch size b")
        return BNiceSampling(n, b)
    if kind == "single_element":
        if probabilities is None:
            raise ValueError("single_element needs a probability vector")
        return SingleElementSampling(probabilities)
    if kind == "partition":
        if b is None:
            raise ValueError("partition needs a block size b")
        blocks = _contiguous_blocks(n, b)
        sizes = np.array([blk.size for blk in blocks], dtype=float)
        return PartitionSampling(blocks, sizes / n)
    if kind == "independent":
        if probabilities is None:
            raise ValueError("independent needs a probability vector")
        return IndependentSampling(probabilities)
    raise ValueError(f"unknown sampling kind {kind!r}")
