"""Oracle tests for the three solvers.

Ground truth comes from degenerate closed-form cases (full-batch m=1 is
gradient descent), from independent step-by-step replays of the update
rules written directly against the pseudocode, and from exact gradient-
evaluation accounting.
"""
import math

import numpy as np
import pytest

from svrglab.dataset import generate_synthetic
from svrglab.problem import LossModel, reference_solution, smoothness_profile
from svrglab.optimizers import (
    DivergenceError,
    FreeSvrgConfig,
    LSvrgDConfig,
    inner_weights,
    run_free_svrg,
    run_lsvrg_d,
    run_reference_svrg,
    variance_reduced_gradient,
)
from svrglab.sampling import BNiceSampling, subsampled_gradient


def ridge_problem(n=30, d=5, lam=0.2, seed=1):
    ds = generate_synthetic(n=n, d=d, seed=seed, kind="regression", noise=0.3)
    model = LossModel(ds, family="ridge", lam=lam)
    prof = smoothness_profile(model)
    x_star, f_star = reference_solution(model, tol=1e-10, profile=prof)
    return model, prof, (x_star, f_star)


def trace_columns(trace, field):
    return [getattr(rec, field) for rec in trace.records]


def traces_equal_ignoring_time(a, b):
    if len(a.records) != len(b.records):
        return False
    for ra, rb in zip(a.records, b.records):
        if (ra.grad_evals, ra.epoch_equiv, ra.suboptimality, ra.dist_sq,
                ra.lyapunov) != (rb.grad_evals, rb.epoch_equiv,
                                 rb.suboptimality, rb.dist_sq, rb.lyapunov):
            return False
    return np.array_equal(a.final_x, b.final_x)


class TestInnerWeights:
    def test_single_step(self):
        S, p = inner_weights(alpha=0.01, mu=1.0, m=1)
        assert S == 1.0
        assert np.array_equal(p, [1.0])

    def test_worked_example(self):
        # alpha*mu = 1/2, m = 3: powers 1/4, 1/2, 1
        S, p = inner_weights(alpha=0.5, mu=1.0, m=3)
        assert S == 1.75
        assert np.array_equal(p, [0.25 / 1.75, 0.5 / 1.75, 1.0 / 1.75])
        assert np.array_equal(p, [1 / 7, 2 / 7, 4 / 7])

    def test_vanishing_step_is_uniform(self):
        S, p = inner_weights(alpha=1e-13, mu=1.0, m=7)
        assert np.max(np.abs(p - 1 / 7)) < 1e-9
        assert S == pytest.approx(7.0, rel=1e-9)

    def test_normalized_and_increasing(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            m = int(rng.integers(1, 60))
            prod = rng.uniform(1e-6, 0.99)
            S, p = inner_weights(alpha=prod, mu=1.0, m=m)
            assert p.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(np.diff(p) >= 0)
            assert S == pytest.approx(
                sum((1 - prod) ** (m - 1 - t) for t in range(m)), rel=1e-12)

    def test_rejects_invalid_step(self):
        with pytest.raises(ValueError, match="alpha"):
            inner_weights(alpha=1.0, mu=1.0, m=3)
        with pytest.raises(ValueError, match="alpha"):
            inner_weights(alpha=0.0, mu=1.0, m=3)
        with pytest.raises(ValueError, match="m"):
            inner_weights(alpha=0.1, mu=1.0, m=0)


class TestVarianceReducedGradient:
    def test_anchored_at_reference(self):
        model, _, _ = ridge_problem()
        rng = np.random.default_rng(2)
        x = rng.standard_normal(model.d)
        grad = model.full_gradient(x)
        r = BNiceSampling(model.n, 4).draw(rng)
        out = variance_reduced_gradient(model, x, x, grad, r)
        assert np.array_equal(out, grad)

    def test_full_batch_is_exact(self):
        model, _, _ = ridge_problem()
        rng = np.random.default_rng(3)
        x = rng.standard_normal(model.d)
        w = rng.standard_normal(model.d)
        r = BNiceSampling(model.n, model.n).draw(rng)
        out = variance_reduced_gradient(model, x, w, model.full_gradient(w), r)
        np.testing.assert_allclose(out, model.full_gradient(x),
                                   rtol=1e-13, atol=1e-15)

    def test_unbiased_over_support(self):
        model, _, _ = ridge_problem(n=8, d=3)
        scheme = BNiceSampling(8, 3)
        rng = np.random.default_rng(4)
        x = rng.standard_normal(model.d)
        w = rng.standard_normal(model.d)
        grad_w = model.full_gradient(w)
        acc = np.zeros(model.d)
        for prob, r in scheme.enumerate_support():
            acc += prob * variance_reduced_gradient(model, x, w, grad_w, r)
        assert np.max(np.abs(acc - model.full_gradient(x))) < 1e-12


def manual_free_svrg(model, scheme, m, alpha, outer_iters, seed, x0, mu):
    """Straight transcription of the update rules, storing every inner
    iterate and averaging explicitly; oracle for the streaming version."""
    _, p_t = inner_weights(alpha, mu, m)
    rng = np.random.default_rng(seed)
    x = x0.copy()
    w = x0.copy()
    for _ in range(outer_iters):
        grad_w = model.full_gradient(w)
        inner = []
        for _ in range(m):
            inner.append(x.copy())
            r = scheme.draw(rng)
            g = variance_reduced_gradient(model, x, w, grad_w, r)
            x = x - alpha * g
        w = sum(pt * xt for pt, xt in zip(p_t, inner))
    return x, w


class TestFreeSvrg:
    def test_full_batch_single_step_is_gradient_descent(self):
        model, prof, ref = ridge_problem()
        x0 = np.zeros(model.d)
        alpha = 1.0 / (2 * prof.L)
        cfg = FreeSvrgConfig(m=1, alpha=alpha,
                             scheme=BNiceSampling(model.n, model.n),
                             outer_iters=30, seed=0)
        trace = run_free_svrg(model, cfg, x0, reference=ref, profile=prof)
        # first loop: anchor equals the iterate, cancellation is exact
        first = x0 - alpha * model.full_gradient(x0)
        one = run_free_svrg(
            model, FreeSvrgConfig(m=1, alpha=alpha,
                                  scheme=BNiceSampling(model.n, model.n),
                                  outer_iters=1, seed=0),
            x0, reference=ref, profile=prof)
        assert np.array_equal(one.final_x, first)
        # later loops anchor one step behind; agreement to rounding only
        x = x0.copy()
        for _ in range(30):
            x = x - alpha * model.full_gradient(x)
        np.testing.assert_allclose(trace.final_x, x, rtol=1e-12, atol=1e-14)

    def test_deterministic_given_seed(self):
        model, prof, ref = ridge_problem()
        cfg = FreeSvrgConfig(m=10, alpha=0.01, scheme=BNiceSampling(model.n, 3),
                             outer_iters=5, seed=42)
        x0 = np.ones(model.d)
        t1 = run_free_svrg(model, cfg, x0, reference=ref, profile=prof)
        t2 = run_free_svrg(model, cfg, x0, reference=ref, profile=prof)
        assert traces_equal_ignoring_time(t1, t2)

    def test_matches_manual_replay(self):
        model, prof, _ = ridge_problem(n=12, d=4)
        scheme = BNiceSampling(12, 3)
        alpha = 0.02
        cfg = FreeSvrgConfig(m=5, alpha=alpha, scheme=scheme,
                             outer_iters=6, seed=7)
        x0 = np.full(model.d, 0.5)
        trace = run_free_svrg(model, cfg, x0, profile=prof)
        x_manual, _ = manual_free_svrg(model, scheme, 5, alpha, 6, 7, x0,
                                       prof.mu)
        np.testing.assert_allclose(trace.final_x, x_manual,
                                   rtol=1e-8, atol=1e-12)

    def test_gradient_evaluation_accounting(self):
        model, prof, _ = ridge_problem()
        n, b, m, S = model.n, 4, 7, 9
        cfg = FreeSvrgConfig(m=m, alpha=0.01, scheme=BNiceSampling(n, b),
                             outer_iters=S, seed=3)
        trace = run_free_svrg(model, cfg, np.zeros(model.d), profile=prof)
        evals = trace_columns(trace, "grad_evals")
        assert evals[0] == 0
        assert evals[-1] == S * (n + 2 * b * m)
        assert all(x < y for x, y in zip(evals, evals[1:]))
        assert len(trace.records) == S + 1
        assert trace_columns(trace, "epoch_equiv") == [e / n for e in evals]

    def test_desk_scale_convergence(self):
        ds = generate_synthetic(n=100, d=10, seed=5, kind="regression",
                                noise=0.4)
        model = LossModel(ds, family="ridge", lam=0.1)
        prof = smoothness_profile(model)
        x_star, f_star = reference_solution(model, tol=1e-10, profile=prof)
        cfg = FreeSvrgConfig(m=100, alpha=1.0 / (6 * prof.L_max),
                             scheme=BNiceSampling(100, 1),
                             outer_iters=200, seed=11)
        trace = run_free_svrg(model, cfg, np.zeros(model.d),
                              reference=(x_star, f_star), profile=prof)
        subopt = trace_columns(trace, "suboptimality")
        assert subopt[-1] <= subopt[0] / 10

    def test_divergence_detected(self):
        # alpha*mu < 1 keeps the weights valid, but alpha*L_max >> 2
        # blows the iterates up
        model, prof, _ = ridge_problem()
        alpha = 0.9 / prof.mu
        cfg = FreeSvrgConfig(m=10, alpha=alpha,
                             scheme=BNiceSampling(model.n, 2),
                             outer_iters=50, seed=0)
        with pytest.raises(DivergenceError, match="step size"):
            run_free_svrg(model, cfg, np.ones(model.d), profile=prof)

    def test_rejects_step_breaking_weights(self):
        model, prof, _ = ridge_problem()
        cfg = FreeSvrgConfig(m=10, alpha=2.0 / prof.mu,
                             scheme=BNiceSampling(model.n, 2),
                             outer_iters=5, seed=0)
        with pytest.raises(ValueError, match="alpha"):
            run_free_svrg(model, cfg, np.ones(model.d), profile=prof)

    def test_sampled_reference_variant(self):
        model, prof, ref = ridge_problem()
        cfg = FreeSvrgConfig(m=15, alpha=1.0 / (6 * prof.L_max),
                             scheme=BNiceSampling(model.n, 1),
                             outer_iters=60, seed=9, sample_reference=True)
        t1 = run_free_svrg(model, cfg, np.zeros(model.d), reference=ref,
                           profile=prof)
        t2 = run_free_svrg(model, cfg, np.zeros(model.d), reference=ref,
                           profile=prof)
        assert traces_equal_ignoring_time(t1, t2)
        subopt = trace_columns(t1, "suboptimality")
        assert subopt[-1] <= subopt[0] / 5

    def test_initial_record_reflects_start_point(self):
        model, prof, ref = ridge_problem()
        x0 = np.full(model.d, 2.0)
        cfg = FreeSvrgConfig(m=4, alpha=0.01, scheme=BNiceSampling(model.n, 2),
                             outer_iters=2, seed=1)
        trace = run_free_svrg(model, cfg, x0, reference=ref, profile=prof)
        rec = trace.records[0]
        assert rec.suboptimality == pytest.approx(
            model.value(x0) - ref[1], rel=1e-12)
        assert rec.dist_sq == pytest.approx(
            float((x0 - ref[0]) @ (x0 - ref[0])), rel=1e-12)

    def test_config_validation(self):
        scheme = BNiceSampling(5, 2)
        with pytest.raises(ValueError):
            FreeSvrgConfig(m=0, alpha=0.1, scheme=scheme, outer_iters=1, seed=0)
        with pytest.raises(ValueError):
            FreeSvrgConfig(m=1, alpha=-0.1, scheme=scheme, outer_iters=1,
                           seed=0)
        with pytest.raises(ValueError):
            FreeSvrgConfig(m=1, alpha=0.1, scheme=scheme, outer_iters=0,
                           seed=0)


def manual_lsvrg_d(model, scheme, p, alpha, total_iters, seed, x0):
    """Step-by-step replay of the decreasing-step-size loop; one draw then
    one coin per iteration."""
    rng = np.random.default_rng(seed)
    x = x0.copy()
    w = x0.copy()
    grad_w = model.full_gradient(w)
    alpha_k = alpha
    j = 0
    resets = 0
    evals = model.n
    for _ in range(total_iters):
        r = scheme.draw(rng)
        g = variance_reduced_gradient(model, x, w, grad_w, r)
        evals += 2 * r.indices.size
        x_prev = x
        x = x - alpha_k * g
        if rng.random() < p:
            w = x_prev.copy()
            grad_w = model.full_gradient(w)
            evals += model.n
            alpha_k = alpha
            j = 0
            resets += 1
        else:
            j += 1
            alpha_k = alpha * (1.0 - p) ** (j / 2)
    return x, alpha_k, j, resets, evals


class TestLSvrgD:
    def test_matches_manual_replay(self):
        model, prof, _ = ridge_problem(n=20, d=4)
        scheme = BNiceSampling(20, 2)
        cfg = LSvrgDConfig(p=0.25, alpha=0.02, scheme=scheme,
                           total_iters=120, seed=13)
        x0 = np.full(model.d, -0.3)
        trace = run_lsvrg_d(model, cfg, x0)
        x, alpha_k, j, resets, evals = manual_lsvrg_d(
            model, scheme, 0.25, 0.02, 120, 13, x0)
        assert np.array_equal(trace.final_x, x)
        assert trace.metadata["alpha_final"] == alpha_k
        assert trace.metadata["steps_since_reset"] == j
        assert trace.metadata["reset_count"] == resets
        assert trace.records[-1].grad_evals == evals

    def test_step_size_law(self):
        # after j tails in a row the step is alpha (1-p)^(j/2), exactly
        model, prof, _ = ridge_problem(n=10, d=3)
        cfg = LSvrgDConfig(p=0.2, alpha=0.05, scheme=BNiceSampling(10, 1),
                           total_iters=64, seed=21)
        trace = run_lsvrg_d(model, cfg, np.zeros(model.d))
        j = trace.metadata["steps_since_reset"]
        assert trace.metadata["alpha_final"] == 0.05 * (1.0 - 0.2) ** (j / 2)

    def test_certain_reset_keeps_step_constant(self):
        model, prof, _ = ridge_problem(n=10, d=3)
        cfg = LSvrgDConfig(p=1.0, alpha=0.04, scheme=BNiceSampling(10, 2),
                           total_iters=30, seed=2)
        trace = run_lsvrg_d(model, cfg, np.ones(model.d))
        assert trace.metadata["alpha_final"] == 0.04
        assert trace.metadata["reset_count"] == 30
        # every iteration pays 2b plus a fresh full gradient
        assert trace.records[-1].grad_evals == 10 + 30 * (2 * 2 + 10)

    def test_trace_granularity(self):
        model, prof, _ = ridge_problem(n=30, d=5)
        cfg = LSvrgDConfig(p=0.1, alpha=0.01, scheme=BNiceSampling(30, 5),
                           total_iters=20, seed=3)
        trace = run_lsvrg_d(model, cfg, np.zeros(model.d))
        # records at start, then every ceil(n/b) = 6 iterations, then final
        assert len(trace.records) == 1 + 3 + 1
        assert trace.records[0].grad_evals == 30

    def test_deterministic_given_seed(self):
        model, prof, ref = ridge_problem()
        cfg = LSvrgDConfig(p=0.05, alpha=0.01,
                           scheme=BNiceSampling(model.n, 3),
                           total_iters=100, seed=17)
        x0 = np.zeros(model.d)
        t1 = run_lsvrg_d(model, cfg, x0, reference=ref, profile=prof)
        t2 = run_lsvrg_d(model, cfg, x0, reference=ref, profile=prof)
        assert traces_equal_ignoring_time(t1, t2)

    def test_desk_scale_convergence(self):
        ds = generate_synthetic(n=100, d=10, seed=6, kind="regression",
                                noise=0.4)
        model = LossModel(ds, family="ridge", lam=0.1)
        prof = smoothness_profile(model)
        x_star, f_star = reference_solution(model, tol=1e-10, profile=prof)
        cfg = LSvrgDConfig(p=0.01, alpha=1.0 / (6 * prof.L_max),
                           scheme=BNiceSampling(100, 1),
                           total_iters=4000, seed=8)
        trace = run_lsvrg_d(model, cfg, np.zeros(model.d),
                            reference=(x_star, f_star), profile=prof)
        subopt = trace_columns(trace, "suboptimality")
        assert subopt[-1] <= subopt[0] / 10

    def test_divergence_detected(self):
        model, prof, _ = ridge_problem()
        cfg = LSvrgDConfig(p=0.1, alpha=1e7, scheme=BNiceSampling(model.n, 2),
                           total_iters=200, seed=0)
        with pytest.raises(DivergenceError):
            run_lsvrg_d(model, cfg, np.ones(model.d))

    def test_config_validation(self):
        scheme = BNiceSampling(5, 2)
        with pytest.raises(ValueError):
            LSvrgDConfig(p=0.0, alpha=0.1, scheme=scheme, total_iters=1, seed=0)
        with pytest.raises(ValueError):
            LSvrgDConfig(p=1.2, alpha=0.1, scheme=scheme, total_iters=1, seed=0)
        with pytest.raises(ValueError):
            LSvrgDConfig(p=0.5, alpha=0.0, scheme=scheme, total_iters=1, seed=0)


class TestReferenceSvrg:
    def test_full_batch_single_step_is_gradient_descent_exactly(self):
        # anchor and entry point coincide every loop, so the degenerate
        # case is plain GD, bit for bit
        model, prof, ref = ridge_problem()
        alpha = 1.0 / (2 * prof.L)
        trace = run_reference_svrg(
            model, BNiceSampling(model.n, model.n), m=1, alpha=alpha,
            outer_iters=40, seed=0, x0=np.zeros(model.d), reference=ref,
            profile=prof)
        x = np.zeros(model.d)
        for _ in range(40):
            x = x - alpha * model.full_gradient(x)
        assert np.array_equal(trace.final_x, x)

    def test_default_settings(self):
        model, prof, _ = ridge_problem(n=40, d=5, lam=0.5)
        trace = run_reference_svrg(
            model, BNiceSampling(40, 1), outer_iters=3, seed=1,
            x0=np.zeros(model.d), profile=prof)
        assert trace.metadata["m"] == math.ceil(20 * prof.L_max / prof.mu)
        assert trace.metadata["alpha"] == 1.0 / (10 * prof.L_max)

    def test_linear_convergence_with_defaults(self):
        ds = generate_synthetic(n=100, d=10, seed=12, kind="regression",
                                noise=0.4)
        model = LossModel(ds, family="ridge", lam=0.5)
        prof = smoothness_profile(model)
        x_star, f_star = reference_solution(model, tol=1e-10, profile=prof)
        trace = run_reference_svrg(
            model, BNiceSampling(100, 1), outer_iters=15, seed=2,
            x0=np.zeros(model.d), reference=(x_star, f_star), profile=prof)
        subopt = trace_columns(trace, "suboptimality")
        assert subopt[-1] < subopt[0] / 100

    def test_gradient_evaluation_accounting(self):
        model, prof, _ = ridge_problem()
        trace = run_reference_svrg(
            model, BNiceSampling(model.n, 3), m=8, alpha=0.01, outer_iters=5,
            seed=4, x0=np.zeros(model.d), profile=prof)
        assert trace.records[-1].grad_evals == 5 * (model.n + 2 * 3 * 8)
        assert len(trace.records) == 6

    def test_restarts_from_reference_point(self):
        # with m=1 (full batch) the iterate after loop s is exactly the
        # GD sequence; restarting from x rather than w would double-step
        model, prof, _ = ridge_problem()
        alpha = 0.01
        t1 = run_reference_svrg(
            model, BNiceSampling(model.n, model.n), m=1, alpha=alpha,
            outer_iters=2, seed=0, x0=np.ones(model.d), profile=prof)
        x = np.ones(model.d)
        x1 = x - alpha * model.full_gradient(x)
        x2 = x1 - alpha * model.full_gradient(x1)
        assert np.array_equal(t1.final_x, x2)
