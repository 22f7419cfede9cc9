"""Exact sampler and conditional Gaussian laws against independent oracles."""

import math

import numba
import numpy as np
import pytest
import scipy.stats

from mmou import (
    CoordOu,
    CtmcPath,
    GeneratorMatrix,
    MmouSpec,
    MultiOuSpec,
    NormalInitial,
    conditional_joint,
    conditional_moments,
    occupation_integral,
    sample_multi_terminal,
    sample_multi_terminal_batch,
    sample_path,
    sample_terminal,
    sample_terminal_batch,
    simulate_euler,
)
from mmou import moments, rng
from mmou.errors import DomainError, StabilityError
from mmou.linalg import quad
from mmou.process import flow_checkpoints_batch


def three_jump_path() -> CtmcPath:
    return CtmcPath(0, np.array([0.3, 0.7, 1.4]), np.array([1, 0, 1]), 2.0)


def quad_moments_on_path(spec, path, t, lo=0.0, mean_at_lo=None):
    """Independent oracle: piecewise quadrature of the pathwise integrals.

    mu(t) = m0 e^{-Gamma(t)} + int_lo^t e^{-(Gamma(t)-Gamma(s))} alpha ds and
    the matching squared-decay integral for the variance, integrated segment
    by segment so each quadrature panel is smooth.
    """
    gam = np.asarray(spec.gamma)

    def gamma_acc(s):
        return occupation_integral(path, gam, s)

    g_t = gamma_acc(t)
    drift = 0.0
    var = 0.0
    for s0, s1, state in path.segments(t):
        a, b = max(s0, lo), s1
        if b <= a:
            continue
        drift += quad(
            lambda s, st=state: np.exp(-(g_t - gamma_acc(s))) * spec.alpha[st], a, b, tol=1e-13
        )
        var += quad(
            lambda s, st=state: np.exp(-2.0 * (g_t - gamma_acc(s))) * spec.sigma2[st], a, b, tol=1e-13
        )
    start = spec.m0_mean if mean_at_lo is None else mean_at_lo
    decay = np.exp(-(g_t - gamma_acc(lo)))
    return start * decay + drift, var


class TestConditionalMoments:
    def test_single_state_reduces_to_ou(self, model_1d):
        path = CtmcPath(0, np.array([]), np.array([], dtype=np.int64), 2.0)
        out = conditional_moments(model_1d, path, 1.0)
        assert out.mean == pytest.approx(2.0 * (1.0 - np.exp(-1.0)), abs=1e-12)
        assert out.variance == pytest.approx(2.0 * (1.0 - np.exp(-2.0)), abs=1e-12)
        assert abs(out.mean - 1.264241) < 1e-6
        assert abs(out.variance - 1.729329) < 1e-6

    def test_time_zero(self, chain_a):
        spec = MmouSpec(chain_a, [1.0, 3.0], [1.0, 2.5], [0.5, 2.0], m0=1.25)
        out = conditional_moments(spec, three_jump_path(), 0.0)
        assert out.mean == 1.25
        assert out.variance == 0.0

    def test_quadrature_oracle_on_fixed_path(self, chain_a):
        spec = MmouSpec(chain_a, [1.0, 3.0], [1.0, 2.5], [0.5, 2.0], m0=0.7)
        path = three_jump_path()
        for t in (0.5, 1.1, 1.8):
            got = conditional_moments(spec, path, t)
            mu_ref, v_ref = quad_moments_on_path(spec, path, t)
            assert got.mean == pytest.approx(mu_ref, abs=1e-10)
            assert got.variance == pytest.approx(v_ref, abs=1e-10)

    def test_flow_composition_additivity(self, chain_a):
        spec = MmouSpec(chain_a, [1.0, 3.0], [1.0, 2.5], [0.5, 2.0], m0=0.7)
        path = three_jump_path()
        s, t = 0.9, 1.8
        at_s = conditional_moments(spec, path, s)
        at_t = conditional_moments(spec, path, t)
        gam = np.asarray(spec.gamma)
        ratio = np.exp(-(occupation_integral(path, gam, t) - occupation_integral(path, gam, s)))
        mu_comp, var_inc = quad_moments_on_path(spec, path, t, lo=s, mean_at_lo=at_s.mean)
        assert at_t.mean == pytest.approx(mu_comp, abs=1e-12)
        assert at_t.variance == pytest.approx(at_s.variance * ratio**2 + var_inc, abs=1e-12)

    def test_normal_initial_adds_decayed_variance(self, chain_a):
        base = MmouSpec(chain_a, [1.0, 3.0], [1.0, 2.5], [0.5, 2.0], m0=0.7)
        rand0 = MmouSpec(chain_a, [1.0, 3.0], [1.0, 2.5], [0.5, 2.0], m0=NormalInitial(0.7, 0.9))
        path = three_jump_path()
        a = conditional_moments(base, path, 1.5)
        b = conditional_moments(rand0, path, 1.5)
        gam = np.asarray(base.gamma)
        decay = np.exp(-occupation_integral(path, gam, 1.5))
        assert b.mean == pytest.approx(a.mean, abs=1e-14)
        assert b.variance == pytest.approx(a.variance + 0.9 * decay**2, abs=1e-14)


class TestConditionalJoint:
    def test_equal_times_covariance_is_variance(self, model_a):
        path = three_jump_path()
        joint = conditional_joint(model_a, path, 1.0, 1.0)
        assert joint.covariance == pytest.approx(joint.variances[0], abs=1e-14)

    def test_single_state_ou_autocovariance(self, model_1d):
        path = CtmcPath(0, np.array([]), np.array([], dtype=np.int64), 3.0)
        t1, t2 = 0.8, 2.1
        joint = conditional_joint(model_1d, path, t1, t2)
        expected = np.exp(-(t2 - t1)) * 4.0 * (1.0 - np.exp(-2.0 * t1)) / 2.0
        assert joint.covariance == pytest.approx(expected, abs=1e-12)

    def test_fixed_path_euler_oracle(self, chain_a):
        spec = MmouSpec(chain_a, [1.0, 3.0], [1.0, 2.5], [0.5, 2.0], m0=0.7)
        path = three_jump_path()
        t1, t2 = 0.9, 1.8
        joint = conditional_joint(spec, path, t1, t2)
        # brute-force SDE integration on the frozen path, vectorized over draws
        dt = 5e-4
        n = 40_000
        grid = np.unique(
            np.concatenate([np.arange(0.0, t2 + dt, dt), path.jump_times, [t1, t2]])
        )
        grid = grid[grid <= t2 + 1e-12]
        gen = np.random.default_rng(12345)
        x = np.full(n, 0.7)
        x_t1 = None
        for k in range(grid.size - 1):
            s0, s1 = grid[k], grid[k + 1]
            state = path.state_at(s0)
            h = s1 - s0
            x = x + (spec.alpha[state] - spec.gamma[state] * x) * h + np.sqrt(
                spec.sigma2[state] * h
            ) * gen.standard_normal(n)
            if abs(s1 - t1) < 1e-12:
                x_t1 = x.copy()
        cov = np.cov(x_t1, x, ddof=1)
        se_cov = np.sqrt((cov[0, 0] * cov[1, 1] + cov[0, 1] ** 2) / n)
        assert abs(cov[0, 1] - joint.covariance) < 4.0 * se_cov + 20.0 * dt
        assert abs(cov[0, 0] - joint.variances[0]) < 4.0 * np.sqrt(2.0 / n) * cov[0, 0] + 20.0 * dt
        assert abs(x_t1.mean() - joint.means[0]) < 4.0 * np.sqrt(cov[0, 0] / n) + 20.0 * dt

    def test_time_order_enforced(self, model_a):
        with pytest.raises(DomainError):
            conditional_joint(model_a, three_jump_path(), 1.0, 0.5)


class TestSampleTerminal:
    def test_deterministic_flow_when_no_noise(self, chain_a):
        spec = MmouSpec(chain_a, [0.0, 0.0], [1.0, 2.5], [0.0, 0.0], m0=2.0)
        paths = [sample_path(chain_a, spec.p0, 1.5, rng.substream(3, i)) for i in range(50)]
        values, _ = sample_terminal(spec, paths, 1.5, rng.substream(4, 0))
        gam = np.asarray(spec.gamma)
        expected = np.array(
            [2.0 * np.exp(-occupation_integral(p, gam, 1.5)) for p in paths]
        )
        assert np.abs(values - expected).max() < 1e-14

    def test_single_state_mean_matches_closed_form(self, model_1d):
        n = 10_000
        paths = [
            CtmcPath(0, np.array([]), np.array([], dtype=np.int64), 1.0) for _ in range(n)
        ]
        values, _ = sample_terminal(model_1d, paths, 1.0, rng.substream(6, 0))
        mu = 2.0 * (1.0 - np.exp(-1.0))
        se = values.std(ddof=1) / np.sqrt(n)
        assert abs(values.mean() - mu) < 3.0 * se

    def test_against_moment_engine(self, model_a):
        n = 20_000
        values, _ = sample_terminal_batch(model_a, n, 1.0, seed=2025)
        first = moments.transient_first_moment(model_a, [1.0])
        second = moments.transient_second_moment(model_a, [1.0])
        se_mean = values.std(ddof=1) / np.sqrt(n)
        m4 = scipy.stats.moment(values, 4)
        v = values.var(ddof=1)
        se_var = np.sqrt((m4 - v**2) / n)
        assert abs(values.mean() - first.aggregate[0]) < 3.0 * se_mean
        assert abs(v - second.variance[0]) < 3.0 * se_var

    def test_ks_against_implied_mixture(self, model_a):
        n = 1000
        paths = [sample_path(model_a.chain, model_a.p0, 1.0, rng.substream(42, i)) for i in range(n)]
        values, _ = sample_terminal(model_a, paths, 1.0, rng.substream(43, 0))
        comps = [conditional_moments(model_a, p, 1.0) for p in paths]

        def mixture_cdf(x):
            out = np.zeros_like(np.atleast_1d(x), dtype=float)
            for c in comps:
                out += scipy.stats.norm.cdf(x, loc=c.mean, scale=np.sqrt(c.variance))
            return out / n

        res = scipy.stats.kstest(values, mixture_cdf)
        assert res.pvalue > 0.01


class TestBatchKernel:
    def test_matches_pure_python_reference(self, model_a):
        seed, n, t = 31337, 40, 1.3
        de, dr, va, st, u_term, u_init, _ = flow_checkpoints_batch(model_a, n, [t], seed)
        p0c = np.cumsum(model_a.p0)
        jump_cum = model_a.chain.jump_cumprobs()
        exit_rates = model_a.chain.exit_rates
        for i in range(n):
            words = iter(rng.uniform_words(seed, i, 64))
            s = int(np.searchsorted(p0c, next(words), side="right"))
            ut = next(words)
            ui = next(words)
            decay, drift, var = 1.0, 0.0, 0.0
            cursor = 0.0
            while True:
                q = exit_rates[s]
                hold = -math.log1p(-next(words)) / q if q > 0 else np.inf
                seg_end = cursor + hold
                if t <= seg_end:
                    length = t - cursor
                    e1 = math.exp(-model_a.gamma[s] * length)
                    decay *= e1
                    drift = drift * e1 + model_a.alpha[s] / model_a.gamma[s] * (1 - e1)
                    var = var * e1 * e1 + model_a.sigma2[s] / (2 * model_a.gamma[s]) * (1 - e1 * e1)
                    break
                length = hold
                e1 = math.exp(-model_a.gamma[s] * length)
                decay *= e1
                drift = drift * e1 + model_a.alpha[s] / model_a.gamma[s] * (1 - e1)
                var = var * e1 * e1 + model_a.sigma2[s] / (2 * model_a.gamma[s]) * (1 - e1 * e1)
                cursor = seg_end
                s = int(np.searchsorted(jump_cum[s], next(words), side="right"))
            assert u_term[i, 0] == ut and u_init[i, 0] == ui
            assert st[i, 0] == s
            np.testing.assert_allclose(
                [de[i, 0, 0], dr[i, 0, 0], va[i, 0, 0]], [decay, drift, var], rtol=1e-13
            )

    def test_killed_mode_matches_pure_python_reference(self, model_a):
        # exponential-killing layout: the killing-time draw comes first
        seed, n, tau = 808, 30, 1.7
        de, dr, va, st, _, _, t_eval = flow_checkpoints_batch(
            model_a, n, [1.0], seed, tau=tau
        )
        p0c = np.cumsum(model_a.p0)
        jump_cum = model_a.chain.jump_cumprobs()
        exit_rates = model_a.chain.exit_rates
        for i in range(n):
            words = iter(rng.uniform_words(seed, i, 64))
            t_kill = -math.log1p(-next(words)) / tau
            assert t_eval[i, 0] == t_kill
            s = int(np.searchsorted(p0c, next(words), side="right"))
            next(words)  # terminal-uniform slot
            next(words)  # initial-value slot
            decay, drift, var = 1.0, 0.0, 0.0
            cursor = 0.0
            while True:
                q = exit_rates[s]
                hold = -math.log1p(-next(words)) / q if q > 0 else np.inf
                seg_end = cursor + hold
                if t_kill <= seg_end:
                    e1 = math.exp(-model_a.gamma[s] * (t_kill - cursor))
                    decay *= e1
                    drift = drift * e1 + model_a.alpha[s] / model_a.gamma[s] * (1 - e1)
                    var = var * e1 * e1 + model_a.sigma2[s] / (2 * model_a.gamma[s]) * (1 - e1 * e1)
                    break
                e1 = math.exp(-model_a.gamma[s] * hold)
                decay *= e1
                drift = drift * e1 + model_a.alpha[s] / model_a.gamma[s] * (1 - e1)
                var = var * e1 * e1 + model_a.sigma2[s] / (2 * model_a.gamma[s]) * (1 - e1 * e1)
                cursor = seg_end
                s = int(np.searchsorted(jump_cum[s], next(words), side="right"))
            assert st[i, 0] == s
            np.testing.assert_allclose(
                [de[i, 0, 0], dr[i, 0, 0], va[i, 0, 0]], [decay, drift, var], rtol=1e-13
            )

    def test_thread_count_invariance(self, model_a):
        saved = numba.get_num_threads()
        try:
            numba.set_num_threads(1)
            v1, s1 = sample_terminal_batch(model_a, 5000, 1.0, seed=7)
            numba.set_num_threads(min(4, numba.config.NUMBA_NUM_THREADS))
            v4, s4 = sample_terminal_batch(model_a, 5000, 1.0, seed=7)
        finally:
            numba.set_num_threads(saved)
        assert np.array_equal(v1, v4)
        assert np.array_equal(s1, s4)

    def test_partition_by_start_index(self, model_a):
        whole, st_whole = sample_terminal_batch(model_a, 100, 1.0, seed=50)
        left, st_left = sample_terminal_batch(model_a, 60, 1.0, seed=50, start_index=0)
        right, st_right = sample_terminal_batch(model_a, 40, 1.0, seed=50, start_index=60)
        assert np.array_equal(whole, np.concatenate([left, right]))
        assert np.array_equal(st_whole, np.concatenate([st_left, st_right]))

    def test_checkpoint_flow_matches_explicit_route_in_law(self, model_a):
        # moments of the conditional mean across paths agree between routes
        n = 20_000
        de, dr, _, _, _, _, _ = flow_checkpoints_batch(model_a, n, [1.0], seed=9)
        mu_batch = model_a.m0_mean * de[:, 0, 0] + dr[:, 0, 0]
        first = moments.transient_first_moment(model_a, [1.0])
        se = mu_batch.std(ddof=1) / np.sqrt(n)
        assert abs(mu_batch.mean() - first.aggregate[0]) < 3.0 * se


class TestEuler:
    def test_deterministic_first_order_convergence(self):
        spec = MmouSpec(GeneratorMatrix([[0.0]]), [2.0], [1.0], [0.0], m0=3.0)
        exact = 3.0 * np.exp(-1.0) + 2.0 * (1.0 - np.exp(-1.0))
        errs = []
        for dt in (0.04, 0.02, 0.01):
            val = simulate_euler(spec, 1.0, dt, 1, seed=1)[0]
            errs.append(abs(val - exact))
        assert 1.6 < errs[0] / errs[1] < 2.4
        assert 1.6 < errs[1] / errs[2] < 2.4

    def test_single_state_ou_moments(self, model_1d):
        n, dt = 20_000, 5e-3
        vals = simulate_euler(model_1d, 1.0, dt, n, seed=17)
        mu = 2.0 * (1.0 - np.exp(-1.0))
        v = 2.0 * (1.0 - np.exp(-2.0))
        se_mean = vals.std(ddof=1) / np.sqrt(n)
        assert abs(vals.mean() - mu) < 3.0 * se_mean + 4.0 * dt
        assert abs(vals.var(ddof=1) - v) < 3.0 * v * np.sqrt(2.0 / n) + 8.0 * dt

    def test_against_exact_sampler(self, model_a):
        n, dt = 20_000, 5e-3
        approx = simulate_euler(model_a, 1.0, dt, n, seed=23)
        exact, _ = sample_terminal_batch(model_a, n, 1.0, seed=24)
        se = np.sqrt(approx.var(ddof=1) / n + exact.var(ddof=1) / n)
        assert abs(approx.mean() - exact.mean()) < 3.0 * se + 4.0 * dt

    def test_stability_guard(self, model_a):
        with pytest.raises(StabilityError):
            simulate_euler(model_a, 1.0, 0.5, 10, seed=1)

    def test_bias_shrinks_with_dt(self, model_a):
        second = moments.transient_second_moment(model_a, [1.0])
        target = second.variance[0]
        n = 40_000
        gaps = []
        for dt in (1e-2, 5e-3, 2.5e-3):
            vals = simulate_euler(model_a, 1.0, dt, n, seed=29)
            gaps.append(abs(vals.var(ddof=1) - target))
        noise = 3.0 * target * np.sqrt(2.0 / n)
        assert gaps[-1] < gaps[0] + noise


class TestMulti:
    def test_single_coordinate_reduces_exactly(self, model_a):
        multi = MultiOuSpec(
            model_a.chain,
            [CoordOu(model_a.alpha, model_a.gamma, model_a.sigma2, 0.0)],
        )
        v_single, s_single = sample_terminal_batch(model_a, 500, 1.0, seed=77)
        v_multi, s_multi = sample_multi_terminal_batch(multi, 500, 1.0, seed=77)
        assert np.array_equal(v_single, v_multi[:, 0])
        assert np.array_equal(s_single, s_multi)

    def test_identical_noise_free_coordinates_coincide(self, chain_a):
        coord = CoordOu(np.array([1.0, 3.0]), np.array([1.0, 1.0]), np.zeros(2), 0.5)
        multi = MultiOuSpec(chain_a, [coord, coord])
        values, _ = sample_multi_terminal_batch(multi, 400, 2.0, seed=5)
        assert np.array_equal(values[:, 0], values[:, 1])

    def test_conditional_independence_of_residuals(self, chain_a):
        c1 = CoordOu(np.array([1.0, 3.0]), np.array([1.0, 1.0]), np.array([0.5, 2.0]), 0.0)
        c2 = CoordOu(np.array([2.0, 0.5]), np.array([2.0, 2.0]), np.array([1.0, 0.3]), 0.0)
        multi = MultiOuSpec(chain_a, [c1, c2])
        n = 3000
        paths = [sample_path(chain_a, multi.p0, 1.0, rng.substream(90, i)) for i in range(n)]
        values, _ = sample_multi_terminal(multi, paths, 1.0, rng.substream(91, 0))
        z = np.empty((n, 2))
        for j in range(2):
            spec_j = multi.coordinate(j)
            for i, p in enumerate(paths):
                cm = conditional_moments(spec_j, p, 1.0)
                z[i, j] = (values[i, j] - cm.mean) / np.sqrt(cm.variance)
        r = np.corrcoef(z[:, 0], z[:, 1])[0, 1]
        assert abs(r) < 4.0 / np.sqrt(n)
