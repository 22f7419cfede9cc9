"""Dense kernels against independent routes: RK4, scipy, symbolic integrals."""

import numpy as np
import pytest
import scipy.linalg

from mmou.errors import AccuracyError, DimensionError, SingularMatrixError
from mmou.linalg import expm, quad, rk4, rk4_linear, solve

Q_A = np.array([[-1.0, 1.0], [2.0, -2.0]])


class TestExpm:
    def test_zero_matrix(self):
        assert np.allclose(expm(np.zeros((3, 3)), 5.0), np.eye(3), atol=1e-15)

    def test_diagonal(self):
        out = expm(np.diag([-1.0, -2.0]), 1.0)
        assert np.allclose(out, np.diag([np.exp(-1.0), np.exp(-2.0)]), rtol=1e-13)

    def test_generator_row_sums_and_rk4_oracle(self):
        p = expm(Q_A, 1.0)
        assert np.abs(p @ np.ones(2) - 1.0).max() < 1e-12
        # independent route: RK4 integration of P' = Q P, column by column
        for i in range(2):
            col = rk4_linear(Q_A, np.eye(2)[:, i], 1.0)
            assert np.abs(p[:, i] - col).max() < 1e-8

    @pytest.mark.parametrize("trial", range(20))
    def test_semigroup_property(self, trial):
        rng = np.random.default_rng(100 + trial)
        a = rng.uniform(-2.0, 2.0, size=(4, 4))
        s, t = rng.uniform(0.0, 2.0, size=2)
        lhs = expm(a, s) @ expm(a, t)
        rhs = expm(a, s + t)
        assert np.abs(lhs - rhs).max() < 1e-10 * max(1.0, np.abs(rhs).max())

    def test_against_scipy(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            a = rng.uniform(-3.0, 3.0, size=(5, 5))
            ours = expm(a, 0.7)
            ref = scipy.linalg.expm(a * 0.7)
            assert np.abs(ours - ref).max() < 1e-12 * max(1.0, np.abs(ref).max())

    def test_rejects_non_square(self):
        with pytest.raises(DimensionError):
            expm(np.ones((2, 3)), 1.0)


class TestSolve:
    def test_identity(self):
        b = np.array([3.0, -1.0, 2.0])
        assert np.array_equal(solve(np.eye(3), b), b)

    def test_diagonal(self):
        assert np.allclose(solve(np.diag([2.0, 4.0]), [2.0, 4.0]), [1.0, 1.0])

    @pytest.mark.parametrize("trial", range(10))
    def test_random_roundtrip(self, trial):
        rng = np.random.default_rng(trial)
        a = rng.normal(size=(6, 6)) + 6.0 * np.eye(6)
        b = rng.normal(size=6)
        x = solve(a, b)
        assert np.abs(a @ x - b).max() <= 1e-10 * max(1.0, np.abs(b).max())

    def test_singular_error_names_system(self):
        a = np.array([[1.0, 2.0], [2.0, 4.0]])
        with pytest.raises(SingularMatrixError, match="rank test"):
            solve(a, np.ones(2), label="rank test")

    def test_stationary_first_moment_vs_ode_oracle(self):
        # nu_inf solves Qbar nu = -diag(alpha) pi; long-horizon integration of
        # nu' = Qbar nu + diag(alpha) pi must agree
        pi = np.array([2.0 / 3.0, 1.0 / 3.0])
        alpha = np.array([1.0, 3.0])
        qbar = Q_A.T - np.eye(2)
        forcing = np.diag(alpha) @ pi
        nu_inf = solve(qbar, -forcing)
        nu_ode = rk4(lambda _t, y: qbar @ y + forcing, np.zeros(2), 0.0, 60.0, 60_000)
        assert np.abs(nu_inf - nu_ode).max() < 1e-8
        assert abs(nu_inf.sum() - 5.0 / 3.0) < 1e-12


class TestQuad:
    def test_constant(self):
        assert abs(quad(lambda _x: 1.0, 0.0, 3.0) - 3.0) < 1e-14

    def test_exponential_tail(self):
        assert abs(quad(np.exp, -40.0, 0.0, tol=1e-12) - 1.0) < 1e-10

    def test_polynomial_degree_31_exact(self):
        assert abs(quad(lambda x: x**31, 0.0, 1.0) - 1.0 / 32.0) < 1e-12
        coeffs = np.arange(1.0, 11.0)
        exact = sum(c / (k + 1) for k, c in enumerate(coeffs))
        est = quad(lambda x: sum(c * x**k for k, c in enumerate(coeffs)), 0.0, 1.0)
        assert abs(est - exact) < 1e-12

    def test_two_state_transition_integral_vs_symbolic(self):
        # kernel (e^{-v} - e^{-(2-v)}) (p11(v) - pi1) for the reference chain:
        # p11(v) - pi1 = pi2 e^{-3v}, so the integral over [0,1] is
        # pi2 [ (1 - e^{-4})/4 - e^{-2} (1 - e^{-2})/2 ]
        pi2 = 1.0 / 3.0
        symbolic = pi2 * ((1.0 - np.exp(-4.0)) / 4.0 - np.exp(-2.0) * (1.0 - np.exp(-2.0)) / 2.0)
        est = quad(
            lambda v: (np.exp(-v) - np.exp(-(2.0 - v)))
            * (expm(Q_A, v)[0, 0] - 2.0 / 3.0),
            0.0,
            1.0,
        )
        assert abs(est - symbolic) < 1e-12

    def test_nonconvergence_carries_best_estimate(self):
        with pytest.raises(AccuracyError) as exc_info:
            quad(lambda x: abs(x - 0.377) ** -0.9, 0.0, 1.0, tol=1e-13, max_depth=6)
        assert exc_info.value.best_estimate is not None
        assert np.isfinite(exc_info.value.best_estimate)
