"""Laplace-transform surfaces and their differential-identity checks.

The joint transform ``g_i(theta, t) = E[exp(-theta M(t)); X(t) = i]``
satisfies a first-order linear PDE in (t, theta).  Rather than solving it
numerically, this module estimates surfaces by Rao-Blackwellized Monte
Carlo (the Brownian and initial-value randomness integrated out in closed
form per path), evaluates the known analytic special cases, and verifies
the PDE / killed-time ODE by central-difference residuals with propagated
standard errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .chain import transient_distribution
from .errors import ApplicabilityError, DomainError, TransformOverflowError
from .process import MmouSpec, flow_checkpoints_batch

__all__ = [
    "TransformSurface",
    "ResidualGrid",
    "estimate_transform",
    "single_state_transform",
    "absorbing_two_state_transform",
    "absorbing_two_state_surface",
    "pde_residual",
    "killed_transform",
    "killed_time_residual",
    "kronecker_k2_operator",
]

_EXP_GUARD = 700.0


@dataclass(frozen=True)
class TransformSurface:
    """Transform values on a (time x theta) grid, one d-vector per node.

    ``values[k, j, i]`` is g_i(theta[j], times[k]); ``stderr`` matches and is
    identically zero for analytic surfaces.
    """

    theta: np.ndarray
    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray


@dataclass(frozen=True)
class ResidualGrid:
    """Differential-identity residuals on the interior grid nodes."""

    theta: np.ndarray
    times: np.ndarray
    residual: np.ndarray
    stderr: np.ndarray | None


def _exponent_guard(expo: np.ndarray, theta, times) -> None:
    if expo.max() > _EXP_GUARD:
        flat = int(np.argmax(expo))
        idx = np.unravel_index(flat, expo.shape)
        raise TransformOverflowError(theta=float(np.asarray(theta).ravel()[idx[0]]), t=times)


def estimate_transform(
    spec: MmouSpec, theta_grid, time_grid, n_paths: int, seed: int
) -> TransformSurface:
    """Rao-Blackwellized Monte Carlo estimate of the transform surface.

    Per path only the chain is random: the estimator averages
    ``exp(-theta mu_path + theta^2 v_path / 2)`` over paths, with the
    conditional mean and variance accumulated exactly along each path
    (initial-value randomness folded in as well).  Standard errors come
    from the per-path sample variance, cell by cell.
    """
    if n_paths < 100:
        raise ApplicabilityError("need at least 100 paths")
    theta = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    times = np.atleast_1d(np.asarray(time_grid, dtype=float))
    de, dr, va, st, _, _, _ = flow_checkpoints_batch(spec, n_paths, times, seed)
    d = spec.d
    values = np.empty((times.size, theta.size, d))
    stderr = np.empty_like(values)
    for k in range(times.size):
        mu = spec.m0_mean * de[:, k, 0] + dr[:, k, 0]
        vv = va[:, k, 0] + spec.m0_var * de[:, k, 0] ** 2
        expo = -np.outer(theta, mu) + 0.5 * np.outer(theta**2, vv)
        _exponent_guard(expo, theta, float(times[k]))
        terms = np.exp(expo)
        for i in range(d):
            mask = st[:, k] == i
            s1 = terms[:, mask].sum(axis=1)
            s2 = (terms[:, mask] ** 2).sum(axis=1)
            mean = s1 / n_paths
            var = np.maximum(s2 / n_paths - mean**2, 0.0)
            values[k, :, i] = mean
            stderr[k, :, i] = np.sqrt(var / (n_paths - 1))
    return TransformSurface(theta, times, values, stderr)


def single_state_transform(spec: MmouSpec, theta_grid, time_grid) -> TransformSurface:
    """Exact surface for d = 1 (no modulation): a Gaussian transform."""
    if spec.d != 1:
        raise ApplicabilityError("analytic surface only for d = 1")
    theta = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    times = np.atleast_1d(np.asarray(time_grid, dtype=float))
    g = spec.gamma[0]
    a = spec.alpha[0]
    s2 = spec.sigma2[0]
    values = np.empty((times.size, theta.size, 1))
    for k, t in enumerate(times):
        decay = np.exp(-g * t)
        mu = spec.m0_mean * decay + (a / g) * (1.0 - decay)
        vv = s2 * (1.0 - decay**2) / (2.0 * g) + spec.m0_var * decay**2
        expo = -theta * mu + 0.5 * theta**2 * vv
        _exponent_guard(expo, theta, float(t))
        values[k, :, 0] = np.exp(expo)
    return TransformSurface(theta, times, values, np.zeros_like(values))


def absorbing_two_state_transform(
    q2: float, alpha, gamma, sigma2, m0: float, theta: float, t: float
) -> tuple[float, float]:
    """Closed-form transform for the absorbing two-state chain, X(0) = 2.

    State 1 absorbs (no exit rate); state 2 leaks into it at rate ``q2``.
    The state-2 component is a pure exponential in closed form; the state-1
    component is its one-dimensional integral against the post-absorption
    flow, evaluated by quadrature.  Returns ``(g_state1, g_state2)``.
    """
    alpha = np.asarray(alpha, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if alpha.shape != (2,) or gamma.shape != (2,) or sigma2.shape != (2,):
        raise ApplicabilityError("two-state parameters required")
    if q2 <= 0.0:
        raise DomainError("q2 must be positive")
    a1, a2 = alpha
    g1, g2 = gamma
    s1, s2 = sigma2

    def g_state2(s: float, th: float) -> float:
        e = np.exp(-g2 * s)
        return np.exp(
            -th * m0 * e
            - q2 * s
            - (a2 / g2) * (th - th * e)
            + (s2 / (4.0 * g2)) * (th**2 - th**2 * e**2)
        )

    val2 = g_state2(t, theta)
    if t == 0.0:
        return 0.0, float(val2)

    prefac = q2 * np.exp(-(a1 / g1) * theta + (s1 / (4.0 * g1)) * theta**2)

    def integrand(s: float) -> float:
        shrink = np.exp(-g1 * (t - s))
        th_s = theta * shrink
        return g_state2(s, th_s) * np.exp(
            (a1 / g1) * th_s - (s1 / (4.0 * g1)) * (theta * shrink) ** 2
        )

    val1 = prefac * linalg.quad(integrand, 0.0, t, tol=1e-10)
    return float(val1), float(val2)


def absorbing_two_state_surface(
    q2: float, alpha, gamma, sigma2, m0: float, theta_grid, time_grid
) -> TransformSurface:
    """Analytic surface built from :func:`absorbing_two_state_transform`."""
    theta = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    times = np.atleast_1d(np.asarray(time_grid, dtype=float))
    values = np.empty((times.size, theta.size, 2))
    for k, t in enumerate(times):
        for j, th in enumerate(theta):
            values[k, j, 0], values[k, j, 1] = absorbing_two_state_transform(
                q2, alpha, gamma, sigma2, m0, float(th), float(t)
            )
    return TransformSurface(theta, times, values, np.zeros_like(values))


def _uniform_spacing(x: np.ndarray, name: str) -> float:
    if x.size < 5:
        raise ApplicabilityError(f"{name} grid needs at least 5 points")
    steps = np.diff(x)
    if steps.min() <= 0.0 or (steps.max() - steps.min()) > 1e-9 * steps.max():
        raise ApplicabilityError(f"{name} grid must be uniformly spaced")
    return float(steps[0])


def pde_residual(surface: TransformSurface, spec: MmouSpec) -> ResidualGrid:
    """Central-difference residual of the transform PDE on interior nodes.

    The identity checked is
    ``dg/dt = Q^T g - (theta diag(alpha) - theta^2/2 diag(sigma2)) g
    - theta diag(gamma) dg/dtheta``.
    When the surface carries standard errors they are propagated node-wise
    (independence approximation) and returned alongside.
    """
    dtheta = _uniform_spacing(surface.theta, "theta")
    dt = _uniform_spacing(surface.times, "time")
    g = surface.values
    se = surface.stderr
    d = spec.d
    qt = spec.chain.q.T
    theta_in = surface.theta[1:-1]
    times_in = surface.times[1:-1]

    dg_dt = (g[2:, 1:-1, :] - g[:-2, 1:-1, :]) / (2.0 * dt)
    dg_dth = (g[1:-1, 2:, :] - g[1:-1, :-2, :]) / (2.0 * dtheta)
    g_in = g[1:-1, 1:-1, :]

    poly = -(theta_in[None, :, None] * spec.alpha[None, None, :]) + 0.5 * (
        theta_in[None, :, None] ** 2 * spec.sigma2[None, None, :]
    )
    rhs = g_in @ qt.T + poly * g_in - theta_in[None, :, None] * spec.gamma[None, None, :] * dg_dth
    residual = dg_dt - rhs

    se_out = None
    if np.any(se > 0.0):
        var_dt = (se[2:, 1:-1, :] ** 2 + se[:-2, 1:-1, :] ** 2) / (2.0 * dt) ** 2
        var_dth = (se[1:-1, 2:, :] ** 2 + se[1:-1, :-2, :] ** 2) / (2.0 * dtheta) ** 2
        se_in2 = se[1:-1, 1:-1, :] ** 2
        var_qt = se_in2 @ (qt**2).T  # (Q^T)_{il}^2 se_l^2 summed over l
        var_poly = poly**2 * se_in2
        var_theta_term = (theta_in[None, :, None] * spec.gamma[None, None, :]) ** 2 * var_dth
        se_out = np.sqrt(var_dt + var_qt + var_poly + var_theta_term)
    return ResidualGrid(theta_in, times_in, residual, se_out)


def killed_transform(spec: MmouSpec, tau: float, theta_grid, n_paths: int, seed: int):
    """Transform at an independent Exponential(tau) killing time.

    Rao-Blackwellized as in :func:`estimate_transform`, with the killing
    time drawn per path.  Returns ``(values (n_theta, d), stderr)``.
    """
    if tau <= 0.0:
        raise DomainError("tau must be positive")
    if n_paths < 100:
        raise ApplicabilityError("need at least 100 paths")
    theta = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    de, dr, va, st, _, _, _ = flow_checkpoints_batch(
        spec, n_paths, [1.0], seed, tau=tau
    )
    mu = spec.m0_mean * de[:, 0, 0] + dr[:, 0, 0]
    vv = va[:, 0, 0] + spec.m0_var * de[:, 0, 0] ** 2
    expo = -np.outer(theta, mu) + 0.5 * np.outer(theta**2, vv)
    _exponent_guard(expo, theta, "exp-killed")
    terms = np.exp(expo)
    d = spec.d
    values = np.empty((theta.size, d))
    stderr = np.empty_like(values)
    for i in range(d):
        mask = st[:, 0] == i
        s1 = terms[:, mask].sum(axis=1)
        s2 = (terms[:, mask] ** 2).sum(axis=1)
        mean = s1 / n_paths
        values[:, i] = mean
        stderr[:, i] = np.sqrt(np.maximum(s2 / n_paths - mean**2, 0.0) / (n_paths - 1))
    return values, stderr


def killed_time_residual(
    spec: MmouSpec, tau: float, theta_grid, n_paths: int, seed: int
) -> ResidualGrid:
    """Residual of the exponential-killing ODE on interior theta nodes.

    The killing rate multiplies the boundary-corrected transform on the
    left:  ``tau (g - E e^{-theta M0} p0) = Q^T g - (theta diag(alpha)
    - theta^2/2 diag(sigma2)) g - theta diag(gamma) g'``.
    """
    theta = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    dtheta = _uniform_spacing(theta, "theta")
    values, stderr = killed_transform(spec, tau, theta, n_paths, seed)
    qt = spec.chain.q.T
    theta_in = theta[1:-1]
    g_in = values[1:-1, :]
    dg = (values[2:, :] - values[:-2, :]) / (2.0 * dtheta)
    init = np.exp(-theta_in * spec.m0_mean + 0.5 * theta_in**2 * spec.m0_var)
    lhs = tau * (g_in - init[:, None] * spec.p0[None, :])
    poly = -(theta_in[:, None] * spec.alpha[None, :]) + 0.5 * (
        theta_in[:, None] ** 2 * spec.sigma2[None, :]
    )
    rhs = g_in @ qt.T + poly * g_in - theta_in[:, None] * spec.gamma[None, :] * dg
    residual = lhs - rhs

    se_in2 = stderr[1:-1, :] ** 2
    var_dg = (stderr[2:, :] ** 2 + stderr[:-2, :] ** 2) / (2.0 * dtheta) ** 2
    var = (
        tau**2 * se_in2
        + se_in2 @ (qt**2).T
        + poly**2 * se_in2
        + (theta_in[:, None] * spec.gamma[None, :]) ** 2 * var_dg
    )
    return ResidualGrid(theta_in, np.array([]), residual, np.sqrt(var))


def kronecker_k2_operator(spec: MmouSpec, theta1: float, theta2: float):
    """Coefficient matrices of the two-epoch joint-transform PDE.

    For the column-stacked vector ``vec(G)`` with ``G[i, k] = g_{i,k}`` the
    PDE reads ``dg/dt = C0 g - theta1 C1 dg/dtheta1 - theta2 C2 dg/dtheta2``
    where ``C0`` is the Kronecker sum of Q^T with itself minus the
    polynomial coefficient terms; returns ``(C0, C1, C2)``.
    """
    d = spec.d
    eye = np.eye(d)
    qt = spec.chain.q.T
    da = np.diag(spec.alpha)
    ds2 = np.diag(spec.sigma2)
    c0 = (
        np.kron(eye, qt)
        + np.kron(qt, eye)
        - theta1 * np.kron(eye, da)
        - theta2 * np.kron(da, eye)
        + 0.5 * theta1**2 * np.kron(eye, ds2)
        + 0.5 * theta2**2 * np.kron(ds2, eye)
    )
    c1 = np.kron(eye, np.diag(spec.gamma))
    c2 = np.kron(np.diag(spec.gamma), eye)
    return c0, c1, c2


def transform_boundary_check(surface: TransformSurface, spec: MmouSpec) -> float:
    """Worst deviation of the theta = 0 column from the transient state law."""
    j0 = int(np.argmin(np.abs(surface.theta)))
    if abs(surface.theta[j0]) > 1e-12:
        raise ApplicabilityError("surface has no theta = 0 column")
    worst = 0.0
    for k, t in enumerate(surface.times):
        p = transient_distribution(spec.chain, spec.p0, float(t))
        worst = max(worst, float(np.abs(surface.values[k, j0, :] - p).max()))
    return worst
