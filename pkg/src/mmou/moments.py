"""Closed-form and recursive moments, jointly with the background state.

The central objects are the state-indexed moment vectors
``H_k(t) = E[M(t)^k ; X(t) = i]``.  They satisfy a lower-triangular linear
ODE system whose diagonal blocks are ``Qbar_k = Q^T - k diag(gamma)``, so
transient moments reduce to one matrix exponential and stationary moments
to one linear solve per order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .chain import (
    GeneratorMatrix,
    deviation_set,
    resolvent_deviation,
    stationary_distribution,
    transient_distribution,
)
from .errors import ApplicabilityError, SizeError
from .process import MmouSpec, MultiOuSpec

__all__ = [
    "MomentTable",
    "StationaryMoments",
    "qbar",
    "transient_first_moment",
    "transient_second_moment",
    "stationary_moments",
    "equal_gamma_closed_form",
    "covariance_lag",
    "higher_moments_transient",
    "nonneg_definite_check",
    "multi_transient_covariance",
    "two_state_example",
    "TwoStateSummary",
    "multi_stationary_mixed_moments",
    "multi_cross_moment",
]


@dataclass(frozen=True)
class MomentTable:
    """State-indexed moment vectors of one order over a time grid.

    ``per_state[k]`` holds the d-vector at ``times[k]``; ``aggregate`` is its
    sum over states (the raw moment E M(t)^order).  For order 2 the centered
    ``variance`` column is filled in as well.
    """

    order: int
    times: np.ndarray
    per_state: np.ndarray
    aggregate: np.ndarray
    variance: np.ndarray | None = None


@dataclass(frozen=True)
class StationaryMoments:
    """Long-run moment vectors and their scalar aggregates."""

    nu_inf: np.ndarray
    w_inf: np.ndarray
    mu_inf: float
    v_inf: float
    higher: list  # H_k(inf) for k = 0..max_order


def qbar(spec: MmouSpec, k: int = 1) -> np.ndarray:
    """Q^T - k diag(gamma); the decay-adjusted generator transpose."""
    return spec.chain.q.T - k * np.diag(spec.gamma)


def _raw_initial_moments(spec: MmouSpec, n: int) -> list[float]:
    """E[M0^k] for k = 0..n (Gaussian raw-moment recursion)."""
    a, b2 = spec.m0_mean, spec.m0_var
    out = [1.0, a]
    for k in range(2, n + 1):
        out.append(a * out[k - 1] + (k - 1) * b2 * out[k - 2])
    return out[: n + 1]


def transient_first_moment(spec: MmouSpec, times) -> MomentTable:
    """nu_t = E[M(t); X(t)=i] on a time grid.

    Started in equilibrium the solution collapses to
    ``nu_t = e^{Qbar t} nu_0 + (I - e^{Qbar t}) nu_inf``; otherwise the pair
    (p_t, nu_t) is propagated through one stacked matrix exponential.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    d = spec.d
    qb = qbar(spec, 1)
    nu0 = spec.m0_mean * spec.p0
    per = np.empty((times.size, d))
    if spec.started_in_equilibrium():
        pi = stationary_distribution(spec.chain)
        nu_inf = -linalg.solve(qb, np.diag(spec.alpha) @ pi, label="stationary first moment")
        for k, t in enumerate(times):
            e = linalg.expm(qb, t)
            per[k] = e @ nu0 + (np.eye(d) - e) @ nu_inf
    else:
        big = np.zeros((2 * d, 2 * d))
        big[:d, :d] = spec.chain.q.T
        big[d:, :d] = np.diag(spec.alpha)
        big[d:, d:] = qb
        x0 = np.concatenate([spec.p0, nu0])
        for k, t in enumerate(times):
            per[k] = (linalg.expm(big, t) @ x0)[d:]
    return MomentTable(1, times, per, per.sum(axis=1))


def transient_second_moment(spec: MmouSpec, times) -> MomentTable:
    """w_t = E[M(t)^2; X(t)=i] plus the centered variance column."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    d = spec.d
    qb1 = qbar(spec, 1)
    qb2 = qbar(spec, 2)
    raw = _raw_initial_moments(spec, 2)
    nu0 = raw[1] * spec.p0
    w0 = raw[2] * spec.p0
    per = np.empty((times.size, d))
    first = transient_first_moment(spec, times)
    if spec.started_in_equilibrium():
        pi = stationary_distribution(spec.chain)
        da = np.diag(spec.alpha)
        nu_inf = -linalg.solve(qb1, da @ pi, label="stationary first moment")
        w_inf = -linalg.solve(
            qb2, 2.0 * da @ nu_inf + np.diag(spec.sigma2) @ pi, label="stationary second moment"
        )
        cross = np.zeros((2 * d, 2 * d))
        cross[:d, :d] = qb1
        cross[d:, :d] = 2.0 * da
        cross[d:, d:] = qb2
        for k, t in enumerate(times):
            e2 = linalg.expm(qb2, t)
            lt = linalg.expm(cross, t)[d:, :d]
            per[k] = e2 @ w0 + lt @ (nu0 - nu_inf) + (np.eye(d) - e2) @ w_inf
    else:
        big = np.zeros((3 * d, 3 * d))
        big[:d, :d] = spec.chain.q.T
        big[d : 2 * d, :d] = np.diag(spec.alpha)
        big[d : 2 * d, d : 2 * d] = qb1
        big[2 * d :, :d] = np.diag(spec.sigma2)
        big[2 * d :, d : 2 * d] = 2.0 * np.diag(spec.alpha)
        big[2 * d :, 2 * d :] = qb2
        x0 = np.concatenate([spec.p0, nu0, w0])
        for k, t in enumerate(times):
            per[k] = (linalg.expm(big, t) @ x0)[2 * d :]
    agg = per.sum(axis=1)
    return MomentTable(2, times, per, agg, variance=agg - first.aggregate**2)


def stationary_moments(spec: MmouSpec, max_order: int = 2) -> StationaryMoments:
    """Long-run moments by the one-solve-per-order recursion.

    ``H_k(inf) = -Qbar_k^{-1} (k diag(alpha) H_{k-1} + k(k-1)/2 diag(sigma2) H_{k-2})``
    with ``H_0 = pi``.
    """
    if max_order < 1:
        raise ApplicabilityError("max_order must be at least 1")
    pi = stationary_distribution(spec.chain)
    da = np.diag(spec.alpha)
    ds2 = np.diag(spec.sigma2)
    hs = [pi]
    for k in range(1, max_order + 1):
        rhs = k * da @ hs[k - 1]
        if k >= 2:
            rhs = rhs + 0.5 * k * (k - 1) * ds2 @ hs[k - 2]
        hs.append(-linalg.solve(qbar(spec, k), rhs, label=f"stationary moment order {k}"))
    nu_inf = hs[1]
    mu_inf = float(nu_inf.sum())
    if max_order >= 2:
        w_inf = hs[2]
        v_inf = float(w_inf.sum()) - mu_inf**2
    else:
        w_inf = np.full(spec.d, np.nan)
        v_inf = float("nan")
    return StationaryMoments(nu_inf, w_inf, mu_inf, v_inf, hs)


def _require_equal_gamma(gamma: np.ndarray, what: str) -> float:
    g = float(gamma[0])
    if np.abs(gamma - g).max() > 1e-12 * max(1.0, abs(g)):
        raise ApplicabilityError(f"{what} needs all gamma_i equal")
    return g


def _require_equilibrium(spec, what: str) -> np.ndarray:
    pi = stationary_distribution(spec.chain)
    if np.abs(np.asarray(spec.p0) - pi).max() > 1e-9:
        raise ApplicabilityError(f"{what} needs the chain started in equilibrium (p0 = pi)")
    return pi


def equal_gamma_closed_form(spec: MmouSpec, times) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance under uniform gamma, equilibrium start.

    The mean mixes m0 with the weighted drift level at rate gamma; the
    variance adds the averaged diffusion term and the double integral of the
    drift-level autocovariance of the chain, evaluated by quadrature on the
    matrix exponential.  A Gaussian initial level contributes
    ``b2 e^{-2 gamma t}``.
    """
    g = _require_equal_gamma(spec.gamma, "equal-gamma closed form")
    pi = _require_equilibrium(spec, "equal-gamma closed form")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    q = spec.chain.q
    alpha = spec.alpha
    pia = float(pi @ alpha)
    pis2 = float(pi @ spec.sigma2)
    dpi = np.diag(pi)
    ergodic = np.outer(np.ones(spec.d), pi)

    def cov_kernel(v: float) -> float:
        return float(alpha @ (dpi @ (linalg.expm(q, v) - ergodic)) @ alpha)

    mu = spec.m0_mean * np.exp(-g * times) + (pia / g) * (1.0 - np.exp(-g * times))
    var = np.empty(times.size)
    for k, t in enumerate(times):
        base = pis2 * (1.0 - np.exp(-2.0 * g * t)) / (2.0 * g)
        if t > 0.0:
            integral = linalg.quad(
                lambda v: (np.exp(-g * v) - np.exp(-g * (2.0 * t - v))) / g * cov_kernel(v),
                0.0,
                t,
                tol=1e-10,
            )
        else:
            integral = 0.0
        var[k] = base + integral + spec.m0_var * np.exp(-2.0 * g * t)
    return mu, var


def covariance_lag(spec: MmouSpec, t: float, u: float) -> float:
    """Cov(M(t), M(t+u)) via the block propagator.

    The pair (Cov(Z, M(t)), Cov(Y, M(t))) evolves linearly in the lag with
    block matrix [[Q^T, 0], [diag(alpha), Qbar]]; the covariance is the
    state-sum of the lower block after lag u.
    """
    if t < 0.0 or u < 0.0:
        raise ApplicabilityError("t and u must be nonnegative")
    d = spec.d
    first = transient_first_moment(spec, [t])
    second = transient_second_moment(spec, [t])
    nu_t = first.per_state[0]
    mu_t = first.aggregate[0]
    w_t = second.per_state[0]
    p_t = transient_distribution(spec.chain, spec.p0, t)
    b0 = nu_t - mu_t * p_t
    c0 = w_t - mu_t * nu_t
    big = np.zeros((2 * d, 2 * d))
    big[:d, :d] = spec.chain.q.T
    big[d:, :d] = np.diag(spec.alpha)
    big[d:, d:] = qbar(spec, 1)
    out = linalg.expm(big, u) @ np.concatenate([b0, c0])
    return float(out[d:].sum())


def higher_moments_transient(spec: MmouSpec, max_order: int, times) -> list[MomentTable]:
    """All moment vectors of orders 0..max_order on a time grid.

    Stacks the order hierarchy into one block lower-triangular system and
    takes a single matrix exponential per time.  Guarded to desk scale.
    """
    if max_order < 1:
        raise ApplicabilityError("max_order must be at least 1")
    d = spec.d
    if max_order * d > 2000:
        raise SizeError(f"stacked system of size {(max_order + 1) * d} exceeds the desk-scale guard")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    n = max_order
    dim = (n + 1) * d
    big = np.zeros((dim, dim))
    da = np.diag(spec.alpha)
    ds2 = np.diag(spec.sigma2)
    for k in range(n + 1):
        sl = slice(k * d, (k + 1) * d)
        big[sl, sl] = qbar(spec, k) if k else spec.chain.q.T
        if k >= 1:
            big[sl, (k - 1) * d : k * d] = k * da
        if k >= 2:
            big[sl, (k - 2) * d : (k - 1) * d] = 0.5 * k * (k - 1) * ds2
    raw = _raw_initial_moments(spec, n)
    x0 = np.concatenate([raw[k] * spec.p0 for k in range(n + 1)])
    stacked = np.empty((times.size, dim))
    for i, t in enumerate(times):
        stacked[i] = linalg.expm(big, t) @ x0
    tables = []
    for k in range(n + 1):
        per = stacked[:, k * d : (k + 1) * d]
        agg = per.sum(axis=1)
        variance = None
        if k == 2:
            mu = stacked[:, d : 2 * d].sum(axis=1)
            variance = agg - mu**2
        tables.append(MomentTable(k, times, per, agg, variance))
    return tables


def nonneg_definite_check(chain: GeneratorMatrix) -> float:
    """Smallest eigenvalue of D^T diag(pi) + diag(pi) D (symmetrized)."""
    dev = deviation_set(chain)
    dpi = np.diag(dev.pi)
    s = dev.deviation.T @ dpi + dpi @ dev.deviation
    return float(np.linalg.eigvalsh(s).min())


def _coordinate_gamma(mspec: MultiOuSpec, j: int, what: str) -> float:
    return _require_equal_gamma(mspec.coords[j].gamma, what)


def multi_transient_covariance(
    mspec: MultiOuSpec, j: int, k: int, t: float | None = None
) -> float:
    """Cov(M_j(t), M_k(t)) for per-coordinate uniform gamma, equilibrium start.

    ``t=None`` returns the long-run limit, which collapses to resolvent
    deviation quadratic forms.
    """
    what = "multi-coordinate covariance"
    gj = _coordinate_gamma(mspec, j, what)
    gk = _coordinate_gamma(mspec, k, what)
    pi = _require_equilibrium(mspec, what)
    aj = mspec.coords[j].alpha
    ak = mspec.coords[k].alpha
    dpi = np.diag(pi)
    if t is None:
        dj = resolvent_deviation(mspec.chain, gj)
        dk = resolvent_deviation(mspec.chain, gk)
        return float((aj @ dpi @ dk @ ak + ak @ dpi @ dj @ aj) / (gj + gk))
    if t < 0.0:
        raise ApplicabilityError("t must be nonnegative (or None for the limit)")
    if t == 0.0:
        return 0.0
    q = mspec.chain.q
    ergodic = np.outer(np.ones(mspec.d), pi)

    def kernel(a1, a2, v):
        return float(a1 @ (dpi @ (linalg.expm(q, v) - ergodic)) @ a2)

    term1 = linalg.quad(
        lambda v: (np.exp(-gk * v) - np.exp(-(gj + gk) * t + gj * v)) * kernel(aj, ak, v),
        0.0,
        t,
        tol=1e-10,
    )
    term2 = linalg.quad(
        lambda v: (np.exp(-gj * v) - np.exp(-(gj + gk) * t + gk * v)) * kernel(ak, aj, v),
        0.0,
        t,
        tol=1e-10,
    )
    return (term1 + term2) / (gj + gk)


@dataclass(frozen=True)
class TwoStateSummary:
    """Printed closed forms for the two-state, two-coordinate long run."""

    covariance: float
    variance_1: float
    variance_2: float
    correlation: float
    correlation_sigma0: float


def two_state_example(q12: float, q21: float, coords: list) -> TwoStateSummary:
    """Long-run covariance structure for d = 2, J = 2 in closed form.

    Uses pi = (q21, q12)/q with q = q12 + q21; per-coordinate uniform gamma
    required.  ``correlation_sigma0`` is the diffusion-free correlation,
    which depends only on the rates and the two gammas (and the sign of the
    drift-gap product).
    """
    if len(coords) != 2:
        raise ApplicabilityError("two_state_example needs exactly two coordinates")
    for c in coords:
        if np.asarray(c.alpha).shape != (2,):
            raise ApplicabilityError("two_state_example needs d = 2")
    g1 = _require_equal_gamma(np.asarray(coords[0].gamma, dtype=float), "two_state_example")
    g2 = _require_equal_gamma(np.asarray(coords[1].gamma, dtype=float), "two_state_example")
    q = q12 + q21
    pi = np.array([q21 / q, q12 / q])
    a1 = np.asarray(coords[0].alpha, dtype=float)
    a2 = np.asarray(coords[1].alpha, dtype=float)
    s1 = np.asarray(coords[0].sigma2, dtype=float)
    s2 = np.asarray(coords[1].sigma2, dtype=float)
    gap1 = a1[0] - a1[1]
    gap2 = a2[0] - a2[1]
    rate_factor = q12 * q21 / q**2
    cov = (
        1.0
        / (g1 + g2)
        * rate_factor
        * (2.0 * q + g1 + g2)
        / ((q + g1) * (q + g2))
        * gap1
        * gap2
    )
    var1 = float(pi @ s1) / (2.0 * g1) + rate_factor * gap1**2 / (g1 * (q + g1))
    var2 = float(pi @ s2) / (2.0 * g2) + rate_factor * gap2**2 / (g2 * (q + g2))
    corr = cov / np.sqrt(var1 * var2) if var1 > 0.0 and var2 > 0.0 else float("nan")
    corr_s0 = (
        np.sign(gap1 * gap2)
        * np.sqrt(g1 * g2 / ((q + g1) * (q + g2)))
        * (2.0 * q + g1 + g2)
        / (g1 + g2)
    )
    return TwoStateSummary(cov, var1, var2, float(corr), float(corr_s0))


def multi_stationary_mixed_moments(mspec: MultiOuSpec, k) -> np.ndarray:
    """Per-state stationary mixed moment vector E[prod_j M_j^{k_j}; X = i].

    Implements the joint-order recursion (one linear solve per multi-index)
    with the sign convention folded away, so the returned vectors are the
    plain unsigned moments; ``k = 0`` returns pi.
    """
    k = tuple(int(x) for x in np.atleast_1d(k))
    if len(k) != mspec.j_dim:
        raise ApplicabilityError(f"multi-index must have length J = {mspec.j_dim}")
    if any(x < 0 for x in k):
        raise ApplicabilityError("multi-index entries must be nonnegative")
    pi = stationary_distribution(mspec.chain)
    cache: dict[tuple, np.ndarray] = {}

    def rec(idx: tuple) -> np.ndarray:
        if all(x == 0 for x in idx):
            return pi
        if idx in cache:
            return cache[idx]
        d = mspec.d
        a = mspec.chain.q.T.copy()
        rhs = np.zeros(d)
        for j, kj in enumerate(idx):
            if kj == 0:
                continue
            c = mspec.coords[j]
            a -= kj * np.diag(c.gamma)
            lower = list(idx)
            lower[j] -= 1
            rhs += kj * np.diag(c.alpha) @ rec(tuple(lower))
            if kj >= 2:
                lower2 = list(idx)
                lower2[j] -= 2
                rhs += 0.5 * kj * (kj - 1) * np.diag(c.sigma2) @ rec(tuple(lower2))
        out = -linalg.solve(a, rhs, label=f"mixed moment {idx}")
        cache[idx] = out
        return out

    return rec(k)


def multi_cross_moment(mspec: MultiOuSpec) -> float:
    """E M_1 M_2 in the long run, by the printed two-coordinate fast path.

    Feeds the signed first-moment vectors into one linear solve; agrees with
    :func:`multi_stationary_mixed_moments` at multi-index (1, 1).
    """
    if mspec.j_dim < 2:
        raise ApplicabilityError("needs at least two coordinates")
    h10 = -multi_stationary_mixed_moments(mspec, (1, 0) + (0,) * (mspec.j_dim - 2))
    h01 = -multi_stationary_mixed_moments(mspec, (0, 1) + (0,) * (mspec.j_dim - 2))
    c1, c2 = mspec.coords[0], mspec.coords[1]
    a = mspec.chain.q.T - np.diag(c1.gamma) - np.diag(c2.gamma)
    rhs = np.diag(c1.alpha) @ h01 + np.diag(c2.alpha) @ h10
    return float(linalg.solve(a, rhs, label="cross moment").sum())
