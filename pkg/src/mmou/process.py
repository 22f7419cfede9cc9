"""The regime-switching OU process itself.

While the background chain sits in state i, the process follows the SDE
``dM = (alpha_i - gamma_i M) dt + sigma_i dB``.  Conditional on the chain
path, M(t) is Gaussian with a mean and variance that accumulate in closed
form across the path's constant segments; every sampler here exploits that
to draw terminal values with no time-discretization error.  An
Euler-Maruyama scheme is provided purely as an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from . import _kernels
from .chain import CtmcPath, GeneratorMatrix, stationary_distribution
from .errors import DimensionError, DomainError, StabilityError

__all__ = [
    "NormalInitial",
    "MmouSpec",
    "CoordOu",
    "MultiOuSpec",
    "ConditionalGaussian",
    "JointGaussian",
    "conditional_moments",
    "conditional_joint",
    "sample_terminal",
    "sample_multi_terminal",
    "sample_terminal_batch",
    "sample_multi_terminal_batch",
    "flow_checkpoints_batch",
    "simulate_euler",
]


@dataclass(frozen=True)
class NormalInitial:
    """Gaussian initial level, mean ``a`` and variance ``b2``."""

    a: float
    b2: float

    def __post_init__(self):
        if self.b2 < 0.0:
            raise DomainError("initial variance must be nonnegative")


def _as_vector(x, d: int, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (d,):
        raise DimensionError(f"{name} must have length {d}")
    if not np.all(np.isfinite(v)):
        raise DimensionError(f"{name} has non-finite entries")
    return v


class MmouSpec:
    """Per-state parameter triples plus the initial condition.

    Parameters
    ----------
    chain : GeneratorMatrix
        The modulating chain.
    alpha, gamma, sigma2 : (d,) arrays
        Drift level, mean-reversion rate (> 0) and instantaneous variance
        (>= 0) per background state.
    m0 : float or NormalInitial
        Initial level: point mass or independent Gaussian.
    p0 : (d,) array or None
        Initial law of the chain; ``None`` means the stationary law.
    """

    def __init__(self, chain: GeneratorMatrix, alpha, gamma, sigma2, m0=0.0, p0=None):
        self.chain = chain
        d = chain.d
        self.alpha = _as_vector(alpha, d, "alpha")
        self.gamma = _as_vector(gamma, d, "gamma")
        self.sigma2 = _as_vector(sigma2, d, "sigma2")
        if self.gamma.min() <= 0.0:
            raise DomainError("all mean-reversion rates gamma must be positive")
        if self.sigma2.min() < 0.0:
            raise DomainError("sigma2 entries must be nonnegative")
        self.m0 = m0 if isinstance(m0, NormalInitial) else float(m0)
        if p0 is None:
            self.p0 = stationary_distribution(chain)
        else:
            p0 = _as_vector(p0, d, "p0")
            if p0.min() < -1e-12 or abs(p0.sum() - 1.0) > 1e-9:
                raise DomainError("p0 is not a probability vector")
            self.p0 = np.clip(p0, 0.0, None) / np.clip(p0, 0.0, None).sum()

    @property
    def d(self) -> int:
        return self.chain.d

    @property
    def m0_mean(self) -> float:
        return self.m0.a if isinstance(self.m0, NormalInitial) else self.m0

    @property
    def m0_var(self) -> float:
        return self.m0.b2 if isinstance(self.m0, NormalInitial) else 0.0

    def started_in_equilibrium(self, tol: float = 1e-9) -> bool:
        if not self.chain.irreducible:
            return False
        return bool(np.abs(self.p0 - stationary_distribution(self.chain)).max() <= tol)


@dataclass(frozen=True)
class CoordOu:
    """One coordinate's parameter set in a multi-coordinate model."""

    alpha: np.ndarray
    gamma: np.ndarray
    sigma2: np.ndarray
    m0: float | NormalInitial = 0.0


class MultiOuSpec:
    """J OU coordinates driven by one shared chain, independent noises."""

    def __init__(self, chain: GeneratorMatrix, coords: list[CoordOu], p0=None):
        if not coords:
            raise DimensionError("need at least one coordinate")
        self.chain = chain
        self.coords = [
            CoordOu(
                _as_vector(c.alpha, chain.d, f"coords[{k}].alpha"),
                _as_vector(c.gamma, chain.d, f"coords[{k}].gamma"),
                _as_vector(c.sigma2, chain.d, f"coords[{k}].sigma2"),
                c.m0 if isinstance(c.m0, NormalInitial) else float(c.m0),
            )
            for k, c in enumerate(coords)
        ]
        for k, c in enumerate(self.coords):
            if c.gamma.min() <= 0.0:
                raise DomainError(f"coords[{k}].gamma must be positive")
            if c.sigma2.min() < 0.0:
                raise DomainError(f"coords[{k}].sigma2 must be nonnegative")
        if p0 is None:
            self.p0 = stationary_distribution(chain)
        else:
            p0 = _as_vector(p0, chain.d, "p0")
            if p0.min() < -1e-12 or abs(p0.sum() - 1.0) > 1e-9:
                raise DomainError("p0 is not a probability vector")
            self.p0 = np.clip(p0, 0.0, None) / np.clip(p0, 0.0, None).sum()

    @property
    def d(self) -> int:
        return self.chain.d

    @property
    def j_dim(self) -> int:
        return len(self.coords)

    def coordinate(self, j: int) -> MmouSpec:
        c = self.coords[j]
        return MmouSpec(self.chain, c.alpha, c.gamma, c.sigma2, c.m0, self.p0)


@dataclass(frozen=True)
class ConditionalGaussian:
    """Law of M(t) given one chain path."""

    mean: float
    variance: float


@dataclass(frozen=True)
class JointGaussian:
    """Law of (M(t1), M(t2)) given one chain path."""

    means: tuple[float, float]
    variances: tuple[float, float]
    covariance: float


def _flow_on_path(gamma, alpha, sigma2, path: CtmcPath, checkpoints):
    """Exact flow accumulation along a path.

    Per constant segment of length L in state i the triple updates as
    decay *= e, drift = drift*e + (alpha_i/gamma_i)(1-e),
    var = var*e^2 + (sigma2_i/(2 gamma_i))(1-e^2) with e = exp(-gamma_i L).
    Returns arrays (decay, drift, var, state) per checkpoint.
    """
    checkpoints = np.asarray(checkpoints, dtype=float)
    out_de = np.empty(checkpoints.size)
    out_dr = np.empty(checkpoints.size)
    out_va = np.empty(checkpoints.size)
    out_st = np.empty(checkpoints.size, dtype=np.int64)
    de, dr, va = 1.0, 0.0, 0.0
    kc = 0
    cursor = 0.0
    last_state = path.initial_state
    t_max = checkpoints[-1]

    def advance(length: float, state: int) -> None:
        nonlocal de, dr, va
        e1 = np.exp(-gamma[state] * length)
        de *= e1
        dr = dr * e1 + alpha[state] / gamma[state] * (1.0 - e1)
        e2 = e1 * e1
        va = va * e2 + sigma2[state] / (2.0 * gamma[state]) * (1.0 - e2)

    for _s0, s1, state in path.segments(t_max):
        last_state = state
        # checkpoints strictly inside the segment keep its state; a
        # checkpoint at the segment boundary is served by the next segment
        # (right-continuity at jump epochs)
        while kc < checkpoints.size and checkpoints[kc] < s1:
            advance(checkpoints[kc] - cursor, state)
            out_de[kc], out_dr[kc], out_va[kc], out_st[kc] = de, dr, va, state
            cursor = checkpoints[kc]
            kc += 1
        advance(s1 - cursor, state)
        cursor = s1
        if kc == checkpoints.size:
            break
    while kc < checkpoints.size:  # checkpoints exactly at t_max
        out_de[kc], out_dr[kc], out_va[kc], out_st[kc] = de, dr, va, last_state
        kc += 1
    return out_de, out_dr, out_va, out_st


def _check_path(spec, path: CtmcPath, t: float) -> None:
    if t < 0.0 or t > path.horizon:
        raise DomainError(f"t={t} outside the path horizon {path.horizon}")
    if path.post_jump_states.size and path.post_jump_states.max() >= spec.chain.d:
        raise DimensionError("path states exceed the chain dimension")
    if path.initial_state >= spec.chain.d:
        raise DimensionError("path initial state exceeds the chain dimension")


def conditional_moments(spec: MmouSpec, path: CtmcPath, t: float) -> ConditionalGaussian:
    """Gaussian law of M(t) given the chain path, exactly.

    A Gaussian initial level contributes ``b2 * decay^2`` to the variance.
    """
    _check_path(spec, path, t)
    de, dr, va, _ = _flow_on_path(spec.gamma, spec.alpha, spec.sigma2, path, [t])
    return ConditionalGaussian(
        mean=spec.m0_mean * de[0] + dr[0],
        variance=va[0] + spec.m0_var * de[0] ** 2,
    )


def conditional_joint(spec: MmouSpec, path: CtmcPath, t1: float, t2: float) -> JointGaussian:
    """Bivariate Gaussian law of (M(t1), M(t2)) given the path.

    The covariance follows from composing the flow over [t1, t2]:
    Cov = exp(-(Gamma(t2) - Gamma(t1))) * Var(M(t1) | path).
    """
    if t1 > t2:
        raise DomainError("need t1 <= t2")
    _check_path(spec, path, t2)
    de, dr, va, _ = _flow_on_path(spec.gamma, spec.alpha, spec.sigma2, path, [t1, t2])
    v1 = va[0] + spec.m0_var * de[0] ** 2
    v2 = va[1] + spec.m0_var * de[1] ** 2
    ratio = de[1] / de[0] if de[0] > 0.0 else 0.0
    return JointGaussian(
        means=(spec.m0_mean * de[0] + dr[0], spec.m0_mean * de[1] + dr[1]),
        variances=(v1, v2),
        covariance=ratio * v1,
    )


def sample_terminal(
    spec: MmouSpec, paths: list[CtmcPath], t: float, rng: np.random.Generator
):
    """Exact terminal draws, one per supplied path.

    Gaussian initial levels are realized by adding an independent draw to
    the initial-value term of the conditional mean; the result is exact in
    distribution.  Returns ``(values, states)``.
    """
    values = np.empty(len(paths))
    states = np.empty(len(paths), dtype=np.int64)
    sd0 = np.sqrt(spec.m0_var)
    for k, path in enumerate(paths):
        _check_path(spec, path, t)
        de, dr, va, st = _flow_on_path(spec.gamma, spec.alpha, spec.sigma2, path, [t])
        m0 = spec.m0_mean + (sd0 * rng.standard_normal() if sd0 > 0.0 else 0.0)
        values[k] = m0 * de[0] + dr[0] + np.sqrt(va[0]) * rng.standard_normal()
        states[k] = st[0]
    return values, states


def sample_multi_terminal(
    spec: MultiOuSpec, paths: list[CtmcPath], t: float, rng: np.random.Generator
):
    """Exact terminal draws for all coordinates on shared paths.

    Coordinates are conditionally independent given the path, so each gets
    its own Gaussian draw; dependence across coordinates enters only through
    the shared path.  Returns ``(values (n, J), states (n,))``.
    """
    n = len(paths)
    j_dim = spec.j_dim
    values = np.empty((n, j_dim))
    states = np.empty(n, dtype=np.int64)
    for k, path in enumerate(paths):
        _check_path(spec, path, t)
        for j, c in enumerate(spec.coords):
            de, dr, va, st = _flow_on_path(c.gamma, c.alpha, c.sigma2, path, [t])
            mean0 = c.m0.a if isinstance(c.m0, NormalInitial) else c.m0
            var0 = c.m0.b2 if isinstance(c.m0, NormalInitial) else 0.0
            m0 = mean0 + (np.sqrt(var0) * rng.standard_normal() if var0 > 0.0 else 0.0)
            values[k, j] = m0 * de[0] + dr[0] + np.sqrt(va[0]) * rng.standard_normal()
            states[k] = st[0]
    return values, states


def _kernel_tables(spec: MmouSpec | MultiOuSpec):
    chain = spec.chain
    if isinstance(spec, MmouSpec):
        coords = [CoordOu(spec.alpha, spec.gamma, spec.sigma2, spec.m0)]
        p0 = spec.p0
    else:
        coords = spec.coords
        p0 = spec.p0
    j_dim = len(coords)
    d = chain.d
    gam = np.empty((j_dim, d))
    aog = np.empty((j_dim, d))
    s2g = np.empty((j_dim, d))
    m0_mean = np.empty(j_dim)
    m0_sd = np.empty(j_dim)
    for j, c in enumerate(coords):
        gam[j] = c.gamma
        aog[j] = c.alpha / c.gamma
        s2g[j] = c.sigma2 / (2.0 * c.gamma)
        if isinstance(c.m0, NormalInitial):
            m0_mean[j] = c.m0.a
            m0_sd[j] = np.sqrt(c.m0.b2)
        else:
            m0_mean[j] = c.m0
            m0_sd[j] = 0.0
    return (
        np.cumsum(p0),
        chain.exit_rates,
        chain.jump_cumprobs(),
        gam,
        aog,
        s2g,
        m0_mean,
        m0_sd,
    )


def flow_checkpoints_batch(
    spec: MmouSpec | MultiOuSpec,
    n: int,
    times,
    seed: int,
    start_index: int = 0,
    tau: float = 0.0,
):
    """Batched conditional-Gaussian ingredients at checkpoint times.

    Path ``i`` uses the stream keyed ``(seed, start_index + i)``; output is
    independent of batching and thread count.  With ``tau > 0`` each path is
    evaluated at an independent Exponential(tau) time instead of ``times``.
    Returns ``decay, drift, var`` with shape (n, m, J), occupied states
    (n, m), terminal/initial uniforms (n, J), and evaluation times (n, m).
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(np.diff(times) < 0.0) or times.min() < 0.0:
        raise DomainError("checkpoint times must be sorted and nonnegative")
    if tau > 0.0 and times.size != 1:
        raise DomainError("exponential killing uses exactly one checkpoint slot")
    p0c, qexit, jcum, gam, aog, s2g, _, _ = _kernel_tables(spec)
    return _kernels.flows_at_times(
        np.uint64(seed),
        np.uint64(start_index),
        int(n),
        times,
        float(tau),
        p0c,
        qexit,
        jcum,
        gam,
        aog,
        s2g,
    )


def sample_terminal_batch(
    spec: MmouSpec, n: int, t: float, seed: int, start_index: int = 0
):
    """Exact terminal sampling with internally derived per-path streams.

    Same law as :func:`sample_terminal` over freshly sampled paths; the
    Gaussian draws come from the inverse normal CDF applied to each path's
    dedicated uniforms, so the result depends only on (seed, path index).
    Returns ``(values (n,), states (n,))``.
    """
    if t < 0.0:
        raise DomainError("t must be nonnegative")
    de, dr, va, st, u_term, u_init, _ = flow_checkpoints_batch(
        spec, n, [t], seed, start_index
    )
    z = ndtri(u_term[:, 0])
    m0 = spec.m0_mean + np.sqrt(spec.m0_var) * ndtri(u_init[:, 0]) if spec.m0_var > 0.0 else spec.m0_mean
    values = m0 * de[:, 0, 0] + dr[:, 0, 0] + np.sqrt(va[:, 0, 0]) * z
    return values, st[:, 0]


def sample_multi_terminal_batch(
    spec: MultiOuSpec, n: int, t: float, seed: int, start_index: int = 0
):
    """Batched exact terminal sampling of all coordinates on shared paths."""
    de, dr, va, st, u_term, u_init, _ = flow_checkpoints_batch(
        spec, n, [t], seed, start_index
    )
    j_dim = spec.j_dim
    values = np.empty((n, j_dim))
    for j, c in enumerate(spec.coords):
        mean0 = c.m0.a if isinstance(c.m0, NormalInitial) else c.m0
        var0 = c.m0.b2 if isinstance(c.m0, NormalInitial) else 0.0
        m0 = mean0 + np.sqrt(var0) * ndtri(u_init[:, j]) if var0 > 0.0 else mean0
        values[:, j] = m0 * de[:, 0, j] + dr[:, 0, j] + np.sqrt(va[:, 0, j]) * ndtri(u_term[:, j])
    return values, st[:, 0]


def simulate_euler(spec: MmouSpec, t: float, dt: float, n: int, seed: int, start_index: int = 0):
    """Euler-Maruyama terminal values; independent discretization oracle.

    The chain is simulated exactly and jump epochs refine the time grid, so
    the O(dt) bias is confined to the diffusion.  Raises
    :class:`StabilityError` for steps at or beyond half the fastest
    mean-reversion time.
    """
    if dt <= 0.0:
        raise DomainError("dt must be positive")
    if dt >= 0.5 / spec.gamma.max():
        raise StabilityError(
            f"dt={dt:g} >= 0.5/max(gamma)={0.5 / spec.gamma.max():g}; refine the grid"
        )
    if t < 0.0:
        raise DomainError("t must be nonnegative")
    p0c, qexit, jcum, gam, aog, s2g, m0_mean, m0_sd = _kernel_tables(spec)
    values, states = _kernels.euler_terminal(
        np.uint64(seed),
        np.uint64(start_index),
        int(n),
        float(t),
        float(dt),
        p0c,
        qexit,
        jcum,
        spec.gamma,
        spec.alpha,
        np.sqrt(spec.sigma2),
        float(m0_mean[0]),
        float(m0_sd[0]),
    )
    return values
