"""The modulating continuous-time Markov chain.

Generator validation, stationary and transient laws, the deviation /
fundamental / resolvent-deviation matrices, and exact path sampling.

Conventions.  For a two-state chain with rates ``q12`` (out of state 1)
and ``q21`` (out of state 2), the stationary law is
``pi = (q21, q12) / (q12 + q21)`` and the resolvent deviation is

    D(gamma) = 1/(q + gamma) * [[ pi_2, -pi_2 ],
                                [ -pi_1,  pi_1 ]],      q = q12 + q21.

Everything here is computed from the definitions (``pi^T Q = 0``,
``D(gamma) = int (p_ij(v) - pi_j) e^{-gamma v} dv``), so all printed
special-case formulas are reproduced under this index convention.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DimensionError, DomainError, MmouError, StructureError

__all__ = [
    "GeneratorMatrix",
    "DeviationSet",
    "CtmcPath",
    "stationary_distribution",
    "transient_distribution",
    "deviation_set",
    "resolvent_deviation",
    "sample_path",
    "occupation_integral",
]


class GeneratorMatrix:
    """Validated CTMC rate matrix.

    Off-diagonal entries must be nonnegative.  The diagonal is always
    recomputed as minus the off-diagonal row sum; if the supplied diagonal
    deviated by more than ``1e-12 * max rate`` a warning is emitted rather
    than rejecting the input.  Irreducibility (strong connectivity of the
    support graph) is required unless ``allow_absorbing=True``, which is
    reserved for the explicit absorbing special cases.
    """

    def __init__(self, q: np.ndarray, allow_absorbing: bool = False):
        q = np.asarray(q, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise DimensionError(f"generator must be square, got shape {q.shape}")
        if not np.all(np.isfinite(q)):
            raise DimensionError("generator has non-finite entries")
        d = q.shape[0]
        off = q.copy()
        np.fill_diagonal(off, 0.0)
        if off.min() < 0.0:
            i, j = divmod(int(np.argmin(off)), d)
            raise DomainError(f"negative rate q[{i},{j}] = {off.min():g}")
        scale = off.max() if off.max() > 0 else 1.0
        recentred = off.copy()
        np.fill_diagonal(recentred, -off.sum(axis=1))
        if np.abs(q - recentred).max() > 1e-12 * scale:
            warnings.warn(
                "generator rows did not sum to zero; diagonal recomputed "
                "from off-diagonal rates",
                stacklevel=2,
            )
        self.q = recentred
        self.d = d
        self.allow_absorbing = bool(allow_absorbing)
        self.irreducible = self._strongly_connected()
        if not self.irreducible and not allow_absorbing:
            raise StructureError(
                "generator is reducible (support graph not strongly connected); "
                "pass allow_absorbing=True only for the absorbing special cases"
            )

    def _strongly_connected(self) -> bool:
        support = self.q > 0.0
        if self.d == 1:
            return True

        def reaches_all(adj: np.ndarray) -> bool:
            seen = np.zeros(self.d, dtype=bool)
            stack = [0]
            seen[0] = True
            while stack:
                i = stack.pop()
                for j in np.nonzero(adj[i])[0]:
                    if not seen[j]:
                        seen[j] = True
                        stack.append(int(j))
            return bool(seen.all())

        return reaches_all(support) and reaches_all(support.T)

    @property
    def exit_rates(self) -> np.ndarray:
        """Rates q_i of leaving each state."""
        return -np.diag(self.q)

    def jump_cumprobs(self) -> np.ndarray:
        """Row-wise cumulative next-state probabilities (self excluded).

        Absorbing rows (exit rate 0) are left as all-ones; they are never
        consulted because no jump occurs there.
        """
        rates = self.q.copy()
        np.fill_diagonal(rates, 0.0)
        out = np.ones((self.d, self.d))
        ex = self.exit_rates
        for i in range(self.d):
            if ex[i] > 0.0:
                out[i] = np.cumsum(rates[i] / ex[i])
        return out

    def __repr__(self) -> str:  # pragma: no cover
        return f"GeneratorMatrix(d={self.d}, q=\n{self.q})"


@dataclass(frozen=True)
class DeviationSet:
    """Stationary law and the matrices built on it.

    ``ergodic`` is the rank-one matrix 1 pi^T, ``fundamental`` its inverse
    shift (Pi - Q)^{-1}, and ``deviation`` the difference of the two.
    """

    pi: np.ndarray
    ergodic: np.ndarray
    fundamental: np.ndarray
    deviation: np.ndarray


@dataclass(frozen=True)
class CtmcPath:
    """Piecewise-constant trajectory on a finite horizon.

    ``jump_times`` are strictly increasing and below ``horizon``;
    ``post_jump_states[k]`` is the state entered at ``jump_times[k]``.
    States are 0-based indices.
    """

    initial_state: int
    jump_times: np.ndarray
    post_jump_states: np.ndarray
    horizon: float

    def __post_init__(self):
        jt = np.asarray(self.jump_times, dtype=float)
        st = np.asarray(self.post_jump_states, dtype=np.int64)
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "post_jump_states", st)
        if jt.shape != st.shape:
            raise DimensionError("jump_times and post_jump_states differ in length")
        if jt.size:
            if np.any(np.diff(jt) <= 0.0):
                raise DomainError("jump times must be strictly increasing")
            if jt[0] <= 0.0 or jt[-1] >= self.horizon:
                raise DomainError("jump times must lie strictly inside (0, horizon)")
            states = np.concatenate([[self.initial_state], st])
            if np.any(states[1:] == states[:-1]):
                raise DomainError("consecutive states must differ")
            if st.min() < 0:
                raise DomainError("negative state index")

    @property
    def n_jumps(self) -> int:
        return int(self.jump_times.size)

    def state_at(self, t: float) -> int:
        """State occupied at time ``t`` (right-continuous)."""
        if t < 0.0 or t > self.horizon:
            raise DomainError(f"t={t} outside [0, {self.horizon}]")
        k = int(np.searchsorted(self.jump_times, t, side="right"))
        return self.initial_state if k == 0 else int(self.post_jump_states[k - 1])

    def segments(self, upto: float | None = None):
        """Yield ``(start, end, state)`` covering ``[0, upto]``."""
        end = self.horizon if upto is None else float(upto)
        if end < 0.0 or end > self.horizon:
            raise DomainError(f"t={end} outside [0, {self.horizon}]")
        start = 0.0
        state = self.initial_state
        for tj, sj in zip(self.jump_times, self.post_jump_states):
            if tj >= end:
                break
            if tj > start:
                yield start, float(tj), int(state)
            start, state = float(tj), int(sj)
        if end > start or end == 0.0:
            yield start, end, int(state)


def _require_irreducible(g: GeneratorMatrix, what: str) -> None:
    if not g.irreducible:
        raise StructureError(f"{what} requires an irreducible chain")


def stationary_distribution(g: GeneratorMatrix) -> np.ndarray:
    """Probability vector pi with pi^T Q = 0.

    Solved exactly by replacing the last row of Q^T with the normalization
    constraint; no eigensolver involved.
    """
    _require_irreducible(g, "stationary distribution")
    a = g.q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(g.d)
    b[-1] = 1.0
    pi = linalg.solve(a, b, label="stationary distribution system")
    if pi.min() <= 0.0:
        raise MmouError("internal error: nonpositive stationary probability")
    return pi / pi.sum()


def _check_prob_vector(p, d: int, name: str = "p0") -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (d,):
        raise DimensionError(f"{name} must have length {d}")
    if p.min() < -1e-12 or abs(p.sum() - 1.0) > 1e-9:
        raise DomainError(f"{name} is not a probability vector")
    return np.clip(p, 0.0, None) / np.clip(p, 0.0, None).sum()


def transient_distribution(g: GeneratorMatrix, p0: np.ndarray, t: float) -> np.ndarray:
    """Law of the state at time ``t``: exp(Q^T t) p0."""
    if t < 0.0:
        raise DomainError(f"t={t} must be nonnegative")
    p0 = _check_prob_vector(p0, g.d)
    p = linalg.expm(g.q.T, t) @ p0
    return np.clip(p, 0.0, None) / np.clip(p, 0.0, None).sum()


def deviation_set(g: GeneratorMatrix) -> DeviationSet:
    """Stationary law plus ergodic, fundamental and deviation matrices.

    The defining identities (Q F = F Q = Pi - I, Pi D = D Pi = 0, F 1 = 1,
    D 1 = 0, pi^T D = 0) are verified to 1e-10 before returning.
    """
    _require_irreducible(g, "deviation matrices")
    pi = stationary_distribution(g)
    d = g.d
    ones = np.ones(d)
    ergodic = np.outer(ones, pi)
    ident = np.eye(d)
    fundamental = np.linalg.inv(ergodic - g.q)
    deviation = fundamental - ergodic

    checks = [
        np.abs(g.q @ fundamental - (ergodic - ident)).max(),
        np.abs(fundamental @ g.q - (ergodic - ident)).max(),
        np.abs(ergodic @ deviation).max(),
        np.abs(deviation @ ergodic).max(),
        np.abs(fundamental @ ones - ones).max(),
        np.abs(deviation @ ones).max(),
        np.abs(pi @ deviation).max(),
    ]
    if max(checks) > 1e-10:
        raise MmouError(
            f"internal error: deviation-set identities violated ({max(checks):.2e})"
        )
    return DeviationSet(pi=pi, ergodic=ergodic, fundamental=fundamental, deviation=deviation)


def resolvent_deviation(g: GeneratorMatrix, gamma: float) -> np.ndarray:
    """Exponentially discounted deviation matrix D(gamma), gamma > 0.

    Computed in closed form as (gamma I - Q)^{-1} - Pi/gamma, which is the
    definition-based integral int (p_ij(v) - pi_j) e^{-gamma v} dv.
    """
    if gamma <= 0.0:
        raise DomainError(f"gamma={gamma} must be positive")
    _require_irreducible(g, "resolvent deviation")
    pi = stationary_distribution(g)
    ergodic = np.outer(np.ones(g.d), pi)
    resolvent = np.linalg.inv(gamma * np.eye(g.d) - g.q)
    return resolvent - ergodic / gamma


def sample_path(
    g: GeneratorMatrix, p0: np.ndarray, horizon: float, rng: np.random.Generator
) -> CtmcPath:
    """Exact CTMC path on ``[0, horizon]``.

    Initial state from ``p0``; holding times Exponential(q_i); next state
    with probability ``q_ij / q_i``.  Deterministic given the stream.
    """
    if horizon <= 0.0:
        raise DomainError("horizon must be positive")
    p0 = _check_prob_vector(p0, g.d)
    ex = g.exit_rates
    cum_next = g.jump_cumprobs()
    initial = min(int(np.searchsorted(np.cumsum(p0), rng.random(), side="right")), g.d - 1)
    state = initial
    t = 0.0
    jump_times: list[float] = []
    states: list[int] = []
    while True:
        if ex[state] <= 0.0:
            break  # absorbing: constant for the rest of the horizon
        t += rng.exponential(1.0 / ex[state])
        if t >= horizon:
            break
        nxt = min(int(np.searchsorted(cum_next[state], rng.random(), side="right")), g.d - 1)
        jump_times.append(t)
        states.append(nxt)
        state = nxt
    return CtmcPath(
        initial_state=initial,
        jump_times=np.array(jump_times),
        post_jump_states=np.array(states, dtype=np.int64),
        horizon=float(horizon),
    )


def occupation_integral(path: CtmcPath, weights: np.ndarray, t: float) -> float:
    """Integral of ``weights[X(s)]`` over ``[0, t]``, exactly."""
    weights = np.asarray(weights, dtype=float)
    if t < 0.0 or t > path.horizon:
        raise DomainError(f"t={t} outside [0, {path.horizon}]")
    total = 0.0
    for s0, s1, state in path.segments(t):
        total += weights[state] * (s1 - s0)
    return total
