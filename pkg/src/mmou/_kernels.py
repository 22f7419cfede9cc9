"""Numba kernels for batched exact path sampling.

Each path owns the Philox-4x64-10 stream keyed by ``(seed, path_index)``
(see :mod:`mmou.rng`) and consumes its words in a fixed order:

    [killing-time draw when tau > 0]
    initial-state draw
    J terminal-Gaussian uniforms        (converted by ndtri outside)
    J initial-value uniforms
    per segment: holding-time draw, next-state draw

so results are independent of batching and thread count.  The kernels
return the conditional-Gaussian ingredients (decay of the initial value,
accumulated drift, accumulated variance) per checkpoint time rather than
samples; callers combine them with the Gaussian draws.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np
from numba import njit, prange

_U64 = np.uint64
_M0 = _U64(0xD2E7470EE14C6C93)
_M1 = _U64(0xCA5A826395121157)
_W0 = _U64(0x9E3779B97F4A7C15)
_W1 = _U64(0xBB67AE8584CAA73B)
_MASK32 = _U64(0xFFFFFFFF)
_S32 = _U64(32)
_S11 = _U64(11)
_INV53 = 1.0 / (1 << 53)
_BIG = 1e300


@njit(nb.types.UniTuple(nb.uint64, 2)(nb.uint64, nb.uint64), cache=True, inline="always")
def _mulhilo(m, a):
    lo = m * a
    al = a & _MASK32
    ah = a >> _S32
    bl = m & _MASK32
    bh = m >> _S32
    mll = al * bl
    mlh = al * bh
    mhl = ah * bl
    carry = ((mll >> _S32) + (mlh & _MASK32) + (mhl & _MASK32)) >> _S32
    hi = ah * bh + (mlh >> _S32) + (mhl >> _S32) + carry
    return hi, lo


@njit(nb.types.UniTuple(nb.uint64, 4)(nb.uint64, nb.uint64, nb.uint64), cache=True, inline="always")
def _philox4(ctr, k0, k1):
    c0 = ctr
    c1 = _U64(0)
    c2 = _U64(0)
    c3 = _U64(0)
    for r in range(10):
        if r:
            k0 += _W0
            k1 += _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@njit(cache=True, inline="always")
def _next_u(buf, pos, k0, k1):
    p = pos[0]
    if p == 4:
        c = pos[1] + 1
        b0, b1, b2, b3 = _philox4(_U64(c), k0, k1)
        buf[0] = b0
        buf[1] = b1
        buf[2] = b2
        buf[3] = b3
        pos[1] = c
        p = 0
    u = (buf[p] >> _S11) * _INV53
    pos[0] = p + 1
    return u


@njit(cache=True)
def philox_words(seed, index, n_words):
    """Raw word stream of one path's generator (test hook)."""
    out = np.empty(n_words, dtype=np.uint64)
    k0 = _U64(seed)
    k1 = _U64(index)
    ctr = 0
    filled = 0
    while filled < n_words:
        b0, b1, b2, b3 = _philox4(_U64(ctr), k0, k1)
        for w in (b0, b1, b2, b3):
            if filled < n_words:
                out[filled] = w
                filled += 1
        ctr += 1
    return out


@njit(cache=True, inline="always")
def _pick(cum, u):
    d = cum.shape[0]
    s = 0
    while s < d - 1 and u > cum[s]:
        s += 1
    return s


@njit(parallel=True, cache=True)
def flows_at_times(
    seed,
    start,
    n,
    times,
    tau,
    p0_cum,
    q_exit,
    jump_cum,
    gam,
    a_over_g,
    s2_over_2g,
):
    """Conditional-Gaussian flow ingredients at checkpoint times.

    ``gam``, ``a_over_g`` and ``s2_over_2g`` are (J, d) per-coordinate state
    tables.  ``times`` must be sorted ascending.  When ``tau > 0`` the single
    checkpoint is an Exponential(tau) killing time drawn per path and
    ``times`` is ignored except for its length, which must be 1.

    Returns ``decay, drift, var`` of shape (n, m, J), the occupied state at
    each checkpoint (n, m), the terminal and initial-value uniforms
    (n, J) each, and the per-path evaluation times (n, m).
    """
    m = times.shape[0]
    j_dim = gam.shape[0]
    decay = np.empty((n, m, j_dim))
    drift = np.empty((n, m, j_dim))
    var = np.empty((n, m, j_dim))
    state_at = np.empty((n, m), dtype=np.int64)
    u_term = np.empty((n, j_dim))
    u_init = np.empty((n, j_dim))
    t_eval = np.empty((n, m))

    for i in prange(n):
        k0 = _U64(seed)
        k1 = _U64(start + i)
        buf = np.empty(4, dtype=np.uint64)
        pos = np.zeros(2, dtype=np.int64)
        b0, b1, b2, b3 = _philox4(_U64(0), k0, k1)
        buf[0] = b0
        buf[1] = b1
        buf[2] = b2
        buf[3] = b3

        t_kill = -1.0
        if tau > 0.0:
            t_kill = -math.log1p(-_next_u(buf, pos, k0, k1)) / tau
            t_eval[i, 0] = t_kill
        else:
            for k in range(m):
                t_eval[i, k] = times[k]

        s = _pick(p0_cum, _next_u(buf, pos, k0, k1))
        for j in range(j_dim):
            u_term[i, j] = _next_u(buf, pos, k0, k1)
        for j in range(j_dim):
            u_init[i, j] = _next_u(buf, pos, k0, k1)

        de = np.ones(j_dim)
        dr = np.zeros(j_dim)
        va = np.zeros(j_dim)
        cursor = 0.0
        kc = 0
        while kc < m:
            q = q_exit[s]
            if q > 0.0:
                hold = -math.log1p(-_next_u(buf, pos, k0, k1)) / q
            else:
                hold = _BIG
            seg_end = cursor + hold
            while kc < m:
                tk = t_kill if tau > 0.0 else times[kc]
                if tk > seg_end:
                    break
                length = tk - cursor
                for j in range(j_dim):
                    e1 = math.exp(-gam[j, s] * length)
                    de[j] *= e1
                    dr[j] = dr[j] * e1 + a_over_g[j, s] * (1.0 - e1)
                    e2 = e1 * e1
                    va[j] = va[j] * e2 + s2_over_2g[j, s] * (1.0 - e2)
                    decay[i, kc, j] = de[j]
                    drift[i, kc, j] = dr[j]
                    var[i, kc, j] = va[j]
                state_at[i, kc] = s
                cursor = tk
                kc += 1
            if kc == m:
                break
            length = seg_end - cursor
            for j in range(j_dim):
                e1 = math.exp(-gam[j, s] * length)
                de[j] *= e1
                dr[j] = dr[j] * e1 + a_over_g[j, s] * (1.0 - e1)
                e2 = e1 * e1
                va[j] = va[j] * e2 + s2_over_2g[j, s] * (1.0 - e2)
            cursor = seg_end
            s = _pick(jump_cum[s], _next_u(buf, pos, k0, k1))

    return decay, drift, var, state_at, u_term, u_init, t_eval


@njit(cache=True, inline="always")
def _box_muller(buf, pos, k0, k1):
    u1 = _next_u(buf, pos, k0, k1)
    u2 = _next_u(buf, pos, k0, k1)
    return math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(2.0 * math.pi * u2)


@njit(parallel=True, cache=True)
def euler_terminal(
    seed,
    start,
    n,
    t,
    dt,
    p0_cum,
    q_exit,
    jump_cum,
    gam,
    alp,
    sig,
    m0_mean,
    m0_sd,
):
    """Euler-Maruyama terminal values with jump epochs hit exactly.

    The background path is sampled exactly first (same draw order as the
    flow kernels, with J = 1); the diffusion is then stepped on the regular
    ``dt`` grid refined by the jump epochs, so the discretization error is
    confined to the Brownian part.  Normals come from Box-Muller pairs.
    """
    values = np.empty(n)
    states = np.empty(n, dtype=np.int64)
    for i in prange(n):
        k0 = _U64(seed)
        k1 = _U64(start + i)
        buf = np.empty(4, dtype=np.uint64)
        pos = np.zeros(2, dtype=np.int64)
        b0, b1, b2, b3 = _philox4(_U64(0), k0, k1)
        buf[0] = b0
        buf[1] = b1
        buf[2] = b2
        buf[3] = b3

        s = _pick(p0_cum, _next_u(buf, pos, k0, k1))
        x = m0_mean + m0_sd * _box_muller(buf, pos, k0, k1)
        cursor = 0.0
        while True:
            q = q_exit[s]
            if q > 0.0:
                hold = -math.log1p(-_next_u(buf, pos, k0, k1)) / q
            else:
                hold = _BIG
            target = cursor + hold
            if target > t:
                target = t
            # regular grid marks inside (cursor, target]
            kg = int(cursor / dt + 1e-12) + 1
            while cursor < target - 1e-15:
                mark = kg * dt
                step_end = mark if mark < target else target
                h = step_end - cursor
                if h > 0.0:
                    z = _box_muller(buf, pos, k0, k1)
                    x += (alp[s] - gam[s] * x) * h + sig[s] * math.sqrt(h) * z
                    cursor = step_end
                if step_end == mark:
                    kg += 1
            if cursor >= t - 1e-15:
                break
            s = _pick(jump_cum[s], _next_u(buf, pos, k0, k1))
        values[i] = x
        states[i] = s
    return values, states
