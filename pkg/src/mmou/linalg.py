"""Dense numerical kernels shared by the analytic engines.

Small, square, well-conditioned systems only (state counts of a handful):
a scaling-and-squaring matrix exponential with a Taylor core, an LU solve
with an explicit near-singularity guard, an adaptive Gauss-Legendre
quadrature, and a fixed-step RK4 integrator that serves purely as an
internal cross-check for the exponential-based formulas.
"""

from __future__ import annotations

import warnings
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import AccuracyError, DimensionError, SingularMatrixError

__all__ = ["expm", "solve", "quad", "rk4_linear", "rk4"]


def _require_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionError(f"{name} has non-finite entries")
    return a


def expm(a: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(a*t) by scaling-and-squaring with a Taylor core.

    The argument is scaled so its 1-norm is at most 0.5, the exponential of
    the scaled matrix is summed to machine precision (the series terms decay
    at least geometrically with ratio 1/2), and the result is squared back.
    Relative accuracy is ~1e-14 for the modest-norm generator-type matrices
    used here.
    """
    a = _require_square(a)
    if not np.isfinite(t):
        raise DimensionError("t must be finite")
    d = a.shape[0]
    b = a * t
    norm = np.linalg.norm(b, 1)
    if norm == 0.0:
        return np.eye(d)
    n_squarings = max(0, int(np.ceil(np.log2(norm / 0.5))))
    c = b / (2.0**n_squarings)
    # Taylor sum: term_k <= 0.5^k / k!, so 25 terms reach below eps.
    result = np.eye(d) + c
    term = c
    for k in range(2, 26):
        term = term @ c / k
        result += term
        if np.linalg.norm(term, 1) < 1e-18 * np.linalg.norm(result, 1):
            break
    for _ in range(n_squarings):
        result = result @ result
    return result


def solve(a: np.ndarray, b: np.ndarray, label: str = "linear system") -> np.ndarray:
    """Solve a @ x = b by LU with partial pivoting.

    Raises :class:`SingularMatrixError` naming ``label`` when the smallest
    pivot falls below ``1e-13 * max|a|``.  One step of iterative refinement
    keeps the residual below ``1e-10 * ||b||``.
    """
    a = _require_square(a)
    b = np.asarray(b, dtype=float)
    scale = np.abs(a).max()
    if scale == 0.0:
        raise SingularMatrixError(f"{label}: zero matrix")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < 1e-13 * scale:
        raise SingularMatrixError(
            f"{label}: matrix is singular or near-singular "
            f"(pivot {pivots.min():.3e} vs scale {scale:.3e})"
        )
    x = scipy.linalg.lu_solve((lu, piv), b, check_finite=False)
    # one refinement pass; cheap insurance for the residual contract
    r = b - a @ x
    x = x + scipy.linalg.lu_solve((lu, piv), r, check_finite=False)
    return x


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _gl16(f: Callable[[float], float], lo: float, hi: float) -> float:
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    return half * sum(w * f(mid + half * x) for x, w in zip(_GL_NODES, _GL_WEIGHTS))


def quad(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-10,
    max_depth: int = 48,
) -> float:
    """Adaptive Gauss-Legendre integral of ``f`` over ``[lo, hi]``.

    Panels use a 16-point rule (exact through polynomial degree 31); the
    error estimate on a panel is the difference against its two-half
    refinement, and panels are bisected until the estimate is below the
    locally apportioned tolerance.  Raises :class:`AccuracyError` carrying
    the best estimate when the depth limit is hit.
    """
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise DimensionError(f"invalid interval [{lo}, {hi}]")
    if lo == hi:
        return 0.0

    failed: list[bool] = []

    def recurse(a: float, b: float, whole: float, tol_ab: float, depth: int) -> float:
        mid = 0.5 * (a + b)
        left = _gl16(f, a, mid)
        right = _gl16(f, mid, b)
        err = abs(left + right - whole)
        if err <= tol_ab or err <= 1e-16 * (abs(left) + abs(right)):
            return left + right
        if depth >= max_depth:
            failed.append(True)
            return left + right
        return recurse(a, mid, left, 0.5 * tol_ab, depth + 1) + recurse(
            mid, b, right, 0.5 * tol_ab, depth + 1
        )

    best = recurse(lo, hi, _gl16(f, lo, hi), tol, 0)
    if failed:
        raise AccuracyError(
            f"quadrature did not converge to tol={tol:g} on [{lo}, {hi}]",
            best_estimate=best,
        )
    return best


def rk4(f: Callable[[float, np.ndarray], np.ndarray], y0: np.ndarray, t0: float, t1: float, n_steps: int) -> np.ndarray:
    """Classical fixed-step RK4 from ``t0`` to ``t1``.  Oracle use only."""
    y = np.asarray(y0, dtype=float).copy()
    h = (t1 - t0) / n_steps
    t = t0
    for _ in range(n_steps):
        k1 = f(t, y)
        k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = f(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    return y


def rk4_linear(m: np.ndarray, y0: np.ndarray, t: float, n_steps: int | None = None) -> np.ndarray:
    """RK4 solution of ``y' = m y`` at time ``t``.

    The default step follows the internal-oracle policy: at least 1000
    steps, and at least 100 per unit of ``||m|| * t``.
    """
    m = _require_square(m)
    if n_steps is None:
        n_steps = max(1000, int(np.ceil(100.0 * np.linalg.norm(m, 1) * abs(t))))
    return rk4(lambda _s, y: m @ y, y0, 0.0, t, n_steps)
