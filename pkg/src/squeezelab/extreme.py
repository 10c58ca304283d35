"""Extreme spin squeezing curves F_J(X) and entanglement-depth criteria.

F_J(X) is the smallest (Delta J_x)^2 / J reachable by a spin J at
normalized polarization X = <J_z>/J. Points on its convex lower envelope
are tangent points of supporting lines Var(J_x) + mu <J_z>. Writing
Var(J_x) = min_a <(J_x - a)^2> turns each supporting line into a ground
state problem for (J_x - a)^2 + mu J_z, which is tridiagonal in the J_x
eigenbasis. For integer J the optimal displacement is a = 0; for
half-integer J it is found numerically.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .spin_ops import _check_half_integer, displaced_ground_tridiagonal


@dataclass(frozen=True)
class FCurve:
    J: float
    samples: np.ndarray
    hull: np.ndarray
    mu_grid: np.ndarray = field(default=None)

    @property
    def X(self):
        return self.hull[:, 0]

    @property
    def F(self):
        return self.hull[:, 1]


@dataclass(frozen=True)
class DepthResult:
    slack: float
    applicable: bool = True

    @property
    def violated(self):
        return self.applicable and self.slack < 0


def _is_integer(J):
    return abs(J - round(J)) < 1e-12


def optimal_displacement(J, mu):
    """Displacement a minimizing the ground energy of (J_x - a)^2 + mu J_z.

    The energy is even in a and stationary where <J_x> = a. Besides
    a = 0 the relevant roots lie in (0, 1), next to the m_x = 1/2 level;
    for large J the energy is nearly periodic in a with a maximum at 1.
    """
    def g(s):
        return displaced_ground_tridiagonal(J, s, mu)[1] - s

    grid = [1e-7, 0.25, 0.5, 0.75, 1 - 1e-7]
    vals = [g(s) for s in grid]
    cands = [0.0]
    for (s0, v0), (s1, v1) in zip(zip(grid, vals), zip(grid[1:], vals[1:])):
        if v0 > 0 and v1 <= 0:
            cands.append(s1 if v1 == 0 else brentq(g, s0, s1, xtol=1e-14))
    return min(cands, key=lambda s: displaced_ground_tridiagonal(J, s, mu)[0])


def tangent_point(J, mu):
    """Tangent point (X, F) of the supporting line with slope parameter mu > 0."""
    J = _check_half_integer(J)
    if J == 0:
        return 0.0, 0.0
    mu = abs(mu)
    a = 0.0 if _is_integer(J) else optimal_displacement(J, mu)
    _, mx, mx2, mz = displaced_ground_tridiagonal(J, a, mu)
    return min(abs(mz) / J, 1.0), max(mx2 - mx * mx, 0.0) / J


def default_mu_grid(J, n=400):
    """Log-spaced multipliers; the lower end scales with 1/J so small X is covered."""
    lo = 1e-3 / (J + 1)
    return np.concatenate([[0.0], np.geomspace(lo, 8 * max(J, 0.5), n)])


def _refine(J, mus, pts, tol, max_points, dx=2e-3):
    """Insert geometric midpoints where the chord misses the curve by more
    than tol or where neighbouring samples are further apart than dx in X."""
    mus, pts = list(mus), list(pts)
    i = 0
    while i < len(mus) - 1 and len(mus) < max_points:
        m = np.sqrt(mus[i] * mus[i + 1])
        p = tangent_point(J, m)
        (x1, y1), (x2, y2) = pts[i], pts[i + 1]
        if x2 - x1 > 1e-14:
            gap = y1 + (p[0] - x1) * (y2 - y1) / (x2 - x1) - p[1]
        else:
            gap = 0.0
        if (gap > tol or x2 - x1 > dx) and mus[i + 1] / mus[i] > 1 + 1e-9:
            mus.insert(i + 1, m)
            pts.insert(i + 1, p)
        else:
            i += 1
    return np.array(mus), pts


def lower_hull(points):
    """Lower convex hull of 2-D points, sorted by x (monotone chain)."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    # keep the lowest point for each x
    pts = pts[np.r_[True, np.diff(pts[:, 0]) > 0]]
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return np.array(hull)


def f_curve(J, mu_grid=None, refine_tol=5e-7, max_points=4000):
    """Sample F_J at the tangent points of mu_grid and take the lower convex hull.

    Intervals of the grid whose chord deviates from the curve by more
    than refine_tol are subdivided; refine_tol=None disables this.
    """
    J = _check_half_integer(J)
    if J <= 0:
        raise ValueError("J must be positive")
    if J > 200:
        raise ValueError("f_curve is limited to J <= 200; use f_value for larger spins")
    mu = default_mu_grid(J) if mu_grid is None else np.abs(np.asarray(mu_grid, float))
    mu = np.unique(mu)
    pos = mu[mu > 0]
    if pos.size == 0:
        raise ValueError("mu grid must contain non-zero values")
    pts = [tangent_point(J, m) for m in pos]
    if max(p[0] for p in pts) < 0.99:
        raise ValueError("mu grid too narrow: largest polarization reached is %.4f"
                         % max(p[0] for p in pts))
    if refine_tol is not None:
        pos, pts = _refine(J, pos, pts, refine_tol, max_points)
    # F(0) = 0: the m_x = 0 (or 1/2) eigenstate has no J_x spread and no J_z mean
    samples = np.vstack([[0.0, 0.0], pts, [1.0, 0.5]])
    hull = lower_hull(samples)
    return FCurve(J, samples, hull, pos)


def f_eval(curve, X):
    X = np.asarray(X, dtype=float)
    if np.any(X < -1e-12) or np.any(X > 1 + 1e-12):
        raise ValueError("X must lie in [0, 1]")
    return np.interp(np.clip(X, 0, 1), curve.X, curve.F)


def f_inverse(curve, F):
    F = np.asarray(F, dtype=float)
    if np.any(F < -1e-12) or np.any(F > curve.F[-1] + 1e-12):
        raise ValueError("F must lie in [0, F(1)]")
    return np.interp(np.clip(F, 0, curve.F[-1]), curve.F, curve.X)


@lru_cache(maxsize=4096)
def _tangent_cached(J, mu):
    return tangent_point(J, mu)


def f_value(J, X, tol=1e-10):
    """F_J(X) without building a full curve, by bracketing the tangent point.

    Bisects log(mu) until the tangent points on both sides of X are
    close, then interpolates linearly between them. Suitable for large J.
    """
    J = _check_half_integer(J)
    if not 0 <= X <= 1:
        raise ValueError("X must lie in [0, 1]")
    if X == 0 or J == 0:
        return 0.0
    if X == 1:
        return 0.5
    lo_mu, hi_mu = 1e-8 / (J + 1), 8.0 * max(J, 0.5)
    lo, hi = (0.0, 0.0), (1.0, 0.5)
    p = _tangent_cached(J, lo_mu)
    if p[0] <= X:
        lo = p
    else:
        hi_mu = lo_mu
        lo_mu = None
    q = _tangent_cached(J, hi_mu)
    if q[0] >= X:
        hi = q
    if lo_mu is not None and q[0] > X:
        a, b = np.log(lo_mu), np.log(hi_mu)
        for _ in range(200):
            mid = 0.5 * (a + b)
            r = _tangent_cached(J, float(np.exp(mid)))
            if r[0] <= X:
                lo, a = r, mid
            else:
                hi, b = r, mid
            if hi[0] - lo[0] < tol or b - a < 1e-13:
                break
    if hi[0] - lo[0] <= 0:
        return lo[1]
    t = (X - lo[0]) / (hi[0] - lo[0])
    return lo[1] + t * (hi[1] - lo[1])


def f_inverse_value(J, F, tol=1e-10):
    """Inverse of f_value by bisection in X."""
    if not 0 <= F <= 0.5:
        raise ValueError("F must lie in [0, 1/2]")
    if F == 0:
        return 0.0
    a, b = 0.0, 1.0
    while b - a > tol:
        m = 0.5 * (a + b)
        if f_value(J, m) < F:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def analytic_f(J, X):
    """Closed forms for J = 1/2 and J = 1."""
    X = np.asarray(X, dtype=float)
    if J == 0.5:
        return X * X / 2
    if J == 1:
        return (1 - np.sqrt(1 - X * X)) / 2
    raise ValueError("closed forms exist only for J = 1/2 and J = 1")


def _F(kj, X, curve=None):
    if curve is not None:
        if abs(curve.J - kj) > 1e-12:
            raise ValueError("curve spin does not match k j")
        return float(f_eval(curve, X))
    return f_value(kj, X)


def sm_depth_check(var_x, mean_z, N, j, k, curve=None):
    """var_x - N j F_{kj}(<J_z>/(N j)); negative means depth > k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    nj = N * j
    if abs(mean_z) > nj * (1 + 1e-12):
        raise ValueError("|<J_z>| exceeds N j")
    X = min(abs(mean_z) / nj, 1.0)
    return float(var_x - nj * _F(k * j, X, curve))


def improved_depth_check(var_x, sum_perp_sq, N, k, j=0.5, curve=None):
    """Depth criterion adapted to unpolarized Dicke states.

    var_x - N j F_{kj}(sqrt(<J_y^2 + J_z^2> - N j (k j + 1)) / (N j)).
    For j = 1/2 this is the qubit form. For other j each particle is
    viewed as 2j qubits, which maps N -> 2jN and k -> 2jk.
    Returns a DepthResult; when the square-root argument is negative
    the criterion does not apply.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    nj = N * j
    r = sum_perp_sq - nj * (k * j + 1)
    if r < 0:
        return DepthResult(float("nan"), False)
    X = min(np.sqrt(r) / nj, 1.0)
    return DepthResult(float(var_x - nj * _F(k * j, X, curve)))


def duan_check(var_x, sum_perp_sq, N, k):
    """Linear k-producibility condition for qubits."""
    if k < 1:
        raise ValueError("k must be >= 1")
    v = N * (k + 2) * np.asarray(var_x, float) - sum_perp_sq + N / 4 * (k + 2)
    return float(v) if np.ndim(v) == 0 else v


def duan_slope(N, k):
    """d<J_y^2+J_z^2>/d var_x along the Duan boundary."""
    return N * (k + 2)


def improved_tangent_slope(N, k, j=0.5, x_probe=1e-3):
    """Slope of the improved boundary at var_x = 0.

    The boundary is S(v) = N j (k j + 1) + (N j)^2 [F^{-1}(v / (N j))]^2;
    near v = 0, F(X) ~ c X^2 and the slope is N j / c.
    """
    J = k * j
    c = f_value(J, x_probe) / x_probe ** 2
    return N * j / c


def depth_infer(var_x, N, k_max=None, criterion="improved", sum_perp_sq=None, mean_z=None, j=0.5):
    """Smallest k whose k-producibility bound holds (or does not apply).

    The state is then certified to have depth at least k. All three
    criteria are monotone in k, so the search bisects.
    """
    k_max = int(N if k_max is None else k_max)

    def holds(k):
        if criterion == "improved":
            r = improved_depth_check(var_x, sum_perp_sq, N, k, j)
            return (not r.applicable) or r.slack >= -1e-9 * max(1.0, N * j)
        if criterion == "sm":
            return sm_depth_check(var_x, mean_z, N, j, k) >= -1e-9 * max(1.0, N * j)
        if criterion == "duan":
            return duan_check(var_x, sum_perp_sq, N, k) >= -1e-9 * N * N
        raise ValueError(f"unknown criterion {criterion!r}")

    if holds(1):
        return 1
    if not holds(k_max):
        return k_max
    lo, hi = 1, k_max
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if holds(mid):
            hi = mid
        else:
            lo = mid
    return hi


def sm_fluct(mean_N, var_x, mean_z, k, j, curve=None):
    """var_x - <N> j F_{kj}(<J_z>/(<N> j)) for a mixture of particle numbers."""
    return sm_depth_check(var_x, mean_z, mean_N, j, k, curve)


def improved_fluct(weights, Ns, var_x_N, sum_perp_sq, k):
    """Improved depth criterion for a fluctuating number of qubits.

    weights, Ns and var_x_N describe the components; sum_perp_sq is the
    mixture value of <J_y^2 + J_z^2>. The argument of F^{-1} uses the
    per-particle variance var_x_N / N, so for a single N it is 2 var_x / N
    as in the fixed-N criterion. Inapplicable when that argument exceeds 1/2.
    """
    w = np.asarray(weights, float)
    Ns = np.asarray(Ns, float)
    v = np.asarray(var_x_N, float)
    if np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
        raise ValueError("weights must be non-negative and sum to 1")
    nn = float(w @ (Ns * (Ns - 1)))
    if nn <= 0:
        return DepthResult(float("nan"), False)
    arg = 2 * float(w @ ((Ns - 1) * v)) / nn
    if arg > 0.5:
        return DepthResult(float("nan"), False)
    x = f_inverse_value(k / 2, arg)
    bound = float(w @ Ns) * (k + 2) / 4 + nn / 4 * x * x
    return DepthResult(bound - sum_perp_sq)
