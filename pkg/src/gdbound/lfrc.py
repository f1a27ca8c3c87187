"""Empirical local Rademacher complexity of norm-bounded linear classes
under a variance constraint, plus sub-root function utilities.

The per-task building block is the supremum of a linear functional over
the intersection of the Euclidean ball ||theta|| <= M and the ellipsoid
theta' S theta <= r (S an empirical second-moment matrix).  The localized
complexity estimate averages that supremum over independent Rademacher
sign draws; localization radii are then pinned down by the fixed point of
a sub-root function, found by bracketing and bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, InvariantError, StructuralError

_EIG_CLIP = 1e-12


@dataclass(frozen=True)
class LinearClassSpec:
    """Constraint set per task: ||theta_k||_2 <= m_tilde and
    theta_k' S_k theta_k <= r (empirical second moment, uncentered)."""

    m_tilde: float
    second_moments: tuple[np.ndarray, ...]
    r: float = math.inf

    def __post_init__(self):
        if self.m_tilde <= 0:
            raise DomainError("m_tilde must be > 0")
        if self.r <= 0:
            raise DomainError("variance radius r must be > 0 (use math.inf to disable)")
        for S in self.second_moments:
            if S.ndim != 2 or S.shape[0] != S.shape[1]:
                raise InvariantError("second-moment matrices must be square")
            if not np.allclose(S, S.T, atol=1e-10):
                raise InvariantError("second-moment matrix not symmetric")


def _sup_one(c, S, m_tilde, r):
    """max c.theta subject to ||theta|| <= m_tilde and theta' S theta <= r.

    Solved on the KKT path theta(a) ~ (I + a S)^{-1} c: a = 0 when the
    norm ball alone binds, the pure-ellipsoid solution when the ball is
    slack, otherwise the a > 0 making both constraints active (root of a
    monotone scalar equation in the eigenbasis of S).
    """
    c = np.asarray(c, dtype=float)
    norm_c = float(np.linalg.norm(c))
    if norm_c == 0.0:
        return 0.0
    if not math.isfinite(r):
        return m_tilde * norm_c

    lam, Q = np.linalg.eigh(np.asarray(S, dtype=float))
    if lam[0] < -1e-8 * max(1.0, abs(lam[-1])):
        raise InvariantError(f"second-moment matrix has eigenvalue {lam[0]} < 0")
    lam = np.clip(lam, 0.0, None)
    ct = Q.T @ c

    def quad_on_ball(a):
        # theta(a) scaled onto the ball boundary; returns theta' S theta
        u = ct / (1.0 + a * lam)
        nsq = float(u @ u)
        return m_tilde**2 * float(lam @ (u * u)) / nsq

    if quad_on_ball(0.0) <= r:
        return m_tilde * norm_c

    active = lam > _EIG_CLIP
    if np.all(active | (np.abs(ct) <= _EIG_CLIP * norm_c)):
        # c lives in range(S): pure ellipsoid candidate theta ~ S^+ c
        s1 = float(np.sum(ct[active] ** 2 / lam[active]))
        s2 = float(np.sum(ct[active] ** 2 / lam[active] ** 2))
        if r * s2 / s1 <= m_tilde**2:
            return math.sqrt(r * s1)

    a_hi = 1.0
    while quad_on_ball(a_hi) > r:
        a_hi *= 4.0
        if a_hi > 1e18:
            raise RuntimeError("failed to bracket the active-constraint multiplier")
    a = brentq(lambda x: quad_on_ball(x) - r, 0.0, a_hi, xtol=1e-15, rtol=1e-14)
    u = ct / (1.0 + a * lam)
    theta = m_tilde * u / np.linalg.norm(u)
    return float(ct @ theta)


def sup_linear(c_list, spec: LinearClassSpec) -> float:
    """Sum over tasks of max{c_k.theta : ||theta|| <= m_tilde, theta'S_k theta <= r}."""
    if len(c_list) != len(spec.second_moments):
        raise StructuralError("one aggregate vector per task is required")
    return sum(
        _sup_one(c, S, spec.m_tilde, spec.r)
        for c, S in zip(c_list, spec.second_moments)
    )


def second_moment_matrix(features) -> np.ndarray:
    """Empirical second moment (1/m) sum_i x_i x_i' of one task's sample."""
    X = np.asarray(features, dtype=float)
    return X.T @ X / X.shape[0]


def estimate_lfrc(features_per_task, covers, spec: LinearClassSpec,
                  n_draws: int, seed: int):
    """Monte Carlo estimate of the empirical localized complexity.

    Each draw assigns one Rademacher sign per sample.  Because every
    vertex's cover weights sum to 1, the cover-weighted aggregate for task
    k collapses to c_k = (1/m_k) sum_i zeta_i x_i; the estimate is the
    average over draws of sup_linear(c, spec) / K, with its standard error.
    """
    if n_draws < 1:
        raise DomainError("n_draws must be >= 1")
    K = len(features_per_task)
    if len(covers) != K or len(spec.second_moments) != K:
        raise StructuralError("features, covers and second moments must align per task")
    mats = []
    for X, cover in zip(features_per_task, covers):
        X = np.asarray(X, dtype=float)
        if cover is not None and cover.graph.n_vertices != X.shape[0]:
            raise StructuralError(
                f"cover graph has {cover.graph.n_vertices} vertices, task has "
                f"{X.shape[0]} samples"
            )
        mats.append(X)
    rng = np.random.default_rng(seed)
    vals = np.empty(n_draws)
    for d in range(n_draws):
        total = 0.0
        for k, X in enumerate(mats):
            zeta = rng.integers(0, 2, size=X.shape[0]) * 2.0 - 1.0
            c = zeta @ X / X.shape[0]
            total += _sup_one(c, spec.second_moments[k], spec.m_tilde, spec.r)
        vals[d] = total / K
    est = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(n_draws)) if n_draws > 1 else 0.0
    return est, stderr


@dataclass
class SubRootHandle:
    """An evaluable candidate sub-root function with a search ceiling.

    Sub-root means nonnegative, nondecreasing, with r -> f(r)/sqrt(r)
    nonincreasing; such a function has a unique positive fixed point.
    The properties are checked on a log-spaced grid, not assumed.
    """

    fn: Callable[[float], float]
    r_hi: float = 1e6
    grid_points: int = 64
    _grid_checked: bool = field(default=False, repr=False, init=False)

    def __call__(self, r):
        return self.fn(r)

    def grid_check(self):
        """Verify sub-root properties on a grid; DomainError on failure."""
        grid = np.geomspace(self.r_hi * 1e-12, self.r_hi, self.grid_points)
        vals = np.array([self.fn(r) for r in grid])
        if (vals < -1e-12).any():
            raise DomainError("function is negative on the grid; not sub-root")
        diffs = np.diff(vals)
        if (diffs < -1e-9 * np.maximum(1.0, np.abs(vals[:-1]))).any():
            raise DomainError("function is decreasing on the grid; not sub-root")
        ratio = vals / np.sqrt(grid)
        rdiffs = np.diff(ratio)
        if (rdiffs > 1e-9 * np.maximum(1.0, ratio[:-1])).any():
            raise DomainError("f(r)/sqrt(r) increases on the grid; not sub-root")
        if vals.max() <= 0.0:
            raise DomainError("function is identically zero on the grid")
        self._grid_checked = True


def fixed_point(handle: SubRootHandle, tol: float = 1e-10) -> float:
    """Unique positive solution of f(r) = r for a sub-root f.

    Since f(r) >= r exactly for r <= r*, the sign of f(r) - r brackets the
    fixed point: expand upward from r_hi while f(r) >= r, shrink downward
    to find the lower bracket, then bisect until
    |f(r) - r| <= tol * max(1, r).
    """
    if not handle._grid_checked:
        handle.grid_check()

    def gap(r):
        return handle.fn(r) - r

    hi = handle.r_hi
    while gap(hi) >= 0.0:
        hi *= 2.0
        if hi > 1e300:
            raise InvariantError("no fixed point below 1e300; f does not cross r")
    lo = min(handle.r_hi, hi / 2.0)
    while gap(lo) < 0.0:
        lo /= 2.0
        if lo < 1e-300:
            raise InvariantError("no sign change above 1e-300; f may be trivial")
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        g = gap(mid)
        if abs(g) <= tol * max(1.0, mid) and hi - lo <= tol * max(1.0, mid):
            return mid
        if g >= 0.0:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    if abs(gap(r)) > tol * max(1.0, r):
        raise RuntimeError("bisection failed to reach tolerance")
    return r
