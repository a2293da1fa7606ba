"""Refinement of the selected reference into a Cartesian trajectory: a small
nonlinear program penalizing spatial deviation, acceleration, jerk and snap
subject to an absolute-acceleration constraint.

The cost is an exact quadratic form, so the unconstrained minimizer comes
from a linear solve; when acceleration constraints activate, the (convex)
problem is handed to an SQP solver with analytic gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import SOutOfRange, TooShort
from .geometry import Route, arc_to_cartesian
from .idm import LongTrajectory

N_OPT = 60
N_FIXED = 4  # leading positions pinned by the finite-difference stencils


@dataclass(frozen=True)
class OptimizerWeights:
    w_spatial: float = 1.0
    w_acc: float = 0.1
    w_jerk: float = 0.1
    w_snap: float = 0.1
    a_max: float = 5.0

    def __post_init__(self):
        if min(self.w_spatial, self.w_acc, self.w_jerk, self.w_snap) < 0:
            raise ValueError("weights must be >= 0")
        if self.a_max <= 0:
            raise ValueError("a_max must be positive")


@dataclass
class CartesianTrajectory:
    positions: np.ndarray  # (N, 2)
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")

    def __len__(self):
        return len(self.positions)

    def velocities(self) -> np.ndarray:
        """Central-difference velocity vectors (endpoints one-sided)."""
        v = np.gradient(self.positions, self.dt, axis=0)
        return v

    def accelerations(self) -> np.ndarray:
        """Central-stencil accelerations a_n for n = 1..N-2, shape (N-2, 2)."""
        x = self.positions
        return (x[2:] - 2.0 * x[1:-1] + x[:-2]) / self.dt**2


@dataclass
class NlpResult:
    trajectory: CartesianTrajectory
    converged: bool
    iterations: int
    cost: float
    max_violation: float  # of ||a||^2 - a_max^2, m^2/s^4


def reference_to_cartesian(reference: LongTrajectory, route: Route,
                           n_opt: int = N_OPT) -> CartesianTrajectory:
    """Map the first n_opt longitudinal samples onto the centerline."""
    if len(reference) < n_opt:
        raise TooShort(f"reference has {len(reference)} samples, need {n_opt}")
    pts = np.array([arc_to_cartesian(s, 0.0, route, extrapolate=True)
                    for s in reference.s[:n_opt]])
    return CartesianTrajectory(pts, dt=reference.dt, t0=reference.t0)


@lru_cache(maxsize=16)
def _cost_matrices(n: int, dt: float, w_spatial: float, w_acc: float,
                   w_jerk: float, w_snap: float):
    """Q such that J = sum_dim x_d^T Q x_d - 2 b_d^T x_d + const, with
    b_d = w_spatial * S * ref_d.

    Stencils: acc (1,-2,1)/dt^2 at n=4..N-2; jerk (-1,2,0,-2,1)/(2 dt^3)
    and snap (1,-4,6,-4,1)/dt^4 at n=4..N-3 (both need x_{n+2}).
    """
    if n < 8:
        raise TooShort("need at least 8 samples")
    S = np.zeros((n, n))
    for i in range(N_FIXED, n):
        S[i, i] = 1.0
    D_acc = np.zeros((n - 1 - N_FIXED, n))
    for r, i in enumerate(range(N_FIXED, n - 1)):
        D_acc[r, i - 1:i + 2] = np.array([1.0, -2.0, 1.0]) / dt**2
    rows_hi = list(range(N_FIXED, n - 2))
    D_jerk = np.zeros((len(rows_hi), n))
    D_snap = np.zeros((len(rows_hi), n))
    for r, i in enumerate(rows_hi):
        D_jerk[r, i - 2:i + 3] = np.array([-1.0, 2.0, 0.0, -2.0, 1.0]) / (2.0 * dt**3)
        D_snap[r, i - 2:i + 3] = np.array([1.0, -4.0, 6.0, -4.0, 1.0]) / dt**4
    Q = (w_spatial * S + w_acc * D_acc.T @ D_acc
         + w_jerk * D_jerk.T @ D_jerk + w_snap * D_snap.T @ D_snap)
    return Q, S


def assemble_cost(positions: np.ndarray, reference: np.ndarray,
                  weights: OptimizerWeights, dt: float):
    """Cost and analytic gradient (w.r.t. every position, fixed ones
    included; the solver masks the first four)."""
    x = np.asarray(positions, dtype=float)
    ref = np.asarray(reference, dtype=float)
    n = len(x)
    if n < 8:
        raise TooShort("need at least 8 samples")
    Q, S = _cost_matrices(n, dt, weights.w_spatial, weights.w_acc,
                          weights.w_jerk, weights.w_snap)
    cost = 0.0
    grad = np.empty_like(x)
    for dim in range(2):
        xd = x[:, dim]
        rd = ref[:, dim]
        b = weights.w_spatial * (S @ rd)
        cost += float(xd @ (Q @ xd) - 2.0 * b @ xd
                      + weights.w_spatial * rd @ (S @ rd))
        grad[:, dim] = 2.0 * (Q @ xd - b)
    return cost, grad


def _accel_rows(x: np.ndarray, dt: float) -> np.ndarray:
    """a_n for n = 4..N-2, shape (N-5, 2)."""
    return (x[5:] - 2.0 * x[4:-1] + x[3:-2]) / dt**2


def solve(reference: CartesianTrajectory, prefix: np.ndarray,
          weights: OptimizerWeights = OptimizerWeights(),
          max_iter: int = 100) -> NlpResult:
    """Minimize the comfort cost over the free positions subject to
    ||a_n|| <= a_max, keeping the four-point prefix bitwise fixed.

    The unconstrained quadratic optimum is computed first; SQP (SLSQP) runs
    only when it violates the acceleration constraint.
    """
    ref = np.array(reference.positions, dtype=float)
    prefix = np.asarray(prefix, dtype=float)
    if prefix.shape != (N_FIXED, 2):
        raise ValueError("prefix must be 4 positions")
    n = len(ref)
    dt = reference.dt
    Q, S = _cost_matrices(n, dt, weights.w_spatial, weights.w_acc,
                          weights.w_jerk, weights.w_snap)
    free = slice(N_FIXED, n)
    Qff = Q[free, free]
    Qfc = Q[free, :N_FIXED]

    x = ref.copy()
    x[:N_FIXED] = prefix
    # exact unconstrained minimizer per coordinate
    for dim in range(2):
        b = weights.w_spatial * (S @ ref[:, dim])
        rhs = b[free] - Qfc @ prefix[:, dim]
        x[N_FIXED:, dim] = np.linalg.solve(Qff, rhs)

    a2max = weights.a_max**2
    viol = _max_violation(x, dt, a2max)
    if viol <= 1e-9:
        cost, _ = assemble_cost(x, ref, weights, dt)
        return NlpResult(CartesianTrajectory(x, dt=dt, t0=reference.t0),
                         converged=True, iterations=1, cost=cost,
                         max_violation=max(viol, 0.0))

    # Emergency braking: car following decelerates up to HARD_DECEL to keep
    # the gap, deliberately above the comfort limit. Forcing ||a|| <= a_max
    # would stretch the braking distance and override safety, so such
    # references get the unconstrained smoothing only. Lateral (cornering)
    # demand is untouched by this guard and still goes through the SQP.
    x_ref = ref.copy()
    x_ref[:N_FIXED] = prefix
    v_mid = (x_ref[2:] - x_ref[:-2]) / (2.0 * dt)
    a_mid = (x_ref[2:] - 2.0 * x_ref[1:-1] + x_ref[:-2]) / dt**2
    speed = np.maximum(np.hypot(v_mid[:, 0], v_mid[:, 1]), 1e-9)
    tangential = (a_mid * v_mid).sum(axis=1) / speed
    if float(tangential.min()) < -(weights.a_max + 0.25):
        cost, _ = assemble_cost(x, ref, weights, dt)
        return NlpResult(CartesianTrajectory(x, dt=dt, t0=reference.t0),
                         converged=False, iterations=1, cost=cost,
                         max_violation=max(viol, 0.0))

    def fun(z):
        xx = _full(z)
        c, g = assemble_cost(xx, ref, weights, dt)
        return c, g[N_FIXED:].ravel()

    def cons_f(z):
        xx = _full(z)
        a = _accel_rows(xx, dt)
        return a2max - (a**2).sum(axis=1)

    def cons_jac(z):
        xx = _full(z)
        a = _accel_rows(xx, dt)
        m = len(a)
        jac = np.zeros((m, n, 2))
        coef = 1.0 / dt**2
        for r in range(m):
            i = r + N_FIXED  # constraint at a_i, touches x_{i-1}, x_i, x_{i+1}
            jac[r, i - 1] += -2.0 * a[r] * coef
            jac[r, i] += 4.0 * a[r] * coef
            jac[r, i + 1] += -2.0 * a[r] * coef
        return jac[:, N_FIXED:, :].reshape(m, -1)

    def _full(z):
        xx = np.empty((n, 2))
        xx[:N_FIXED] = prefix
        xx[N_FIXED:] = z.reshape(-1, 2)
        return xx

    # start from the reference (a feasible-ish, meaningful initial guess)
    z0 = x[N_FIXED:].ravel()
    res = optimize.minimize(
        fun, z0, jac=True, method="SLSQP",
        constraints=[{"type": "ineq", "fun": cons_f, "jac": cons_jac}],
        options={"maxiter": max_iter, "ftol": 1e-9})
    x_out = _full(res.x)
    cost_out, _ = assemble_cost(x_out, ref, weights, dt)

    # never return something worse than the plain reference
    cost_ref, _ = assemble_cost(x_ref, ref, weights, dt)
    if (not np.all(np.isfinite(x_out))) or cost_out > cost_ref + 1e-9:
        viol_ref = _max_violation(x_ref, dt, a2max)
        return NlpResult(CartesianTrajectory(x_ref, dt=dt, t0=reference.t0),
                         converged=False, iterations=int(res.nit),
                         cost=cost_ref, max_violation=max(viol_ref, 0.0))
    viol_out = _max_violation(x_out, dt, a2max)
    converged = bool(res.success) and viol_out <= 1e-6
    return NlpResult(CartesianTrajectory(x_out, dt=dt, t0=reference.t0),
                     converged=converged, iterations=int(res.nit),
                     cost=cost_out, max_violation=max(viol_out, 0.0))


def _max_violation(x: np.ndarray, dt: float, a2max: float) -> float:
    a = _accel_rows(x, dt)
    return float(((a**2).sum(axis=1) - a2max).max())
