"""Intelligent Driver Model: acceleration law, curvature-adapted target
speed profiles and forward integration into longitudinal trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import HorizonMismatch, NonPositiveGap
from .geometry import Route

HARD_DECEL = 8.0           # m/s^2, clamp on collapsing gaps
VEHICLE_LENGTH = 5.0       # m, front-to-rear gap correction
PROFILE_STEP = 0.5         # m, speed-profile sampling
DEFAULT_A_LAT_MAX = 2.0    # m/s^2, lateral comfort limit in curves
_KAPPA_EPS = 1e-6
_GAP_EPS = 1e-2


@dataclass(frozen=True)
class IdmParams:
    a_idm: float = 2.0     # max acceleration
    b: float = 4.0         # comfortable deceleration
    s0: float = 4.0        # standstill distance
    T: float = 2.5         # time gap
    delta: float = 4.0     # acceleration exponent

    def __post_init__(self):
        for name in ("a_idm", "b", "s0", "T", "delta"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"IdmParams.{name} must be positive")


@dataclass(frozen=True)
class LongState:
    s: float
    v: float


class LongTrajectory:
    """Uniformly time-sampled longitudinal states [s, v]."""

    def __init__(self, s, v, dt: float, t0: float = 0.0):
        self.s = np.asarray(s, dtype=float)
        self.v = np.asarray(v, dtype=float)
        if len(self.s) < 2 or len(self.s) != len(self.v):
            raise ValueError("need >= 2 matching (s, v) samples")
        self.dt = float(dt)
        self.t0 = float(t0)
        self.s.setflags(write=False)
        self.v.setflags(write=False)

    def __len__(self) -> int:
        return len(self.s)

    @property
    def duration(self) -> float:
        return (len(self.s) - 1) * self.dt

    def state_at(self, idx: int) -> LongState:
        return LongState(float(self.s[idx]), float(self.v[idx]))

    def accelerations(self) -> np.ndarray:
        """Forward-difference accelerations, length N-1."""
        return np.diff(self.v) / self.dt

    def first_index_reaching(self, s_target: float) -> Optional[int]:
        idx = np.searchsorted(self.s, s_target, side="left")
        return int(idx) if idx < len(self.s) else None


@dataclass(frozen=True)
class SpeedProfile:
    """Target speed over arc length on a uniform grid."""

    s0_grid: float
    ds: float
    v: np.ndarray = field(repr=False)

    def v_at(self, s: float) -> float:
        x = (s - self.s0_grid) / self.ds
        if x <= 0.0:
            return float(self.v[0])
        n = len(self.v) - 1
        if x >= n:
            return float(self.v[-1])
        i = int(x)
        f = x - i
        return float(self.v[i] * (1.0 - f) + self.v[i + 1] * f)


def idm_acceleration(v: float, v0: float, gap: Optional[float] = None,
                     dv: Optional[float] = None,
                     params: IdmParams = IdmParams()) -> float:
    """IDM acceleration; free road when no leader gap is given.

    Result is clamped to [-HARD_DECEL, a_idm].
    """
    free = params.a_idm * (1.0 - (v / v0) ** params.delta)
    if gap is None:
        a = free
    else:
        if gap <= 0.0:
            raise NonPositiveGap(f"gap={gap}")
        dv = 0.0 if dv is None else dv
        s_star = params.s0 + v * params.T + v * dv / (2.0 * math.sqrt(params.a_idm * params.b))
        a = free - params.a_idm * (s_star / gap) ** 2
    return min(max(a, -HARD_DECEL), params.a_idm)


def target_speed_profile(route: Route, v_limit: float,
                         a_lat_max: float = DEFAULT_A_LAT_MAX,
                         decel: float = 4.0) -> SpeedProfile:
    """Curvature-limited speed profile with a backward smoothing pass.

    The backward pass caps deceleration at `decel` so braking for curves
    starts early enough.
    """
    if a_lat_max <= 0.0:
        raise ValueError("a_lat_max must be positive")
    n = max(int(math.ceil(route.length / PROFILE_STEP)) + 1, 2)
    s = np.linspace(0.0, route.length, n)
    ds = s[1] - s[0]
    kappa = np.abs([route.centerline.curvature_at(si) for si in s])
    v = np.minimum(v_limit, np.sqrt(a_lat_max / np.maximum(kappa, _KAPPA_EPS)))
    for i in range(n - 2, -1, -1):
        v[i] = min(v[i], math.sqrt(v[i + 1] ** 2 + 2.0 * decel * ds))
    return SpeedProfile(s0_grid=0.0, ds=float(ds), v=v)


@lru_cache(maxsize=256)
def route_profile(route: Route, v_limit: Optional[float] = None,
                  a_lat_max: float = DEFAULT_A_LAT_MAX) -> SpeedProfile:
    """Memoized speed profile; defaults to the route's speed limit."""
    if v_limit is None:
        v_limit = route.speed_limit
    return target_speed_profile(route, v_limit, a_lat_max)


def _rollout_kernel(s_out, v_out, n, dt, s_init, v_init,
                    prof_s0, prof_inv_ds, prof_v,
                    leader_s, leader_v, has_leader,
                    stop_at, has_stop,
                    a_idm, b, s0_p, T, delta, two_sqrt_ab,
                    vehicle_length, gap_eps, hard_decel):
    """Explicit-Euler IDM integration; numba-compiled when available."""
    s = s_init
    v = v_init
    prof_n = len(prof_v) - 1
    for i in range(n):
        s_out[i] = s
        v_out[i] = v
        if i == n - 1:
            break
        # target speed lookup (uniform-grid linear interpolation)
        x = (s - prof_s0) * prof_inv_ds
        if x <= 0.0:
            v0 = prof_v[0]
        elif x >= prof_n:
            v0 = prof_v[prof_n]
        else:
            j = int(x)
            f = x - j
            v0 = prof_v[j] * (1.0 - f) + prof_v[j + 1] * f
        # binding gap: min over real leader and standing stop target
        gap = -1.0
        dv = 0.0
        if has_leader:
            g = leader_s[i] - s - vehicle_length
            gap = g if g > gap_eps else gap_eps
            dv = v - leader_v[i]
        if has_stop:
            g_stop = stop_at - s
            if g_stop <= gap_eps:
                g_stop = gap_eps
            if gap < 0.0 or g_stop < gap:
                gap = g_stop
                dv = v
        if gap < 0.0:
            a = a_idm * (1.0 - (v / v0) ** delta)
        else:
            s_star = s0_p + v * T + v * dv / two_sqrt_ab
            a = a_idm * (1.0 - (v / v0) ** delta - (s_star / gap) ** 2)
        if a > a_idm:
            a = a_idm
        elif a < -hard_decel:
            a = -hard_decel
        s = s + v * dt
        v = v + a * dt
        if v < 0.0:
            v = 0.0


try:  # pragma: no cover - exercised implicitly everywhere
    from numba import njit

    _rollout_kernel = njit(cache=True)(_rollout_kernel)
except ImportError:  # pragma: no cover
    pass

_EMPTY = np.empty(0)


def rollout(start: LongState, profile: SpeedProfile,
            leader: Optional[LongTrajectory] = None,
            stop_at: Optional[float] = None,
            params: IdmParams = IdmParams(),
            n: int = 201, dt: float = 0.05, t0: float = 0.0,
            vehicle_length: float = VEHICLE_LENGTH) -> LongTrajectory:
    """Explicit-Euler IDM integration over n samples.

    Per step the binding constraint is the candidate with the smallest gap:
    the real leader (front-to-rear gap) or a standing stop target at
    `stop_at` (the vehicle rests s0 before it). Speeds are clamped at 0.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if leader is not None and len(leader) < n:
        raise HorizonMismatch(f"leader has {len(leader)} samples, need {n}")
    s_out = np.empty(n)
    v_out = np.empty(n)
    _rollout_kernel(
        s_out, v_out, n, dt, start.s, max(start.v, 0.0),
        profile.s0_grid, 1.0 / profile.ds, profile.v,
        leader.s if leader is not None else _EMPTY,
        leader.v if leader is not None else _EMPTY,
        leader is not None,
        stop_at if stop_at is not None else 0.0, stop_at is not None,
        params.a_idm, params.b, params.s0, params.T, params.delta,
        2.0 * math.sqrt(params.a_idm * params.b),
        vehicle_length, _GAP_EPS, HARD_DECEL)
    return LongTrajectory(s_out, v_out, dt=dt, t0=t0)
