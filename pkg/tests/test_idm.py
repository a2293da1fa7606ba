"""Car-following model: acceleration law, speed profiles, and rollouts."""

import math

import numpy as np
import pytest

from crossplan import (
    IdmParams,
    LongState,
    LongTrajectory,
    SpeedProfile,
    idm_acceleration,
    rollout,
    target_speed_profile,
)
from crossplan.errors import HorizonMismatch, NonPositiveGap
from crossplan.idm import HARD_DECEL, VEHICLE_LENGTH

from scenes import circle_route, line_route


def reference_acceleration(v, v0, gap, dv, p):
    """Independent transcription of the car-following law used as oracle."""
    a = p.a_idm * (1.0 - (v / v0) ** p.delta)
    if gap is not None:
        dv = 0.0 if dv is None else dv
        s_star = p.s0 + v * p.T + v * dv / (2.0 * math.sqrt(p.a_idm * p.b))
        a -= p.a_idm * (s_star / gap) ** 2
    return min(max(a, -HARD_DECEL), p.a_idm)


def random_idm_inputs(rng, n):
    v = rng.uniform(0.0, 35.0, n)
    v0 = rng.uniform(1.0, 35.0, n)
    gap = rng.uniform(0.5, 200.0, n)
    dv = rng.uniform(-15.0, 15.0, n)
    free = rng.random(n) < 0.25
    return v, v0, np.where(free, np.nan, gap), dv


def test_acceleration_matches_independent_transcription():
    rng = np.random.default_rng(42)
    p = IdmParams()
    v, v0, gap, dv = random_idm_inputs(rng, 2000)
    for i in range(len(v)):
        g = None if np.isnan(gap[i]) else float(gap[i])
        got = idm_acceleration(float(v[i]), float(v0[i]), g, float(dv[i]), p)
        want = reference_acceleration(float(v[i]), float(v0[i]), g,
                                      float(dv[i]), p)
        assert abs(got - want) <= 1e-12 * max(1.0, abs(want))


def test_free_road_limits():
    p = IdmParams()
    assert idm_acceleration(0.0, 20.0) == pytest.approx(p.a_idm)
    assert idm_acceleration(20.0, 20.0) == pytest.approx(0.0)
    assert idm_acceleration(30.0, 20.0) < 0.0
    # clamped to the hard-deceleration floor for a closing tiny gap
    assert idm_acceleration(30.0, 30.0, gap=0.5, dv=20.0) == -HARD_DECEL


def test_missing_dv_defaults_to_zero():
    a = idm_acceleration(10.0, 20.0, gap=30.0)
    b = idm_acceleration(10.0, 20.0, gap=30.0, dv=0.0)
    assert a == b


def test_non_positive_gap_raises():
    with pytest.raises(NonPositiveGap):
        idm_acceleration(10.0, 20.0, gap=0.0)
    with pytest.raises(NonPositiveGap):
        idm_acceleration(10.0, 20.0, gap=-3.0)


def equilibrium_gap(v, v0, p):
    """Gap at which a follower of a same-speed leader has zero acceleration."""
    s_star = p.s0 + v * p.T
    return s_star / math.sqrt(1.0 - (v / v0) ** p.delta)


@pytest.mark.parametrize("v", [5.0, 10.0, 15.0, 20.0])
def test_equilibrium_gap_rollout_holds_speed(v):
    p = IdmParams()
    v0 = 30.0
    n, dt = 201, 0.05
    gap = equilibrium_gap(v, v0, p)
    t = np.arange(n) * dt
    leader = LongTrajectory(1000.0 + v * t, np.full(n, v), dt)
    start = LongState(1000.0 - VEHICLE_LENGTH - gap, v)
    profile = SpeedProfile(0.0, 1e4, np.array([v0, v0]))
    traj = rollout(start, profile, leader=leader, params=p, n=n, dt=dt)
    assert np.max(np.abs(traj.v - v)) <= 1e-3


def test_rollout_rests_minimum_gap_before_stop_target():
    p = IdmParams()
    profile = SpeedProfile(0.0, 1e4, np.array([20.0, 20.0]))
    traj = rollout(LongState(0.0, 15.0), profile, stop_at=150.0, params=p,
                   n=501, dt=0.05)
    assert traj.v[-1] < 0.05
    assert 150.0 - p.s0 - 1.0 <= traj.s[-1] <= 150.0 - p.s0 + 0.05
    assert np.all(traj.v >= 0.0)


def test_rollout_converges_to_profile_speed():
    profile = SpeedProfile(0.0, 1e4, np.array([12.0, 12.0]))
    traj = rollout(LongState(0.0, 2.0), profile, n=601, dt=0.05)
    assert traj.v[-1] == pytest.approx(12.0, abs=0.1)
    assert np.all(np.diff(traj.v) >= -1e-12)


def test_rollout_input_validation():
    profile = SpeedProfile(0.0, 1e4, np.array([10.0, 10.0]))
    short_leader = LongTrajectory(np.arange(50.0), np.ones(50), 0.05)
    with pytest.raises(HorizonMismatch):
        rollout(LongState(0.0, 5.0), profile, leader=short_leader, n=201)
    with pytest.raises(ValueError):
        rollout(LongState(0.0, 5.0), profile, n=1)


def test_trajectory_container_accessors():
    dt = 0.1
    s = np.array([0.0, 1.0, 2.0, 3.0])
    v = np.array([10.0, 10.0, 10.0, 10.0])
    traj = LongTrajectory(s, v, dt, t0=1.0)
    assert len(traj) == 4
    assert traj.duration == pytest.approx(0.3)
    assert traj.state_at(2).s == 2.0
    assert np.allclose(traj.accelerations(), 0.0)
    assert traj.first_index_reaching(1.5) == 2
    assert traj.first_index_reaching(0.0) == 0
    assert traj.first_index_reaching(9.0) is None
    with pytest.raises(ValueError):
        LongTrajectory([0.0], [1.0], dt)


def test_idm_params_validation():
    with pytest.raises(ValueError):
        IdmParams(a_idm=0.0)
    with pytest.raises(ValueError):
        IdmParams(T=-1.0)


def test_speed_profile_interpolation_and_clamping():
    profile = SpeedProfile(10.0, 5.0, np.array([4.0, 8.0, 6.0]))
    assert profile.v_at(0.0) == 4.0
    assert profile.v_at(12.5) == pytest.approx(6.0)
    assert profile.v_at(15.0) == 8.0
    assert profile.v_at(100.0) == 6.0


def test_curvature_limits_target_speed_profile():
    radius = 50.0
    a_lat = 2.0
    route = circle_route("c", radius, n=400, limit=20.0)
    profile = target_speed_profile(route, 20.0, a_lat_max=a_lat)
    v_mid = profile.v_at(0.5 * route.length)
    assert v_mid == pytest.approx(math.sqrt(a_lat * radius), rel=0.02)
    straight = line_route("s", [0.0, 0.0], [200.0, 0.0], limit=20.0)
    assert target_speed_profile(straight, 20.0).v_at(100.0) == pytest.approx(20.0)


def test_speed_profile_backward_pass_bounds_deceleration():
    # straight approach into a tight curve: braking spread over the approach
    decel = 4.0
    theta = np.linspace(0.0, np.pi / 2, 60)
    curve = np.stack([8.0 * np.sin(theta), 8.0 * (1.0 - np.cos(theta))],
                     axis=1)
    approach = np.stack([np.linspace(-150.0, -1.0, 100),
                         np.zeros(100)], axis=1)
    from crossplan import Polyline, Route
    route = Route(id="r", centerline=Polyline(np.vstack([approach, curve])),
                  speed_limit=20.0, intersection_start=None)
    profile = target_speed_profile(route, 20.0, decel=decel)
    # measure on the profile's own grid; v is piecewise linear between nodes
    s = profile.s0_grid + profile.ds * np.arange(len(profile.v))
    v = np.array([profile.v_at(x) for x in s])
    rate = np.diff(v ** 2) / (2.0 * profile.ds)
    assert rate.min() >= -decel - 1e-6
    assert v.min() < 5.0  # the curve forces real braking
