"""Ego behavior options as IDM reference trajectories: free drive or car
following, stopping at the intersection, and merging into traffic gaps via
virtual leading vehicles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NoEgoRoute
from .geometry import ConflictZone, Route, RouteGraph
from .idm import (IdmParams, LongState, LongTrajectory, SpeedProfile,
                  VEHICLE_LENGTH, rollout, route_profile,
                  target_speed_profile)
from .prediction import Hypothesis, PredictorParams

N_REF = 201
DT = 0.05

FREE = "follow_or_free"
STOP = "stop"
MERGE = "merge_behind"


@dataclass(frozen=True)
class BehaviorKind:
    name: str
    target_vehicle: Optional[str] = None
    hypothesis_index: Optional[int] = None

    @property
    def retention_key(self):
        """Identity used for hysteresis: merge options per target vehicle."""
        return (self.name, self.target_vehicle)

    def __str__(self):
        if self.name == MERGE:
            return f"{MERGE}({self.target_vehicle})"
        return self.name


@dataclass
class VirtualLeader:
    trajectory: LongTrajectory  # on ego-route arc length
    merge_time: float
    merge_position: float
    rl_vehicle: str


@dataclass
class BehaviorOption:
    kind: BehaviorKind
    reference: LongTrajectory
    virtual_leader: Optional[VirtualLeader] = None
    merge_time: float = math.inf


def build_virtual_leader(rl_traj: LongTrajectory, rl_route_id: str,
                         merge_zone: ConflictZone, ego_route: Route,
                         ego_state: LongState,
                         params: IdmParams = IdmParams(),
                         rl_vehicle: str = "") -> Optional[VirtualLeader]:
    """Construct a virtual leader on the ego route mirroring a real leader
    predicted on a merging route.

    The VL is anchored at the shared-lane entry when the real leader is
    predicted to reach it; earlier states come from backward integration of
    an IDM speed profile toward that entry, later states map the real
    leader's prediction onto ego-route arc length. Returns None when the
    real leader never reaches the entry within the horizon or the backward
    integration falls behind the ego (gap already passed).
    """
    if merge_zone.kind != "merging":
        return None
    s_m_ego = merge_zone.start[ego_route.id]
    s_m_rl = merge_zone.start[rl_route_id]
    k_merge = rl_traj.first_index_reaching(s_m_rl)
    if k_merge is None:
        return None
    n = len(rl_traj)
    dt = rl_traj.dt
    v_rl = float(rl_traj.v[k_merge])
    t_merge = rl_traj.t0 + k_merge * dt

    s_vl = np.empty(n)
    v_vl = np.empty(n)
    # at and after the merge the VL is the mapped real leader
    s_vl[k_merge:] = s_m_ego + (rl_traj.s[k_merge:] - s_m_rl)
    v_vl[k_merge:] = rl_traj.v[k_merge:]

    if k_merge > 0:
        profile = _approach_profile(ego_route, ego_state, max(v_rl, 0.1),
                                    params, end_s=s_m_ego)
        s = float(s_vl[k_merge])
        for k in range(k_merge - 1, -1, -1):
            v_here = profile.v_at(s)
            s = s - v_here * dt
            if s <= ego_state.s:
                return None
            s_vl[k] = s
            v_vl[k] = v_here

    traj = LongTrajectory(s_vl, v_vl, dt=dt, t0=rl_traj.t0)
    return VirtualLeader(trajectory=traj, merge_time=t_merge,
                         merge_position=s_m_ego, rl_vehicle=rl_vehicle)


def _approach_profile(ego_route: Route, ego_state: LongState, v_target: float,
                      params: IdmParams, end_s: float) -> SpeedProfile:
    """Speed over arc length reached by the ego free-driving toward the
    merge with the real leader's entry speed as curvature-adapted target."""
    base = target_speed_profile(ego_route, v_target)
    step = 0.5
    length = max(min(end_s, ego_route.length) - ego_state.s, step)
    m = int(math.ceil(length / step)) + 2
    v = np.empty(m)
    vv = max(ego_state.v, 0.0)
    a_idm, delta = params.a_idm, params.delta
    for i in range(m):
        v[i] = vv
        v0 = max(base.v_at(ego_state.s + i * step), 0.1)
        a = a_idm * (1.0 - (vv / v0) ** delta)  # free-road IDM
        # advance by one spatial step: v dv = a ds
        vv = math.sqrt(max(vv * vv + 2.0 * a * step, 0.0))
        if vv < 0.1:
            vv = 0.1  # keep the profile positive so backward integration moves
    return SpeedProfile(s0_grid=ego_state.s, ds=step, v=v)


def generate_options(ego: LongState, ego_route: Route,
                     predictions: dict[str, list[Hypothesis]],
                     graph: RouteGraph,
                     idm_params: IdmParams = IdmParams(),
                     pred_params: PredictorParams = PredictorParams(),
                     n_ref: int = N_REF, dt: float = DT, t0: float = 0.0,
                     vehicle_length: float = VEHICLE_LENGTH,
                     include_merge: bool = True) -> list[BehaviorOption]:
    """Enumerate ego behavior options with N_ref-sample references."""
    if ego_route is None:
        raise NoEgoRoute("ego has no route")
    profile = route_profile(ego_route)
    options: list[BehaviorOption] = []

    leader = _ego_route_leader(ego, ego_route.id, predictions, pred_params,
                               n_ref)
    free_ref = rollout(ego, profile, leader=leader, n=n_ref, dt=dt, t0=t0,
                       params=idm_params, vehicle_length=vehicle_length)
    options.append(BehaviorOption(kind=BehaviorKind(FREE), reference=free_ref))

    s_stop = ego_route.intersection_start
    if s_stop is not None and ego.s + 0.5 * vehicle_length < s_stop:
        stop_ref = rollout(ego, profile, leader=leader, stop_at=s_stop,
                           n=n_ref, dt=dt, t0=t0, params=idm_params,
                           vehicle_length=vehicle_length)
        options.append(BehaviorOption(kind=BehaviorKind(STOP),
                                      reference=stop_ref))

    if include_merge:
        merges = []
        for vid in sorted(predictions):
            for h_idx, hyp in enumerate(predictions[vid]):
                if hyp.probability < pred_params.delta_r:
                    continue
                if hyp.route_id == ego_route.id:
                    continue
                zone = graph.zone_between(ego_route.id, hyp.route_id)
                if zone is None or zone.kind != "merging":
                    continue
                vl = build_virtual_leader(hyp.trajectory, hyp.route_id, zone,
                                          ego_route, ego, idm_params,
                                          rl_vehicle=vid)
                if vl is None:
                    continue
                ref = rollout(ego, profile, leader=vl.trajectory, n=n_ref,
                              dt=dt, t0=t0, params=idm_params,
                              vehicle_length=vehicle_length)
                merges.append(BehaviorOption(
                    kind=BehaviorKind(MERGE, target_vehicle=vid,
                                      hypothesis_index=h_idx),
                    reference=ref, virtual_leader=vl,
                    merge_time=vl.merge_time))
        merges.sort(key=lambda o: (o.merge_time, o.kind.target_vehicle))
        options.extend(merges)
    return options


def _ego_route_leader(ego: LongState, route_id: str,
                      predictions: dict[str, list[Hypothesis]],
                      pred_params: PredictorParams,
                      n_ref: int) -> Optional[LongTrajectory]:
    """Most likely trajectory of the closest predicted vehicle ahead of the
    ego on its own route."""
    best = None
    best_s = math.inf
    for vid in sorted(predictions):
        on_route = [h for h in predictions[vid] if h.route_id == route_id]
        if not on_route:
            continue
        route_p = sum(h.probability for h in on_route)
        if route_p < pred_params.delta_r:
            continue
        top = max(on_route, key=lambda h: h.probability)
        s_now = float(top.trajectory.s[0])
        if s_now > ego.s and s_now < best_s:
            best_s = s_now
            best = top.trajectory
    if best is not None and len(best) < n_ref:
        return None
    return best
