"""Probabilistic prediction of other vehicles: Bayes route classification,
rule-based stop/drive maneuver probabilities and IDM rollouts per hypothesis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NoCandidateRoute
from .geometry import Route, RouteGraph, normalize_angle, project_to_route
from .idm import (IdmParams, LongState, LongTrajectory, SpeedProfile,
                  VEHICLE_LENGTH, rollout, route_profile)

# corridor bounds that qualify a route as a candidate for a vehicle
CANDIDATE_D_MAX = 3.0
CANDIDATE_PHI_MAX = 0.6

STOP = "stop"
DRIVE = "drive"


@dataclass(frozen=True)
class PredictorParams:
    sigma_phi: float = 0.1       # rad
    sigma_d: float = 0.1         # m
    delta_r: float = 0.1         # leader-relevance threshold
    dt_inter: float = 3.0        # s, TTC window for the yield flag
    lambda1: float = 0.55        # yield & prioritized traffic in conflict
    lambda2: float = 1.0         # yield & free intersection
    lambda3: float = 0.75        # has priority
    merge_zone_extent: float = 15.0  # m, occupancy length past a merge point

    def __post_init__(self):
        if self.sigma_phi <= 0 or self.sigma_d <= 0:
            raise ValueError("sigmas must be positive")
        if not 0 < self.delta_r < 1:
            raise ValueError("delta_r must be in (0,1)")
        for lam in (self.lambda1, self.lambda2, self.lambda3):
            if not 0 <= lam <= 1:
                raise ValueError("lambdas must be in [0,1]")


@dataclass(frozen=True)
class VehicleState:
    id: str
    position: np.ndarray
    heading: float
    speed: float

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be >= 0")
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))


@dataclass
class SceneState:
    ego: Optional[VehicleState]
    others: list
    graph: RouteGraph
    time: float = 0.0


@dataclass
class Hypothesis:
    """One (route, maneuver) prediction of a vehicle with its rollout."""

    route_id: str
    maneuver: str
    trajectory: LongTrajectory
    probability: float
    # rollout context, kept so courtesy scoring can re-simulate the reaction
    leader: Optional[LongTrajectory] = None
    stop_at: Optional[float] = None
    profile: Optional[SpeedProfile] = field(default=None, repr=False)
    start: Optional[LongState] = None


def route_belief(position, heading: float, candidates: list[Route],
                 params: PredictorParams = PredictorParams()) -> dict[str, float]:
    """Bayes route probabilities from lateral offset and heading difference.

    Gaussian likelihoods with zero mean; uniform prior over candidates.
    """
    if not candidates:
        raise NoCandidateRoute("no candidate route for vehicle")
    logs = {}
    for route in candidates:
        pose = project_to_route(position, heading, route)
        logs[route.id] = -0.5 * ((pose.phi / params.sigma_phi) ** 2
                                 + (pose.d / params.sigma_d) ** 2)
    peak = max(logs.values())
    w = {rid: math.exp(l - peak) for rid, l in logs.items()}
    total = sum(w.values())
    return {rid: wi / total for rid, wi in w.items()}


def candidate_routes(vehicle: VehicleState, graph: RouteGraph) -> list[Route]:
    """Routes whose corridor (|d|, |phi| bounds) contains the vehicle."""
    out = []
    for rid in sorted(graph.routes):
        route = graph.routes[rid]
        s, d, dist = route.centerline.project(vehicle.position)
        if dist > CANDIDATE_D_MAX:
            continue
        phi = normalize_angle(vehicle.heading - route.centerline.heading_at(s))
        if abs(d) <= CANDIDATE_D_MAX and abs(phi) <= CANDIDATE_PHI_MAX:
            out.append(route)
    return out


def _occupancy_window(traj: LongTrajectory, zone, route_id: str,
                      extent: float, vehicle_length: float = VEHICLE_LENGTH):
    """(t_in, t_out) during which a rollout occupies the conflict zone."""
    lo, hi = zone.interval(route_id)
    if zone.kind == "merging":
        hi = lo + extent
    enter = traj.first_index_reaching(lo - 0.5 * vehicle_length)
    if enter is None:
        return None
    leave = traj.first_index_reaching(hi + 0.5 * vehicle_length)
    t_in = traj.t0 + enter * traj.dt
    t_out = traj.t0 + (leave * traj.dt if leave is not None else traj.duration)
    return t_in, t_out


def drive_probability(route: Route, drive_traj: LongTrajectory,
                      prioritized: list[tuple[str, LongTrajectory]],
                      graph: RouteGraph,
                      params: PredictorParams = PredictorParams()) -> float:
    """P(drive) for a vehicle on `route` given prioritized traffic.

    `prioritized` lists (route_id, rollout) of vehicles whose route has right
    of way over `route`. Yields lambda1/lambda2/lambda3 exactly.
    """
    if not graph.must_yield(route.id):
        return params.lambda3
    occupied = False
    for other_rid, other_traj in prioritized:
        zone = graph.zone_between(route.id, other_rid)
        if zone is None:
            continue
        lo, _ = zone.interval(route.id)
        arrive = drive_traj.first_index_reaching(lo - 0.5 * VEHICLE_LENGTH)
        if arrive is None:
            continue
        t_arrive = drive_traj.t0 + arrive * drive_traj.dt
        window = _occupancy_window(other_traj, zone, other_rid,
                                   params.merge_zone_extent)
        if window is None:
            continue
        t_in, t_out = window
        if t_in - params.dt_inter <= t_arrive <= t_out + params.dt_inter:
            occupied = True
            break
    return params.lambda1 if occupied else params.lambda2


def predict(scene: SceneState, n: int = 201, dt: float = 0.05,
            idm_params: IdmParams = IdmParams(),
            params: PredictorParams = PredictorParams(),
            vehicle_length: float = VEHICLE_LENGTH) -> dict[str, list[Hypothesis]]:
    """Hypothesis sets for every non-ego vehicle; probabilities sum to 1."""
    graph = scene.graph
    beliefs: dict[str, dict[str, float]] = {}
    poses: dict[str, dict[str, LongState]] = {}
    for veh in scene.others:
        cands = candidate_routes(veh, graph)
        if not cands:
            continue  # vehicle left the mapped area; nothing to predict
        beliefs[veh.id] = route_belief(veh.position, veh.heading, cands, params)
        poses[veh.id] = {
            r.id: LongState(project_to_route(veh.position, veh.heading, r).s,
                            veh.speed)
            for r in cands
        }

    def profile_for(route: Route) -> SpeedProfile:
        return route_profile(route)

    # depth-1 base rollouts: each vehicle free-driving its most likely route
    base: dict[str, tuple[str, LongTrajectory]] = {}
    for veh in scene.others:
        if veh.id not in beliefs:
            continue
        rid = max(beliefs[veh.id], key=lambda r: (beliefs[veh.id][r], r))
        route = graph.routes[rid]
        traj = rollout(poses[veh.id][rid], profile_for(route), n=n, dt=dt,
                       t0=scene.time, params=idm_params,
                       vehicle_length=vehicle_length)
        base[veh.id] = (rid, traj)

    result: dict[str, list[Hypothesis]] = {}
    for veh in scene.others:
        if veh.id not in beliefs:
            continue
        hypotheses = []
        for rid in sorted(beliefs[veh.id]):
            p_route = beliefs[veh.id][rid]
            if p_route <= 0.0:
                continue
            route = graph.routes[rid]
            start = poses[veh.id][rid]
            leader = _closest_leader(veh.id, rid, start.s, scene, beliefs,
                                     base, params.delta_r)
            profile = profile_for(route)
            drive_traj = rollout(start, profile, leader=leader, n=n, dt=dt,
                                 t0=scene.time, params=idm_params,
                                 vehicle_length=vehicle_length)
            prioritized = [base[o.id] for o in scene.others
                           if o.id != veh.id and o.id in base
                           and graph.has_priority_over(base[o.id][0], rid)]
            p_drive = drive_probability(route, drive_traj, prioritized, graph,
                                        params)
            hypotheses.append(Hypothesis(
                route_id=rid, maneuver=DRIVE, trajectory=drive_traj,
                probability=p_route * p_drive, leader=leader, profile=profile,
                start=start))
            s_stop = route.intersection_start
            front_passed = (s_stop is None
                            or start.s + 0.5 * vehicle_length >= s_stop)
            if not front_passed and p_drive < 1.0:
                stop_traj = rollout(start, profile, leader=leader,
                                    stop_at=s_stop, n=n, dt=dt, t0=scene.time,
                                    params=idm_params,
                                    vehicle_length=vehicle_length)
                hypotheses.append(Hypothesis(
                    route_id=rid, maneuver=STOP, trajectory=stop_traj,
                    probability=p_route * (1.0 - p_drive), leader=leader,
                    stop_at=s_stop, profile=profile, start=start))
        total = sum(h.probability for h in hypotheses)
        for h in hypotheses:
            h.probability /= total
        result[veh.id] = hypotheses
    return result


def _closest_leader(veh_id: str, route_id: str, s: float, scene: SceneState,
                    beliefs, base, delta_r: float) -> Optional[LongTrajectory]:
    """Most likely rollout of the closest vehicle ahead on the same route,
    among vehicles whose own probability for that route exceeds delta_r."""
    best = None
    best_s = math.inf
    for other in scene.others:
        if other.id == veh_id:
            continue
        b = beliefs.get(other.id, {})
        if b.get(route_id, 0.0) <= delta_r:
            continue
        pose = project_to_route(other.position, other.heading,
                                scene.graph.routes[route_id])
        if pose.s > s and pose.s < best_s:
            best_s = pose.s
            best = other.id
    if best is None:
        return None
    # leader's own most-likely rollout remapped onto this route's arc length
    rid, traj = base[best]
    if rid == route_id:
        return traj
    offset = best_s - traj.s[0]
    return LongTrajectory(traj.s + offset, traj.v, dt=traj.dt, t0=traj.t0)
