"""Closed-loop simulation: replanning at the configured cadence, stochastic
double-integrator agents, deterministic seeding and trace logging."""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import arbiter, behavior, optimizer, prediction
from .behavior import BehaviorKind
from .geometry import Route, arc_to_cartesian, project_to_route
from .idm import LongState
from .scenario import IDM_AGENT, Scenario
from .prediction import SceneState, VehicleState


@dataclass(frozen=True)
class SimConfig:
    sim_step: float = 0.05
    duration: Optional[float] = None  # defaults to the scenario's
    seed: Optional[int] = None        # defaults to the scenario's

    def __post_init__(self):
        if self.sim_step <= 0:
            raise ValueError("sim_step must be positive")


@dataclass
class TraceRecord:
    t: float
    ego_s: float
    ego_x: float
    ego_y: float
    ego_v: float
    ego_a_lon: float
    ego_a_lat: float
    ego_a_abs: float
    selected: str
    option_costs: dict = field(default_factory=dict)
    vehicles: dict = field(default_factory=dict)  # id -> (s, v)
    plan_ms: float = 0.0
    converged: bool = True


class _Agent:
    """Non-reactive double integrator (optionally IDM-reactive)."""

    def __init__(self, spec, route: Route, rng: np.random.Generator):
        self.spec = spec
        self.route = route
        self.rng = rng
        self.s = spec.s
        self.v = spec.v

    def step(self, dt: float, leader_gap: Optional[float] = None,
             leader_dv: float = 0.0, idm_params=None):
        if self.spec.agent == IDM_AGENT and idm_params is not None:
            from .idm import idm_acceleration
            gap = leader_gap if leader_gap is not None and leader_gap > 0.1 else None
            a = idm_acceleration(self.v, self.route.speed_limit, gap,
                                 leader_dv if gap is not None else None,
                                 idm_params)
        else:
            a = self.rng.uniform(-1.0, 1.0)
        self.s += self.v * dt
        self.v = max(self.v + a * dt, 0.0)

    def state(self) -> VehicleState:
        pos = arc_to_cartesian(self.s, 0.0, self.route, extrapolate=True)
        heading = self.route.centerline.heading_at(min(self.s, self.route.length))
        return VehicleState(id=self.spec.id, position=pos, heading=heading,
                            speed=self.v)


def run(scenario: Scenario, config: SimConfig = SimConfig()) -> list[TraceRecord]:
    """Simulate the scenario and return one record per simulation step.

    Deterministic: traces are a pure function of (scenario, config, seed).
    """
    params = scenario.params
    dt = config.sim_step
    duration = config.duration if config.duration is not None else scenario.duration
    seed = config.seed if config.seed is not None else scenario.seed
    steps = int(round(duration / dt))
    replan_every = int(round(params.dt_replan / dt))
    if abs(replan_every * dt - params.dt_replan) > 1e-9:
        raise ValueError("dt_replan must be an integer multiple of sim_step")

    graph = scenario.graph
    ego_route = scenario.ego_route
    idm_params = params.idm()
    pred_params = params.predictor()
    arb_params = params.arbiter()
    weights = params.optimizer()
    n_opt = params.n_opt

    seq = np.random.SeedSequence(seed)
    children = seq.spawn(max(len(scenario.vehicles), 1))
    agents = [_Agent(spec, graph.routes[spec.route_id],
                     np.random.default_rng(children[i]))
              for i, spec in enumerate(scenario.vehicles)]

    # cold-start plan: constant velocity along the route
    ego_pos = arc_to_cartesian(scenario.ego_s, 0.0, ego_route)
    heading = ego_route.centerline.heading_at(scenario.ego_s)
    v_vec = scenario.ego_v * np.array([math.cos(heading), math.sin(heading)])
    plan = np.array([ego_pos + v_vec * (k - 3) * dt for k in range(n_opt)])
    plan_idx = 3
    last_kind: Optional[BehaviorKind] = None
    last_converged = True

    records: list[TraceRecord] = []
    for i in range(steps + 1):
        t = i * dt
        if i % replan_every == 0 and i < steps:
            tic = _time.perf_counter()
            plan, last_kind, costs, last_converged = _replan(
                plan, plan_idx, t, agents, scenario, graph, ego_route,
                idm_params, pred_params, arb_params, weights, params,
                last_kind)
            plan_idx = 3
            plan_ms = (_time.perf_counter() - tic) * 1e3
        else:
            plan_ms = 0.0
            costs = records[-1].option_costs if records else {}

        records.append(_record(t, plan, plan_idx, dt, ego_route, agents,
                               last_kind, costs, plan_ms, last_converged))

        if i < steps:
            for agent in agents:
                agent.step(dt, *_agent_leader(agent, agents, params),
                           idm_params=idm_params)
            plan_idx += 1
    return records


def _agent_leader(agent: _Agent, agents: list[_Agent], params):
    if agent.spec.agent != IDM_AGENT:
        return (None, 0.0)
    best_gap = None
    best_dv = 0.0
    for other in agents:
        if other is agent or other.route.id != agent.route.id:
            continue
        gap = other.s - agent.s - params.vehicle_length
        if gap > 0 and (best_gap is None or gap < best_gap):
            best_gap = gap
            best_dv = agent.v - other.v
    return (best_gap, best_dv)


def _replan(plan, plan_idx, t, agents, scenario, graph, ego_route,
            idm_params, pred_params, arb_params, weights, params, last_kind):
    dt = params.dt
    ego_pos = plan[plan_idx]
    v_vec = (plan[plan_idx + 1] - plan[plan_idx - 1]) / (2.0 * dt)
    speed = float(np.hypot(*v_vec))
    heading = (math.atan2(v_vec[1], v_vec[0]) if speed > 0.05
               else ego_route.centerline.heading_at(
                   project_to_route(ego_pos, 0.0, ego_route).s))
    ego_state = VehicleState(id="ego", position=ego_pos, heading=heading,
                             speed=speed)
    scene = SceneState(ego=ego_state,
                       others=[a.state() for a in agents],
                       graph=graph, time=t)
    predictions = prediction.predict(scene, n=params.n_ref, dt=dt,
                                     idm_params=idm_params,
                                     params=pred_params,
                                     vehicle_length=params.vehicle_length)
    ego_long = LongState(project_to_route(ego_pos, heading, ego_route).s,
                         speed)
    options = behavior.generate_options(
        ego_long, ego_route, predictions, graph, idm_params, pred_params,
        n_ref=params.n_ref, dt=dt, t0=t,
        vehicle_length=params.vehicle_length,
        include_merge=params.use_virtual_leader)
    scored = arbiter.score_options(options, predictions, ego_route, graph,
                                   last_kind, idm_params, arb_params,
                                   params.vehicle_length)
    selected = arbiter.select(scored, last_kind)
    costs = {str(s.option.kind): s.total for s in scored}

    # reference positions for the optimizer: plan sample n corresponds to
    # reference sample n-3 (the prefix holds the executed history); the
    # ego's current lateral offset is decayed to zero over the horizon so
    # the reference stays continuous with the executed prefix
    prefix = plan[plan_idx - 3:plan_idx + 1].copy()
    d0 = project_to_route(ego_pos, heading, ego_route).d
    ref_xy = np.empty((params.n_opt, 2))
    ref_xy[:4] = prefix
    span = params.n_opt - 5
    for n in range(4, params.n_opt):
        decay = max(0.0, 1.0 - (n - 4) / span) if span > 0 else 0.0
        ref_xy[n] = arc_to_cartesian(float(selected.reference.s[n - 3]),
                                     d0 * decay, ego_route, extrapolate=True)
    ref_traj = optimizer.CartesianTrajectory(ref_xy, dt=dt, t0=t - 3 * dt)
    result = optimizer.solve(ref_traj, prefix, weights)
    return result.trajectory.positions, selected.kind, costs, result.converged


def _record(t, plan, plan_idx, dt, ego_route, agents, last_kind, costs,
            plan_ms, converged) -> TraceRecord:
    p = plan[plan_idx]
    v_vec = (plan[plan_idx + 1] - plan[plan_idx - 1]) / (2.0 * dt)
    a_vec = (plan[plan_idx + 1] - 2.0 * plan[plan_idx] + plan[plan_idx - 1]) / dt**2
    speed = float(np.hypot(*v_vec))
    if speed > 1e-6:
        tangent = v_vec / speed
        a_lon = float(a_vec @ tangent)
        a_lat = float(tangent[0] * a_vec[1] - tangent[1] * a_vec[0])
    else:
        a_lon = float(np.hypot(*a_vec))
        a_lat = 0.0
    ego_s = project_to_route(p, 0.0, ego_route).s
    return TraceRecord(
        t=t, ego_s=ego_s, ego_x=float(p[0]), ego_y=float(p[1]), ego_v=speed,
        ego_a_lon=a_lon, ego_a_lat=a_lat, ego_a_abs=float(np.hypot(*a_vec)),
        selected=str(last_kind) if last_kind is not None else "",
        option_costs=dict(costs), vehicles={a.spec.id: (a.s, a.v) for a in agents},
        plan_ms=plan_ms, converged=converged)


def collision_check(trace: list[TraceRecord], scenario: Scenario) -> list[dict]:
    """Audit a trace: same-lane longitudinal overlap and simultaneous
    occupancy of crossing conflict zones."""
    graph = scenario.graph
    ego_rid = scenario.ego_route_id
    length = scenario.params.vehicle_length
    violations = []
    for tick, rec in enumerate(trace):
        for spec in scenario.vehicles:
            s_v, _ = rec.vehicles[spec.id]
            rid = spec.route_id
            if rid == ego_rid:
                if abs(s_v - rec.ego_s) < length:
                    violations.append({"tick": tick, "t": rec.t,
                                       "vehicle": spec.id, "kind": "same_lane"})
                continue
            zone = graph.zone_between(ego_rid, rid)
            if zone is None:
                continue
            if zone.kind == "merging":
                de = rec.ego_s - zone.start[ego_rid]
                dv = s_v - zone.start[rid]
                if de > 0 and dv > 0 and abs(de - dv) < length:
                    violations.append({"tick": tick, "t": rec.t,
                                       "vehicle": spec.id,
                                       "kind": "shared_lane"})
            else:
                lo_e, hi_e = zone.interval(ego_rid)
                lo_v, hi_v = zone.interval(rid)
                half = 0.5 * length
                ego_in = lo_e - half < rec.ego_s < hi_e + half
                veh_in = lo_v - half < s_v < hi_v + half
                if ego_in and veh_in:
                    violations.append({"tick": tick, "t": rec.t,
                                       "vehicle": spec.id,
                                       "kind": "crossing_zone"})
    return violations
