"""Scoring and selection of behavior options: ego progress versus courtesy
toward predicted other vehicles, with hysteresis on the previous choice."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .behavior import FREE, MERGE, STOP, BehaviorKind, BehaviorOption
from .errors import LengthMismatch, NoOption
from .geometry import ConflictZone, Route, RouteGraph
from .idm import (IdmParams, LongTrajectory, VEHICLE_LENGTH, rollout)
from .prediction import Hypothesis, PredictorParams


@dataclass(frozen=True)
class ArbiterParams:
    w_p: float = 1.0
    w_c: float = 1.0
    h_a_const: float = 0.25    # m/s^2, merge hysteresis
    h_ttc_const: float = 0.25  # s, crossing hysteresis
    da_max: float = 0.9        # m/s^2, max allowed follower disturbance
    dt_max: float = 1.0        # s, min temporal margin in crossing zones

    def __post_init__(self):
        for name in ("w_p", "w_c", "h_a_const", "h_ttc_const", "da_max", "dt_max"):
            if getattr(self, name) < 0:
                raise ValueError(f"ArbiterParams.{name} must be >= 0")


@dataclass
class ScoredOption:
    option: BehaviorOption
    progress_cost: float
    courtesy_cost: float  # probability-weighted sum over hypotheses
    total: float
    terms: dict = field(default_factory=dict)  # (vehicle, hyp idx) -> cost


def progress_cost(reference: LongTrajectory,
                  stop_reference: Optional[LongTrajectory]) -> float:
    """Mean acceleration advantage over the stopping baseline.

    Without an intersection ahead there is no stop baseline and the cost
    is 0 for every option.
    """
    if stop_reference is None:
        return 0.0
    if len(reference) != len(stop_reference) or reference.dt != stop_reference.dt:
        raise LengthMismatch("option and stop reference must share the grid")
    a = reference.accelerations()
    a_stop = stop_reference.accelerations()
    return float(np.mean(a_stop - a))


def merge_courtesy(option: BehaviorOption, follower: Hypothesis,
                   ego_route: Route, zone: ConflictZone, same_as_last: bool,
                   idm_params: IdmParams = IdmParams(),
                   params: ArbiterParams = ArbiterParams(),
                   vehicle_length: float = VEHICLE_LENGTH) -> float:
    """Predicted disturbance of a merging-route follower: mean |a - a_react|
    minus the hysteresis bias; infinite above the disturbance limit.

    The follower's reaction is re-simulated with the ego reference acting
    as its leader from the moment the ego enters the shared lane.

    Entering the shared lane too close in time to the other vehicle's
    arrival at the merge point is rejected outright, with the same
    retention bias as the crossing-zone margin check.
    """
    ref = option.reference
    enter = ref.first_index_reaching(zone.start[ego_route.id])
    if enter is not None and enter > 0:
        other = follower.trajectory.first_index_reaching(
            zone.start[follower.route_id])
        if other is not None and other > 0:
            margin = abs(enter - other) * ref.dt
            h = params.h_ttc_const if same_as_last else -params.h_ttc_const
            if margin + h < params.dt_max:
                return math.inf
    delta_a = _follower_disturbance(option, follower, ego_route, zone,
                                    idm_params, vehicle_length)
    if delta_a <= 0.0:
        return 0.0
    h_a = params.h_a_const if same_as_last else -params.h_a_const
    cost = delta_a - h_a
    return cost if cost <= params.da_max else math.inf


def _follower_disturbance(option: BehaviorOption, follower: Hypothesis,
                          ego_route: Route, zone: ConflictZone,
                          idm_params: IdmParams,
                          vehicle_length: float) -> float:
    ref = option.reference
    s_m_ego = zone.start[ego_route.id]
    s_m_f = zone.start[follower.route_id]
    enter = ref.first_index_reaching(s_m_ego)
    if enter is None:
        return 0.0  # ego never enters the shared lane within the horizon
    # ego reference mapped onto the follower's arc length; before entry the
    # ego is irrelevant (parked far ahead) so the follower drives its plan
    n = len(ref)
    ego_s_mapped = np.full(n, np.inf)
    ego_s_mapped[enter:] = s_m_f + (ref.s[enter:] - s_m_ego)
    f_traj = follower.trajectory
    gap_ahead = (float(f_traj.s[enter]) - 0.5 * vehicle_length
                 - float(ego_s_mapped[enter]) - 0.5 * vehicle_length)
    if gap_ahead >= 0.0:
        # The other vehicle is ahead at entry: the ego merges behind it.
        # Entering closer than the desired following gap is not a safe
        # merge state (the ego would cut in on its own new leader), so
        # such references are rejected outright.
        ve = float(ref.v[enter])
        dv_lead = ve - float(f_traj.v[enter])
        idm = idm_params
        want = idm.s0 + ve * idm.T + ve * dv_lead / (2.0 * math.sqrt(idm.a_idm * idm.b))
        if gap_ahead < 0.85 * max(want, idm.s0):
            return math.inf
        return 0.0
    # far-gap shortcut: evaluate the IDM interaction term along the
    # unperturbed follower plan; when it never exceeds 0.01 m/s^2 the
    # reaction equals the plan and the disturbance is negligible
    gaps = ego_s_mapped[enter:] - f_traj.s[enter:] - vehicle_length
    vf = f_traj.v[enter:]
    dv = vf - ref.v[enter:]
    idm = idm_params
    s_star = idm.s0 + vf * idm.T + vf * dv / (2.0 * math.sqrt(idm.a_idm * idm.b))
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        interaction = float(np.nanmax(idm.a_idm * (s_star / gaps) ** 2))
    if interaction < 0.01:
        return 0.0
    ego_as_leader = LongTrajectory(ego_s_mapped, ref.v, dt=ref.dt, t0=ref.t0)
    react = rollout(follower.start, follower.profile,
                    leader=_min_leader(follower.leader, ego_as_leader),
                    stop_at=follower.stop_at, n=n, dt=ref.dt, t0=ref.t0,
                    params=idm_params, vehicle_length=vehicle_length)
    a_plan = follower.trajectory.accelerations()
    a_react = react.accelerations()
    return float(np.mean(np.abs(a_plan - a_react)))


def _min_leader(a: Optional[LongTrajectory],
                b: LongTrajectory) -> LongTrajectory:
    """Combine two leader trajectories by taking the closer one per step."""
    if a is None:
        return b
    n = min(len(a), len(b))
    s = np.minimum(a.s[:n], b.s[:n])
    pick_a = a.s[:n] <= b.s[:n]
    v = np.where(pick_a, a.v[:n], b.v[:n])
    return LongTrajectory(s, v, dt=b.dt, t0=b.t0)


def crossing_courtesy(option: BehaviorOption, crosser: Hypothesis,
                      ego_route: Route, zone: ConflictZone,
                      same_as_last: bool,
                      params: ArbiterParams = ArbiterParams(),
                      vehicle_length: float = VEHICLE_LENGTH) -> float:
    """0 when the temporal margin in the crossing zone is large enough in
    either passing order, infinite otherwise."""
    if zone.kind != "crossing":
        return 0.0
    ref = option.reference
    lo_e, hi_e = zone.interval(ego_route.id)
    lo_c, hi_c = zone.interval(crosser.route_id)
    half = 0.5 * vehicle_length
    t = _zone_times(ref, lo_e - half, hi_e + half)
    if t is None:
        return 0.0  # ego never enters the zone: maximally passive
    t_entry_e, t_exit_e = t
    tc = _zone_times(crosser.trajectory, lo_c - half, hi_c + half)
    if tc is None:
        return 0.0  # crosser never reaches the zone within the horizon
    t_entry_c, t_exit_c = tc
    h = params.h_ttc_const if same_as_last else -params.h_ttc_const
    go_first = (t_entry_c - t_exit_e) + h >= params.dt_max
    go_after = (t_entry_e - t_exit_c) + h >= params.dt_max
    return 0.0 if (go_first or go_after) else math.inf


def _zone_times(traj: LongTrajectory, s_enter: float, s_clear: float):
    """(t_entry, t_exit) of a trajectory through [s_enter, s_clear]."""
    enter = traj.first_index_reaching(s_enter)
    if enter is None:
        return None
    leave = traj.first_index_reaching(s_clear)
    t_entry = traj.t0 + enter * traj.dt
    t_exit = traj.t0 + leave * traj.dt if leave is not None else math.inf
    return t_entry, t_exit


def score_options(options: list[BehaviorOption],
                  predictions: dict[str, list[Hypothesis]],
                  ego_route: Route, graph: RouteGraph,
                  last_kind: Optional[BehaviorKind] = None,
                  idm_params: IdmParams = IdmParams(),
                  params: ArbiterParams = ArbiterParams(),
                  vehicle_length: float = VEHICLE_LENGTH) -> list[ScoredOption]:
    """Cost every option: w_p * progress + w_c * sum_i sum_k P * courtesy.

    Options that make less initial progress than the stop baseline are
    pruned (they are dominated by stopping) except the stop option itself.
    """
    stop_ref = next((o.reference for o in options if o.kind.name == STOP), None)
    scored = []
    for opt in options:
        if stop_ref is not None and opt.kind.name != STOP:
            if progress_cost(opt.reference, stop_ref) >= 0.0:
                continue
        same = (last_kind is not None
                and opt.kind.retention_key == last_kind.retention_key)
        c_p = progress_cost(opt.reference, stop_ref)
        c_c = 0.0
        terms = {}
        for vid in sorted(predictions):
            for k, hyp in enumerate(predictions[vid]):
                if hyp.route_id == ego_route.id:
                    continue
                zone = graph.zone_between(ego_route.id, hyp.route_id)
                if zone is None:
                    continue
                if opt.kind.name == STOP:
                    term = 0.0  # the stop option never enters the conflict
                elif zone.kind == "merging":
                    term = merge_courtesy(opt, hyp, ego_route, zone, same,
                                          idm_params, params, vehicle_length)
                else:
                    term = crossing_courtesy(opt, hyp, ego_route, zone, same,
                                             params, vehicle_length)
                terms[(vid, k)] = term
                c_c += hyp.probability * term
        total = params.w_p * c_p + params.w_c * c_c
        scored.append(ScoredOption(option=opt, progress_cost=c_p,
                                   courtesy_cost=c_c, total=total,
                                   terms=terms))
    return scored


_KIND_ORDER = {STOP: 0, FREE: 1, MERGE: 2}


def select(scored: list[ScoredOption],
           last_kind: Optional[BehaviorKind] = None) -> BehaviorOption:
    """Minimum-total option; infinite totals fall back to stopping.

    Ties prefer the previously selected kind, then stop < follow < merge.
    """
    if not scored:
        raise NoOption("no scored options")
    finite = [s for s in scored if math.isfinite(s.total)]
    if not finite:
        for s in scored:
            if s.option.kind.name == STOP:
                return s.option
        return min(scored, key=lambda s: s.courtesy_cost).option

    def order(s: ScoredOption):
        retained = (last_kind is not None
                    and s.option.kind.retention_key == last_kind.retention_key)
        return (s.total, 0 if retained else 1,
                _KIND_ORDER.get(s.option.kind.name, 3),
                s.option.kind.target_vehicle or "")

    return min(finite, key=order).option
