"""Option scoring: progress cost, courtesy costs, hysteresis, selection."""

import math

import numpy as np
import pytest

from crossplan import (
    ArbiterParams,
    BehaviorKind,
    BehaviorOption,
    Hypothesis,
    LongState,
    LongTrajectory,
    generate_options,
    predict,
    score_options,
    select,
)
from crossplan.arbiter import (
    ScoredOption,
    crossing_courtesy,
    merge_courtesy,
    progress_cost,
)
from crossplan.behavior import FREE, MERGE, STOP
from crossplan.errors import LengthMismatch, NoOption
from crossplan.prediction import SceneState, VehicleState

from scenes import merge_graph, t_junction_graph

MERGE_GRAPH = merge_graph()
T_GRAPH = t_junction_graph()


def _traj(v_seq, dt=0.05, s0=0.0, t0=0.0):
    v = np.asarray(v_seq, dtype=float)
    s = s0 + np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * dt)])
    return LongTrajectory(s, v, dt, t0=t0)


def _constant(s0, v, n=201, dt=0.05):
    t = np.arange(n) * dt
    return LongTrajectory(s0 + v * t, np.full(n, v), dt)


def test_progress_cost_is_mean_acceleration_advantage():
    dt = 0.05
    option = _traj(np.linspace(10.0, 15.0, 101), dt)   # +1 m/s^2
    stop = _traj(np.linspace(10.0, 0.0, 101), dt)      # -2 m/s^2
    c = progress_cost(option, stop)
    a = option.accelerations()
    a_stop = stop.accelerations()
    assert c == pytest.approx(float(np.mean(a_stop - a)))
    assert c == pytest.approx(-3.0, abs=1e-9)
    # faster than the baseline means negative (better) cost
    assert c < 0.0


def test_progress_cost_without_stop_baseline_is_zero():
    option = _traj(np.linspace(10.0, 15.0, 101))
    assert progress_cost(option, None) == 0.0


def test_progress_cost_grid_mismatch_raises():
    a = _traj(np.full(101, 10.0), dt=0.05)
    b = _traj(np.full(90, 10.0), dt=0.05)
    with pytest.raises(LengthMismatch):
        progress_cost(a, b)


# --- crossing courtesy -------------------------------------------------------

ZONE_X = T_GRAPH.zone_between("side", "south")
SIDE = T_GRAPH.routes["side"]


def _crossing_pair(offset, v=10.0):
    """Ego reference through the crossing zone plus a crosser arriving
    `offset` seconds after the ego does."""
    lo_e, _ = ZONE_X.interval("side")
    lo_c, _ = ZONE_X.interval("south")
    ego_ref = _constant(lo_e - 5.0 * v, v)  # enters the area after 5 s
    crosser = Hypothesis("south", "drive",
                         _constant(lo_c - (5.0 + offset) * v, v), 1.0)
    option = BehaviorOption(BehaviorKind(FREE), ego_ref)
    return option, crosser


@pytest.mark.parametrize("offset", np.linspace(-6.0, 6.0, 49))
def test_crossing_retention_bias_is_one_directional(offset):
    option, crosser = _crossing_pair(float(offset))
    kept = crossing_courtesy(option, crosser, SIDE, ZONE_X, True)
    fresh = crossing_courtesy(option, crosser, SIDE, ZONE_X, False)
    assert kept in (0.0, math.inf)
    assert fresh in (0.0, math.inf)
    assert kept <= fresh  # retention can only relax the margin


def test_crossing_hysteresis_band_is_nonempty():
    flips = 0
    for offset in np.linspace(-6.0, 6.0, 121):
        option, crosser = _crossing_pair(float(offset))
        kept = crossing_courtesy(option, crosser, SIDE, ZONE_X, True)
        fresh = crossing_courtesy(option, crosser, SIDE, ZONE_X, False)
        if kept == 0.0 and fresh == math.inf:
            flips += 1
    assert flips > 0


def test_crossing_courtesy_clear_margins():
    # crosser arrives long after the ego cleared: free to go first
    option, crosser = _crossing_pair(8.0)
    assert crossing_courtesy(option, crosser, SIDE, ZONE_X, False) == 0.0
    # crosser cleared long before the ego arrives: free to go after
    option, crosser = _crossing_pair(-8.0)
    assert crossing_courtesy(option, crosser, SIDE, ZONE_X, False) == 0.0
    # simultaneous occupancy is vetoed
    option, crosser = _crossing_pair(0.0)
    assert crossing_courtesy(option, crosser, SIDE, ZONE_X, False) == math.inf


def test_crossing_courtesy_passive_cases_cost_nothing():
    lo_c, _ = ZONE_X.interval("south")
    standing = BehaviorOption(BehaviorKind(STOP), _constant(0.0, 0.0))
    crosser = Hypothesis("south", "drive", _constant(lo_c - 30.0, 10.0), 1.0)
    assert crossing_courtesy(standing, crosser, SIDE, ZONE_X, False) == 0.0
    option, _ = _crossing_pair(0.0)
    parked = Hypothesis("south", "drive", _constant(0.0, 0.0), 1.0)
    assert crossing_courtesy(option, parked, SIDE, ZONE_X, False) == 0.0


# --- merge courtesy ----------------------------------------------------------

ZONE_M = MERGE_GRAPH.zone_between("ramp", "main")
RAMP = MERGE_GRAPH.routes["ramp"]


def _merge_pair(offset, v=15.0):
    from crossplan import rollout
    from crossplan.idm import route_profile

    lo_e = ZONE_M.start["ramp"]
    lo_f = ZONE_M.start["main"]
    ego_ref = _constant(lo_e - 4.0 * v, v)
    start = LongState(lo_f - (4.0 + offset) * v, v)
    profile = route_profile(MERGE_GRAPH.routes["main"])
    plan = rollout(start, profile)
    follower = Hypothesis("main", "drive", plan, 1.0,
                          profile=profile, start=start)
    option = BehaviorOption(BehaviorKind(MERGE, "veh1", 0), ego_ref)
    return option, follower


@pytest.mark.parametrize("offset", np.linspace(-5.0, 8.0, 53))
def test_merge_retention_never_increases_cost(offset):
    option, follower = _merge_pair(float(offset))
    kept = merge_courtesy(option, follower, RAMP, ZONE_M, True)
    fresh = merge_courtesy(option, follower, RAMP, ZONE_M, False)
    assert kept <= fresh + 1e-12
    if math.isfinite(kept):
        # a retained option gets at most the hysteresis discount
        assert kept >= -ArbiterParams().h_a_const - 1e-12


def test_merge_hysteresis_band_is_nonempty():
    flips = 0
    for offset in np.linspace(-5.0, 8.0, 105):
        option, follower = _merge_pair(float(offset))
        kept = merge_courtesy(option, follower, RAMP, ZONE_M, True)
        fresh = merge_courtesy(option, follower, RAMP, ZONE_M, False)
        if math.isfinite(kept) and fresh == math.inf:
            flips += 1
    assert flips > 0


def test_merge_courtesy_nonnegative_and_disturbance_free_cases():
    # follower far ahead of the ego entry: no disturbance, no cost
    option, follower = _merge_pair(-8.0)
    assert merge_courtesy(option, follower, RAMP, ZONE_M, False) == 0.0
    # tight cut-in right in front of the follower is vetoed
    option, follower = _merge_pair(0.25)
    assert merge_courtesy(option, follower, RAMP, ZONE_M, False) == math.inf


# --- scoring and selection ---------------------------------------------------


def _merge_scene(ego_s=None, ego_v=14.0):
    ego_s = RAMP.intersection_start - 60.0 if ego_s is None else ego_s
    main = MERGE_GRAPH.routes["main"]
    s1 = ZONE_M.start["main"] - 70.0
    others = [VehicleState("veh1", main.centerline.point_at(s1),
                           main.centerline.heading_at(s1), 17.0)]
    scene = SceneState(ego=None, others=others, graph=MERGE_GRAPH)
    ego = LongState(ego_s, ego_v)
    preds = predict(scene)
    options = generate_options(ego, RAMP, preds, MERGE_GRAPH)
    return options, preds


def test_stop_option_has_zero_progress_and_courtesy():
    options, preds = _merge_scene()
    scored = score_options(options, preds, RAMP, MERGE_GRAPH)
    stop = next(s for s in scored if s.option.kind.name == STOP)
    assert stop.progress_cost == 0.0
    assert stop.courtesy_cost == 0.0
    assert all(v == 0.0 for v in stop.terms.values())
    assert stop.total == 0.0


def test_non_stop_options_dominated_by_stopping_are_pruned():
    options, preds = _merge_scene()
    stop_ref = next(o.reference for o in options if o.kind.name == STOP)
    sluggish = BehaviorOption(
        BehaviorKind(FREE),
        _traj(np.linspace(14.0, 0.0, 201), s0=stop_ref.s[0]))
    assert progress_cost(sluggish.reference, stop_ref) > 0.0
    scored = score_options(options + [sluggish], preds, RAMP, MERGE_GRAPH)
    assert sluggish not in [s.option for s in scored]
    kinds = {s.option.kind.name for s in scored}
    assert STOP in kinds and FREE in kinds


def test_total_combines_weighted_progress_and_courtesy():
    options, preds = _merge_scene()
    params = ArbiterParams(w_p=2.0, w_c=3.0)
    scored = score_options(options, preds, RAMP, MERGE_GRAPH, params=params)
    for s in scored:
        if math.isfinite(s.total):
            assert s.total == pytest.approx(
                2.0 * s.progress_cost + 3.0 * s.courtesy_cost)


def test_argmin_invariant_under_per_vehicle_renormalization():
    options, preds = _merge_scene()
    base = select(score_options(options, preds, RAMP, MERGE_GRAPH))
    rng = np.random.default_rng(3)
    for _ in range(5):
        scaled = {}
        for vid, hyps in preds.items():
            c = float(rng.uniform(0.2, 5.0))
            raw = [h.probability * c for h in hyps]
            total = sum(raw)
            scaled[vid] = [
                Hypothesis(h.route_id, h.maneuver, h.trajectory, p / total,
                           leader=h.leader, stop_at=h.stop_at,
                           profile=h.profile, start=h.start)
                for h, p in zip(hyps, raw)]
        again = select(score_options(options, scaled, RAMP, MERGE_GRAPH))
        assert again.kind.retention_key == base.kind.retention_key


def test_select_prefers_retained_kind_on_ties():
    free = ScoredOption(BehaviorOption(BehaviorKind(FREE), _constant(0, 10)),
                        -1.0, 0.0, -1.0)
    merge = ScoredOption(
        BehaviorOption(BehaviorKind(MERGE, "veh1", 0), _constant(0, 10)),
        -1.0, 0.0, -1.0)
    assert select([free, merge]).kind.name == FREE  # stop < free < merge
    assert select([free, merge],
                  last_kind=BehaviorKind(MERGE, "veh1")).kind.name == MERGE


def test_select_falls_back_to_stop_when_everything_is_vetoed():
    stop = ScoredOption(BehaviorOption(BehaviorKind(STOP), _constant(0, 0)),
                        0.0, math.inf, math.inf)
    free = ScoredOption(BehaviorOption(BehaviorKind(FREE), _constant(0, 10)),
                        -2.0, math.inf, math.inf)
    assert select([free, stop]).kind.name == STOP


def test_select_requires_candidates():
    with pytest.raises(NoOption):
        select([])


def test_arbiter_params_validation():
    with pytest.raises(ValueError):
        ArbiterParams(w_c=-0.1)
    with pytest.raises(ValueError):
        ArbiterParams(dt_max=-1.0)
