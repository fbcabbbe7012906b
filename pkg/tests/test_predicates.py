import numpy as np
import pytest
from pytest import approx

from seaward.dynamics import EgoParams, VesselShape, VesselState, u_keep
from seaward.predicates import (
    RuleParams,
    TrajectoryTrace,
    change_course,
    collision_possible,
    crossing,
    drives_faster,
    encounter_kind,
    head_on,
    in_behind_sector,
    in_front_sector,
    in_left_sector,
    in_right_sector,
    in_sector,
    is_emergency,
    is_emergency_resolved,
    keep,
    maneuver_crossing,
    maneuver_head_on,
    no_turning,
    orientation_delta,
    orientation_towards_left,
    orientation_towards_right,
    overtake,
    persistent_encounter,
    safe_speed,
    turning_to_starboard,
)
from seaward.reachability import PointMassParams

P = RuleParams()
EGO = EgoParams()
PM = PointMassParams()
SHAPE = VesselShape(175.0, 30.0)


def vs(x, y, th=0.0, v=5.0):
    return VesselState(x, y, th, v)


# ---------------------------------------------------------------------------
# sectors

def test_in_sector_dead_ahead():
    assert in_sector(vs(0, 0), vs(100, 0), -np.pi / 4, np.pi / 4)


def test_in_sector_behind_not_in_front_wedge():
    assert not in_sector(vs(0, 0), vs(-100, 0), -np.pi / 4, np.pi / 4)


def test_in_sector_behind_spanning_half():
    # Start/end rays opposite: the stern-side half-plane is selected.
    assert in_sector(vs(0, 0), vs(-100, 0), 1.5 * np.pi, 0.5 * np.pi)
    assert not in_sector(vs(0, 0), vs(100, 0), 1.5 * np.pi, 0.5 * np.pi)


def test_sector_wrappers_cardinal():
    ego = vs(0, 0)
    assert in_front_sector(ego, vs(100, 0), P)
    assert in_behind_sector(ego, vs(-100, 0), P)
    # clockwise-positive bearings: starboard (negative y) is the right sector
    assert in_right_sector(ego, vs(50, -50), P)
    assert in_left_sector(ego, vs(50, 50), P)


def test_sector_boundary_handed_to_right():
    ego = vs(0, 0)
    b = P.delta_head_on  # exactly 5 degrees to starboard
    target = vs(100 * np.cos(-b), 100 * np.sin(-b))
    assert not in_front_sector(ego, target, P)
    assert in_right_sector(ego, target, P)


def test_sector_sweep_exactly_one():
    ego = vs(0, 0, th=0.7)
    for bearing in np.arange(0.0, 360.0, 0.1):
        ang = ego.orientation - np.radians(bearing)
        target = vs(500 * np.cos(ang), 500 * np.sin(ang))
        hits = sum([in_front_sector(ego, target, P), in_right_sector(ego, target, P),
                    in_behind_sector(ego, target, P), in_left_sector(ego, target, P)])
        assert hits == 1, f"bearing {bearing}"


# ---------------------------------------------------------------------------
# orientation predicates

def test_orientation_delta_same_heading():
    assert not orientation_delta(vs(0, 0, 0), vs(1, 1, 0), np.radians(10), 0.0)


def test_orientation_delta_reciprocal():
    assert not orientation_delta(vs(0, 0, 0), vs(1, 1, np.pi), np.radians(45), np.pi)


def test_orientation_delta_perpendicular():
    assert orientation_delta(vs(0, 0, 0), vs(1, 1, np.pi / 2), np.radians(10), 0.0)


def test_orientation_towards_right():
    assert orientation_towards_right(vs(0, 0, 0), vs(1, 1, -np.pi / 2), P.delta_head_on)
    assert not orientation_towards_left(vs(0, 0, 0), vs(1, 1, -np.pi / 2), P.delta_head_on)


def test_orientation_towards_left():
    assert orientation_towards_left(vs(0, 0, 0), vs(1, 1, np.pi / 2), P.delta_head_on)
    assert not orientation_towards_right(vs(0, 0, 0), vs(1, 1, np.pi / 2), P.delta_head_on)


def test_orientation_towards_neither_for_parallel():
    assert not orientation_towards_left(vs(0, 0, 0), vs(1, 1, 0), P.delta_head_on)
    assert not orientation_towards_right(vs(0, 0, 0), vs(1, 1, 0), P.delta_head_on)


def test_drives_faster_and_safe_speed():
    assert drives_faster(vs(0, 0, 0, 6), vs(0, 0, 0, 5))
    assert not drives_faster(vs(0, 0, 0, 5), vs(0, 0, 0, 5))
    assert safe_speed(vs(0, 0, 0, 9.5), 9.5)
    assert not safe_speed(vs(0, 0, 0, 9.6), 9.5)


# ---------------------------------------------------------------------------
# collision cone

def min_separation_constant_velocity(s_l, s_m, t_end, h=1.0):
    """Brute-force oracle: closest center separation under constant velocities."""
    best = np.inf
    for t in np.arange(0.0, t_end + h, h):
        pl = s_l.position + s_l.velocity_vector() * t
        pm_ = s_m.position + s_m.velocity_vector() * t
        best = min(best, float(np.linalg.norm(pl - pm_)))
    return best


def test_collision_possible_head_on_oracle():
    a = vs(0, 0, 0, 5)
    b = vs(3000, 0, np.pi, 5)
    assert min_separation_constant_velocity(a, b, P.t_horizon_check) < 3 * SHAPE.length
    assert collision_possible(a, b, P.t_horizon_check, SHAPE.length, P)


def test_collision_possible_parallel_false():
    a = vs(0, 0, 0, 5)
    b = vs(0, 1000, 0, 5)
    assert not collision_possible(a, b, P.t_horizon_check, SHAPE.length, P)


def test_collision_possible_perpendicular_crossing():
    # Arrival-time coincidence at the intersection point (1500, 0).
    a = vs(0, 0, 0, 5)
    b = vs(1500, -1500, np.pi / 2, 5)
    assert min_separation_constant_velocity(a, b, P.t_horizon_check) < 3 * SHAPE.length
    assert collision_possible(a, b, P.t_horizon_check, SHAPE.length, P)


def test_collision_possible_coincident_positions():
    assert collision_possible(vs(0, 0, 0, 5), vs(0, 0, 1, 5), P.t_horizon_check, SHAPE.length, P)


def test_collision_possible_monotone_in_horizon():
    rng = np.random.default_rng(21)
    for _ in range(1000):
        a = vs(0, 0, rng.uniform(0, 2 * np.pi), rng.uniform(0, 9.5))
        b = vs(*rng.uniform(-8000, 8000, 2), rng.uniform(0, 2 * np.pi), rng.uniform(0, 9.5))
        t1 = rng.uniform(60, 400)
        t2 = t1 + rng.uniform(10, 300)
        if collision_possible(a, b, t1, SHAPE.length, P):
            assert collision_possible(a, b, t2, SHAPE.length, P)


# ---------------------------------------------------------------------------
# encounter predicates

def test_head_on_geometry():
    ego = vs(0, 0, 0, 5)
    obs = vs(2000, 0, np.pi, 5)
    assert head_on(ego, obs, SHAPE, P)
    assert not crossing(ego, obs, SHAPE, P)
    assert not overtake(ego, obs, SHAPE, P)
    assert not keep(ego, obs, SHAPE, SHAPE, P)


def test_overtake_geometry():
    ego = vs(0, 0, 0, 7)
    obs = vs(1200, 0, 0, 3)
    assert overtake(ego, obs, SHAPE, P)
    assert not head_on(ego, obs, SHAPE, P)
    assert not crossing(ego, obs, SHAPE, P)
    assert not keep(ego, obs, SHAPE, SHAPE, P)
    # and the obstacle, seen from its own perspective, is the stand-on vessel
    assert keep(obs, ego, SHAPE, SHAPE, P)


def test_crossing_and_keep_geometry():
    # Obstacle approaches from starboard heading across the bow: ego gives way.
    ego = vs(0, 0, 0, 5)
    obs = vs(1500, -1500, np.pi / 2, 5)
    assert crossing(ego, obs, SHAPE, P)
    assert encounter_kind(ego, obs, SHAPE, SHAPE, P) == "crossing"
    # Mirrored: obstacle from port heading toward starboard: ego stands on.
    obs2 = vs(1500, 1500, -np.pi / 2, 5)
    assert keep(ego, obs2, SHAPE, SHAPE, P)
    assert encounter_kind(ego, obs2, SHAPE, SHAPE, P) == "keep"


def test_mutual_exclusivity_sample():
    rng = np.random.default_rng(22)
    for _ in range(5000):
        a = vs(0, 0, rng.uniform(0, 2 * np.pi), rng.uniform(0, 9.5))
        b = vs(*rng.uniform(-10000, 10000, 2), rng.uniform(0, 2 * np.pi), rng.uniform(0, 9.5))
        flags = [head_on(a, b, SHAPE, P), crossing(a, b, SHAPE, P),
                 overtake(a, b, SHAPE, P), keep(a, b, SHAPE, SHAPE, P)]
        assert sum(flags) <= 1


# ---------------------------------------------------------------------------
# persistence

def crossing_grid_oracle(ego, obs, dt=10.0):
    """Straight-line extrapolation, literal conjunction per predicted step."""
    out = []
    for k in range(1, int(P.t_react / dt) + 1):
        t = k * dt
        pe = VesselState(ego.x + ego.velocity * np.cos(ego.orientation) * t,
                         ego.y + ego.velocity * np.sin(ego.orientation) * t,
                         ego.orientation, ego.velocity)
        po = VesselState(obs.x + obs.velocity * np.cos(obs.orientation) * t,
                         obs.y + obs.velocity * np.sin(obs.orientation) * t,
                         obs.orientation, obs.velocity)
        out.append(crossing(pe, po, SHAPE, P))
    return out


def test_persistent_false_when_already_active():
    ego = vs(0, 0, 0, 5)
    obs = vs(1500, -1500, np.pi / 2, 5)
    assert crossing(ego, obs, SHAPE, P)
    assert not persistent_encounter("crossing", ego, obs, SHAPE, SHAPE, P, EGO)


def test_persistent_true_when_entering_and_staying():
    # Just outside the closing-speed horizon now; inside from the next step on.
    d = 2150.0
    ego = vs(0, 0, 0, 5)
    obs = vs(d, -d, np.pi / 2, 5)
    assert not crossing(ego, obs, SHAPE, P)
    assert all(crossing_grid_oracle(ego, obs))
    assert persistent_encounter("crossing", ego, obs, SHAPE, SHAPE, P, EGO)


def test_persistent_false_when_dissolving():
    # Obstacle nearly done crossing the bow: predicate decays within t_react.
    ego = vs(0, 0, 0, 5)
    obs = vs(810, -138, np.pi / 2, 5)
    oracle = crossing_grid_oracle(ego, obs)
    assert not all(oracle)
    assert not persistent_encounter("crossing", ego, obs, SHAPE, SHAPE, P, EGO)


# ---------------------------------------------------------------------------
# emergency predicates

def test_is_emergency_far_apart_false():
    assert not is_emergency(vs(0, 0, 0, 5), vs(8000, 0, 0, 5), SHAPE, SHAPE, P, PM, EGO)


def test_is_emergency_close_head_on_true():
    assert is_emergency(vs(0, 0, 0, 6), vs(600, 0, np.pi, 6), SHAPE, SHAPE, P, PM, EGO)


def test_is_emergency_obstacle_behind_slower_false():
    assert not is_emergency(vs(0, 0, 0, 6), vs(-2500, 0, 0, 2), SHAPE, SHAPE, P, PM, EGO)


def test_is_emergency_overspeed_conservative_true():
    assert is_emergency(vs(0, 0, 0, 6), vs(3000, 0, np.pi, 11.0), SHAPE, SHAPE, P, PM, EGO)


def test_is_emergency_monotone_in_horizon():
    rng = np.random.default_rng(23)
    p_long = P
    p_short = RuleParams(t_pred=90.0)
    for _ in range(300):
        a = vs(0, 0, rng.uniform(0, 2 * np.pi), rng.uniform(0, 9.5))
        b = vs(*rng.uniform(-4000, 4000, 2), rng.uniform(0, 2 * np.pi), rng.uniform(0, 9.5))
        if is_emergency(a, b, SHAPE, SHAPE, p_short, PM, EGO):
            assert is_emergency(a, b, SHAPE, SHAPE, p_long, PM, EGO)


def test_resolved_astern_receding():
    ego = vs(0, 0, 0, 6)
    obs = vs(-400, 0, np.pi, 5)  # astern, heading away
    assert is_emergency_resolved(ego, obs, 175.0, P)


def test_resolved_rejects_parallel_heading():
    ego = vs(0, 0, 0, 6)
    obs = vs(-400, 0, 0, 5)  # astern but following
    assert not is_emergency_resolved(ego, obs, 175.0, P)


def test_resolved_rejects_ahead():
    assert not is_emergency_resolved(vs(0, 0, 0, 6), vs(400, 0, np.pi, 5), 175.0, P)


def test_resolved_distance_threshold():
    ego = vs(0, 0, 0, 6)
    near = vs(-300, 0, np.pi, 5)  # inside 2 * 175 = 350 m
    assert not is_emergency_resolved(ego, near, 175.0, P)


# ---------------------------------------------------------------------------
# trace predicates

def make_trace(turn_rates, dt=10.0, v=5.0):
    tr = TrajectoryTrace(dt=dt)
    s = VesselState(0, 0, 0, v)
    tr.states.append(s)
    th = 0.0
    for w in turn_rates:
        th += w * dt
        s = VesselState(s.x + 1, s.y, th, v)
        tr.states.append(s)
        tr.turn_rates.append(w)
    return tr


def test_constant_heading_no_change():
    tr = make_trace([0.0] * 6)
    assert not change_course(tr, 0, P.delta_large_turn)
    assert no_turning(tr, 0, P)


def test_starboard_turn_accumulates():
    # net -30 degrees over three steps
    w = -np.radians(30) / 30.0
    tr = make_trace([w, w, w])
    assert change_course(tr, 0, P.delta_large_turn)
    assert turning_to_starboard(tr, 0)


def test_oscillation_cancels_in_literal_formula():
    w = np.radians(15) / 10.0
    tr = make_trace([w, -w, w, -w])
    assert not change_course(tr, 0, P.delta_no_turn)


def test_small_turn_below_threshold():
    w = -np.radians(15) / 30.0
    tr = make_trace([w, w, w])
    assert not change_course(tr, 0, P.delta_large_turn)


def test_maneuver_crossing_literal():
    ego0 = vs(0, 0, 0, 5)
    obs = vs(1500, -1500, np.pi / 2, 5)
    w = -np.radians(25) / 30.0
    tr = make_trace([w, w, w])
    ego_now = VesselState(200, -30, tr.states[-1].orientation, 5)
    assert crossing(ego_now, obs, SHAPE, P)
    assert maneuver_crossing(ego_now, obs, SHAPE, tr, 0, P)


def test_maneuver_head_on_requires_starboard():
    obs = vs(2000, 0, np.pi, 5)
    w = np.radians(25) / 30.0  # port turn
    tr = make_trace([w, w, w])
    ego_now = vs(0, 0, tr.states[-1].orientation, 5)
    assert not maneuver_head_on(ego_now, obs, SHAPE, tr, 0, P)
