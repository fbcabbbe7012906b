"""COLREGS encounter, emergency, and maneuver predicates plus the collision cone."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import (
    ControlInput,
    ControlSequence,
    EgoParams,
    VesselShape,
    VesselState,
    step_dynamics,
    u_keep,
)
from .geometry import TWO_PI, normalize_angle
from .reachability import (
    ModelConformanceError,
    OccupancySet,
    PointMassParams,
    occupancies_intersect,
    occupancy_pm,
    occupancy_traj,
)

log = logging.getLogger(__name__)

SECTOR_SIDE = np.radians(112.5)
SECTOR_BEHIND_END = np.radians(247.5)


@dataclass(frozen=True)
class RuleParams:
    """Thresholds and horizons of the formalized traffic rules."""

    v_desired: float = 6.0
    v_eps: float = 1.0
    delta_head_on: float = np.radians(5.0)
    delta_no_turn: float = np.radians(10.0)
    delta_large_turn: float = np.radians(20.0)
    delta_ahead: float = np.radians(45.0)
    delta_stern: float = np.radians(20.0)
    delta_overtake_orient: float = np.radians(67.5)
    t_horizon_check: float = 420.0
    t_maneuver: float = 70.0
    t_react: float = 60.0
    t_pred: float = 180.0
    t_m: float = 40.0
    t_max_m: float = 200.0
    d_resolved_factor: float = 2.0   # x ego length
    d_obs_safety_factor: float = 2.0  # x obstacle length
    d_min_ahead_factor: float = 3.0   # x obstacle length
    cone_radius_factor: float = 3.0   # x target length
    a_stern_factor: float = 0.2       # x a_max
    # Literal-formula variants kept selectable; defaults follow the prose reading.
    closing_speed_literal: bool = False
    resolved_distance_literal: bool = False

    def __post_init__(self):
        if abs(self.t_max_m - (self.t_react + 2.0 * self.t_maneuver)) > 1e-9:
            raise ValueError("t_max_m must equal t_react + 2*t_maneuver")

    def d_resolved(self, l_ego: float) -> float:
        return self.d_resolved_factor * l_ego

    def d_obs_safety(self, l_obs: float) -> float:
        return self.d_obs_safety_factor * l_obs

    def d_min_ahead(self, l_obs: float) -> float:
        return self.d_min_ahead_factor * l_obs


@dataclass
class TrajectoryTrace:
    """Time-stamped ego states with the turn rate applied over each step."""

    dt: float
    states: list = field(default_factory=list)
    turn_rates: list = field(default_factory=list)

    def append(self, state: VesselState, turn_rate: float):
        self.states.append(state)
        self.turn_rates.append(turn_rate)

    def __len__(self):
        return len(self.states)


# ---------------------------------------------------------------------------
# position / orientation predicates

def relative_bearing(s_l: VesselState, s_m: VesselState) -> float:
    """Bearing of m as seen from l, clockwise-positive from l's heading, [0, 2pi)."""
    d = s_m.position - s_l.position
    return normalize_angle(s_l.orientation - np.arctan2(d[1], d[0]))


def in_sector(s_l: VesselState, s_m: VesselState, beta_start: float, beta_end: float) -> bool:
    """Relative-orientation sector test, start edge inclusive, end edge exclusive.

    Sector angles are clockwise-positive relative bearings. When start and end
    rays are exactly opposite the enclosed half-plane is the stern side of the
    start ray, which is how the half-open emergency sectors are used.
    """
    d = s_m.position - s_l.position
    if float(d @ d) < 1e-18:
        return False
    phi = normalize_angle(s_l.orientation - np.arctan2(d[1], d[0]))
    width = normalize_angle(beta_end - beta_start)
    rel = normalize_angle(phi - beta_start)
    if width < 1e-12:
        return False
    if abs(width - np.pi) < 1e-9:
        return rel >= np.pi
    return rel < width


def in_front_sector(s_l, s_m, params: RuleParams) -> bool:
    return in_sector(s_l, s_m, -params.delta_head_on, params.delta_head_on)


def in_right_sector(s_l, s_m, params: RuleParams) -> bool:
    return in_sector(s_l, s_m, params.delta_head_on, SECTOR_SIDE)


def in_left_sector(s_l, s_m, params: RuleParams) -> bool:
    return in_sector(s_l, s_m, -SECTOR_SIDE, -params.delta_head_on)


def in_behind_sector(s_l, s_m, params: RuleParams) -> bool:
    return in_sector(s_l, s_m, SECTOR_SIDE, SECTOR_BEHIND_END)


def orientation_delta(s_l: VesselState, s_m: VesselState, delta: float, c_o: float) -> bool:
    """True iff the relative orientation is outside the +-delta band around -c_o."""
    val = normalize_angle(s_m.orientation - s_l.orientation + c_o)
    return delta <= val <= TWO_PI - delta


def orientation_towards_right(s_l, s_m, delta: float) -> bool:
    val = normalize_angle(s_m.orientation - s_l.orientation)
    return np.pi + delta <= val <= TWO_PI - delta


def orientation_towards_left(s_l, s_m, delta: float) -> bool:
    val = normalize_angle(s_m.orientation - s_l.orientation)
    return delta <= val <= np.pi - delta


def drives_faster(s_l: VesselState, s_m: VesselState) -> bool:
    return s_l.velocity > s_m.velocity


def safe_speed(s_l: VesselState, v_max: float) -> bool:
    return 0.0 <= s_l.velocity <= v_max


# ---------------------------------------------------------------------------
# collision cone

def collision_possible(s_l: VesselState, s_m: VesselState, t_horizon: float,
                       target_length: float, params: RuleParams) -> bool:
    """Collision-course test: the band of plausible l velocities meets the
    velocity-obstacle cone of m (inflated to 3 target lengths) and the closing
    speed suffices to cover the separation within the horizon."""
    d = s_m.position - s_l.position
    dist = float(np.linalg.norm(d))
    if dist < 1e-9:
        return True
    rel_speed = float(np.linalg.norm(s_l.velocity_vector() - s_m.velocity_vector()))
    if params.closing_speed_literal:
        if rel_speed > dist / t_horizon:
            return False
    else:
        if rel_speed < dist / t_horizon:
            return False
    radius = params.cone_radius_factor * target_length
    return _speed_band_hits_cone(s_l, s_m.velocity_vector(), d, dist, radius, params.v_eps)


def _speed_band_hits_cone(s_l: VesselState, v_m: np.ndarray, d: np.ndarray,
                          dist: float, radius: float, v_eps: float) -> bool:
    if dist <= radius:
        return True
    axis = d / dist
    cos_a = np.sqrt(max(dist * dist - radius * radius, 0.0)) / dist
    u = s_l.heading_vector()
    s_lo, s_hi = s_l.velocity - v_eps, s_l.velocity + v_eps

    def in_cone(s):
        w = s * u - v_m
        n = float(np.linalg.norm(w))
        return n > 1e-12 and float(axis @ w) >= cos_a * n - 1e-9 * max(1.0, n)

    if in_cone(s_lo) or in_cone(s_hi):
        return True
    # Boundary crossings of the cone along the speed band: solve
    # (axis.w)^2 = cos_a^2 |w|^2 with w(s) = s*u - v_m.
    A = float(axis @ u)
    B = -float(axis @ v_m)
    uv = float(u @ v_m)
    k = cos_a * cos_a
    qa = A * A - k
    qb = 2.0 * A * B + 2.0 * k * uv
    qc = B * B - k * float(v_m @ v_m)
    roots = []
    if abs(qa) < 1e-15:
        if abs(qb) > 1e-15:
            roots = [-qc / qb]
    else:
        disc = qb * qb - 4.0 * qa * qc
        if disc >= 0:
            sq = np.sqrt(disc)
            roots = [(-qb - sq) / (2 * qa), (-qb + sq) / (2 * qa)]
    candidates = [r for r in roots if s_lo - 1e-9 <= r <= s_hi + 1e-9]
    if len(roots) == 2:
        lo, hi = min(roots), max(roots)
        lo, hi = max(lo, s_lo), min(hi, s_hi)
        if lo <= hi:
            candidates.append(0.5 * (lo + hi))
    return any(in_cone(min(max(c, s_lo), s_hi)) for c in candidates)


# ---------------------------------------------------------------------------
# encounter predicates

def overtake(s_l, s_m, shape_m: VesselShape, params: RuleParams) -> bool:
    return (collision_possible(s_l, s_m, params.t_horizon_check, shape_m.length, params)
            and in_behind_sector(s_m, s_l, params)
            and drives_faster(s_l, s_m)
            and not orientation_delta(s_l, s_m, params.delta_overtake_orient, 0.0))


def head_on(s_l, s_m, shape_m: VesselShape, params: RuleParams) -> bool:
    return (collision_possible(s_l, s_m, params.t_horizon_check, shape_m.length, params)
            and in_front_sector(s_l, s_m, params)
            and not orientation_delta(s_l, s_m, params.delta_head_on, np.pi))


def crossing(s_l, s_m, shape_m: VesselShape, params: RuleParams) -> bool:
    # An overtaking vessel never becomes a crossing vessel (rule 13 precedence);
    # without this exclusion the encounter predicates are not mutually exclusive.
    return (collision_possible(s_l, s_m, params.t_horizon_check, shape_m.length, params)
            and in_right_sector(s_l, s_m, params)
            and orientation_towards_left(s_l, s_m, params.delta_head_on)
            and not overtake(s_l, s_m, shape_m, params))


def keep(s_l, s_m, shape_l: VesselShape, shape_m: VesselShape, params: RuleParams) -> bool:
    stand_on = (collision_possible(s_l, s_m, params.t_horizon_check, shape_m.length, params)
                and in_left_sector(s_l, s_m, params)
                and orientation_towards_right(s_l, s_m, params.delta_head_on)
                and not overtake(s_l, s_m, shape_m, params))
    return stand_on or overtake(s_m, s_l, shape_l, params)


GIVE_WAY_KINDS = ("head_on", "crossing", "overtake")


def encounter_kind(s_ego, s_obs, shape_ego: VesselShape, shape_obs: VesselShape,
                   params: RuleParams) -> Optional[str]:
    """The active encounter predicate for the ego, or None. At most one can hold."""
    if head_on(s_ego, s_obs, shape_obs, params):
        return "head_on"
    if crossing(s_ego, s_obs, shape_obs, params):
        return "crossing"
    if overtake(s_ego, s_obs, shape_obs, params):
        return "overtake"
    if keep(s_ego, s_obs, shape_ego, shape_obs, params):
        return "keep"
    return None


def _kind_predicate(kind: str, s_ego, s_obs, shape_ego, shape_obs, params) -> bool:
    if kind == "head_on":
        return head_on(s_ego, s_obs, shape_obs, params)
    if kind == "crossing":
        return crossing(s_ego, s_obs, shape_obs, params)
    if kind == "overtake":
        return overtake(s_ego, s_obs, shape_obs, params)
    if kind == "keep":
        return keep(s_ego, s_obs, shape_ego, shape_obs, params)
    raise ValueError(f"unknown encounter kind {kind!r}")


def keep_course_prediction(s: VesselState, t: float) -> VesselState:
    """Closed-form solution of the dynamics under zero input (straight line)."""
    return VesselState(s.x + s.velocity * np.cos(s.orientation) * t,
                       s.y + s.velocity * np.sin(s.orientation) * t,
                       s.orientation, s.velocity)


def _prediction_grid(s_ego, s_obs, params: RuleParams, dt: float):
    steps = int(round(params.t_react / dt))
    return [(keep_course_prediction(s_ego, k * dt), keep_course_prediction(s_obs, k * dt))
            for k in range(1, steps + 1)]


def persistent_encounter(kind: str, s_ego: VesselState, s_obs: VesselState,
                         shape_ego: VesselShape, shape_obs: VesselShape,
                         params: RuleParams, ego_params: EgoParams,
                         dt: float = 10.0, grid=None) -> bool:
    """Encounter not active now but predicted to hold over [dt, t_react] when
    both vessels keep course and speed."""
    if kind not in GIVE_WAY_KINDS:
        raise ValueError("persistence is defined for give-way encounters only")
    if _kind_predicate(kind, s_ego, s_obs, shape_ego, shape_obs, params):
        return False
    if grid is None:
        grid = _prediction_grid(s_ego, s_obs, params, dt)
    return all(_kind_predicate(kind, pe, po, shape_ego, shape_obs, params)
               for pe, po in grid)


def first_persistent_kind(s_ego, s_obs, shape_ego, shape_obs, params: RuleParams,
                          ego_params: EgoParams, dt: float = 10.0) -> Optional[str]:
    """First give-way kind (in rule order) whose persistence trigger holds;
    the keep-course prediction grid is shared across the three checks."""
    grid = _prediction_grid(s_ego, s_obs, params, dt)
    for kind in GIVE_WAY_KINDS:
        if persistent_encounter(kind, s_ego, s_obs, shape_ego, shape_obs,
                                params, ego_params, dt, grid=grid):
            return kind
    return None


# ---------------------------------------------------------------------------
# emergency predicates

def u_acc_sequence(params: RuleParams, ego_params: EgoParams) -> ControlSequence:
    """Accelerate straight for t_react, then hold, covering t_pred."""
    a = params.a_stern_factor * ego_params.a_max
    rest = params.t_pred - params.t_react
    if rest <= 0:
        return ControlSequence(((params.t_pred, ControlInput(a, 0.0)),))
    return ControlSequence(((params.t_react, ControlInput(a, 0.0)),
                            (rest, ControlInput(0.0, 0.0))))


def is_emergency(s_ego: VesselState, s_obs: VesselState,
                 shape_ego: VesselShape, shape_obs: VesselShape,
                 params: RuleParams, pm: PointMassParams, ego_params: EgoParams,
                 u_ego: Optional[ControlSequence] = None, dt: float = 10.0,
                 cache: Optional[dict] = None) -> bool:
    """Predicted ego occupancy meets the obstacle's reachable occupancy within t_pred.

    `cache` (an episode-scoped dict) reuses occupancy shapes across steps: both
    keep-course corridors and reachable tubes only translate with position.
    """
    t_pred = params.t_pred
    # Sound coarse gate: maximum travel plus hull extents plus slack.
    sep = float(np.linalg.norm(s_ego.position - s_obs.position))
    reach_e = ego_params.v_max * t_pred + 0.5 * np.hypot(shape_ego.length, shape_ego.width)
    reach_o = (s_obs.velocity * t_pred + 0.5 * pm.a_max * t_pred ** 2
               + 0.5 * np.hypot(shape_obs.length, shape_obs.width))
    if sep > reach_e + reach_o + 100.0:
        return False
    try:
        occ_obs = _cached_pm_occupancy(s_obs, pm, t_pred, shape_obs, dt, cache)
    except ModelConformanceError:
        log.warning("obstacle speed %.2f exceeds the abstraction cap; "
                    "treating the situation as an emergency", s_obs.velocity)
        return True
    if u_ego is None:
        occ_ego = _cached_keep_occupancy(s_ego, shape_ego, ego_params, t_pred, dt, cache)
    else:
        occ_ego = occupancy_traj(s_ego, u_ego, t_pred, shape_ego, ego_params, dt)
    return occupancies_intersect(occ_obs, occ_ego, (0.0, t_pred))


def _cached_pm_occupancy(s: VesselState, pm: PointMassParams, t_pred: float,
                         shape: VesselShape, dt: float, cache: Optional[dict]):
    if cache is None:
        return occupancy_pm(s, pm, t_pred, shape, dt)
    key = ("pm", s.orientation, s.velocity, shape.length, shape.width, t_pred, dt)
    base = cache.get(key)
    if base is None:
        base = occupancy_pm(VesselState(0.0, 0.0, s.orientation, s.velocity),
                            pm, t_pred, shape, dt)
        cache[key] = base
    return base.translated(s.position)


def _cached_keep_occupancy(s: VesselState, shape: VesselShape, ego_params: EgoParams,
                           t_pred: float, dt: float, cache: Optional[dict]):
    if cache is None:
        return occupancy_traj(s, u_keep(t_pred), t_pred, shape, ego_params, dt)
    key = ("keep", s.orientation, s.velocity, shape.length, shape.width, t_pred, dt)
    base = cache.get(key)
    if base is None:
        base = occupancy_traj(VesselState(0.0, 0.0, s.orientation, s.velocity),
                              u_keep(t_pred), t_pred, shape, ego_params, dt)
        cache[key] = base
    return base.translated(s.position)


def is_emergency_resolved(s_ego: VesselState, s_obs: VesselState,
                          l_ego: float, params: RuleParams) -> bool:
    """Obstacle astern, headings diverging, separation beyond the resolve distance."""
    if not in_sector(s_ego, s_obs, 1.5 * np.pi, 0.5 * np.pi):
        return False
    if float(s_obs.heading_vector() @ s_ego.heading_vector()) > 0.0:
        return False
    dist = float(np.linalg.norm(s_obs.position - s_ego.position))
    d_res = params.d_resolved(l_ego)
    return dist <= d_res if params.resolved_distance_literal else dist >= d_res


# ---------------------------------------------------------------------------
# trace predicates

def change_course(trace: TrajectoryTrace, start_index: int, delta_course: float,
                  end_index: Optional[int] = None) -> bool:
    """Net commanded course change since start_index reaches delta_course."""
    end = len(trace.states) - 1 if end_index is None else end_index
    if start_index < 0 or end > len(trace.states) - 1:
        raise IndexError("trace window out of range")
    net = sum(trace.turn_rates[start_index:end]) * trace.dt
    return abs(net) >= delta_course


def turning_to_starboard(trace: TrajectoryTrace, start_index: int,
                         end_index: Optional[int] = None) -> bool:
    end = len(trace.states) - 1 if end_index is None else end_index
    diff = normalize_angle(trace.states[end].orientation - trace.states[start_index].orientation)
    return np.pi < diff < TWO_PI


def no_turning(trace: TrajectoryTrace, start_index: int, params: RuleParams,
               end_index: Optional[int] = None) -> bool:
    return not change_course(trace, start_index, params.delta_no_turn, end_index)


def maneuver_overtake(s_l, s_m, shape_m, trace, start_index, params,
                      end_index=None) -> bool:
    return (change_course(trace, start_index, params.delta_large_turn, end_index)
            and overtake(s_l, s_m, shape_m, params))


def maneuver_head_on(s_l, s_m, shape_m, trace, start_index, params,
                     end_index=None) -> bool:
    return (change_course(trace, start_index, params.delta_large_turn, end_index)
            and turning_to_starboard(trace, start_index, end_index)
            and head_on(s_l, s_m, shape_m, params))


def maneuver_crossing(s_l, s_m, shape_m, trace, start_index, params,
                      end_index=None) -> bool:
    return (change_course(trace, start_index, params.delta_large_turn, end_index)
            and turning_to_starboard(trace, start_index, end_index)
            and crossing(s_l, s_m, shape_m, params))
