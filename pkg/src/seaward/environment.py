"""Episodic environment: observations, reward, termination, action masking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import ActionTable, EgoParams, VesselState, simulate_dense, step_dynamics, u_keep
from .geometry import intersects, oriented_rectangle, rotate, wrap_pi
from .predicates import (
    RuleParams,
    in_behind_sector,
    in_front_sector,
    in_left_sector,
    in_right_sector,
)
from .reachability import PointMassParams
from .scenarios import Scenario
from .statechart import Rho, SafetySupervisor
from .synthesis import derive_action_sets

OBSERVATION_SIZE = 27
SECTOR_NAMES = ("front", "left", "right", "behind")
TERMINATION_ORDER = ("collision", "area", "stopped", "goal", "time")  # cause precedence
FLAG_ORDER = ("time", "area", "stopped", "collision", "goal")  # observation layout


class MaskViolationError(ValueError):
    """The caller stepped with an action outside the safe action set."""


@dataclass(frozen=True)
class EnvParams:
    v_low: float = 2.5
    v_high: float = 8.0
    c_time: float = -25.0
    c_area: float = -5.0
    c_goal: float = 50.0
    c_stopped: float = -40.0
    c_collision: float = -50.0
    c_emergency: float = -0.5
    c_reach: float = 1.5
    c_v: float = -2.0
    c_deviate: float = -0.001
    d_sense: float = 8000.0
    d_hull: float = 2000.0
    sectors: int = 4
    # Encounter-shaping reward coefficients; placeholders exposed for tuning.
    colregs_alpha: float = 2.0
    colregs_gamma_deg: float = 0.04
    colregs_zeta_v: float = 0.05
    colregs_zeta_d: float = 0.003


@dataclass(frozen=True)
class RewardBreakdown:
    sparse: float = 0.0
    colregs: float = 0.0
    goal: float = 0.0
    velocity: float = 0.0
    deviate: float = 0.0

    @property
    def total(self) -> float:
        return self.sparse + self.colregs + self.goal + self.velocity + self.deviate

    def to_dict(self) -> dict:
        return {"sparse": self.sparse, "colregs": self.colregs, "goal": self.goal,
                "velocity": self.velocity, "deviate": self.deviate, "total": self.total}


@dataclass
class StepResult:
    observation: np.ndarray
    reward: RewardBreakdown
    terminated: bool
    cause: Optional[str]
    mask: np.ndarray
    info: dict


def mask_to_hex(mask: np.ndarray) -> str:
    bits = 0
    for i, b in enumerate(mask):
        if b:
            bits |= 1 << i
    return format(bits, "013x")


def hex_to_mask(text: str, n: int = 49) -> np.ndarray:
    bits = int(text, 16)
    return np.array([(bits >> i) & 1 == 1 for i in range(n)])


def _goal_polygon(scenario: Scenario):
    return oriented_rectangle(scenario.goal_length, scenario.goal_width,
                              scenario.goal_center, scenario.goal_orientation)


def _orientation_gap_to_range(theta: float, center: float, tol: float) -> float:
    """Signed angular distance to the tolerance band around center (0 inside)."""
    d = wrap_pi(theta - center)
    if abs(d) <= tol:
        return 0.0
    return d - np.sign(d) * tol


class Environment:
    """One scenario episode with fixed time step and optional safety masking."""

    def __init__(self, scenario: Scenario, rule_params: RuleParams = RuleParams(),
                 env_params: EnvParams = EnvParams(), ego_params: EgoParams = EgoParams(),
                 pm_params: PointMassParams = PointMassParams(), verify: bool = True):
        self.scenario = scenario
        self.rule = rule_params
        self.env = env_params
        self.ego_params = ego_params
        self.pm = pm_params
        self.verify = verify
        self.table = ActionTable(ego_params)
        self.action_sets = derive_action_sets(self.table, rule_params)
        self.dt = scenario.dt
        self._goal_poly = _goal_polygon(scenario)
        self._path_dir = None
        self._started = False
        self.done = False

    # -- lifecycle -----------------------------------------------------------

    def reset(self) -> StepResult:
        self.k = 0
        self.s_ego = self.scenario.ego_start
        self.control = (0.0, 0.0)
        self.done = False
        self.cause = None
        self._started = True
        goal = np.asarray(self.scenario.goal_center)
        start = self.s_ego.position
        span = goal - start
        self._path_dir = span / np.linalg.norm(span)
        self._path_origin = start
        self._prev_goal_dist = float(np.linalg.norm(goal - start))
        self._prev_sector = None
        self._prev_sector_dist = None
        self.supervisor = None
        if self.verify:
            self.supervisor = SafetySupervisor(
                self.scenario.ego_shape, self.scenario.obstacle_shape, self.rule,
                self.pm, self.ego_params, self.table, self.action_sets, self.dt)
        self.trace_rows: list = []
        mask = self._mask()
        obs = self._observation({n: False for n in FLAG_ORDER})
        info = {"rho": int(self.supervisor.state) if self.supervisor else None,
                "records": [], "events": []}
        self._append_trace(None, mask, None, [], [], None)
        return StepResult(obs, RewardBreakdown(), False, None, mask, info)

    # -- helpers ---------------------------------------------------------------

    def _mask(self) -> np.ndarray:
        if not self.verify:
            mask = np.zeros(len(self.table), dtype=bool)
            for a in self.table.regular_actions():
                mask[a.id] = True
            return mask
        return self.supervisor.safe_action_ids()

    def _obstacle(self, k: int) -> VesselState:
        return self.scenario.obstacle_state(k)

    def _collision(self, prev_ego: VesselState, control, new_ego: VesselState,
                   k_prev: int) -> bool:
        obs_a = self._obstacle(k_prev)
        obs_b = self._obstacle(k_prev + 1)
        gap = np.linalg.norm(prev_ego.position - obs_a.position)
        limit = (self.scenario.ego_shape.length + self.scenario.obstacle_shape.length
                 + (prev_ego.velocity + obs_a.velocity) * self.dt)
        if gap > limit:
            return False
        from .dynamics import ControlInput, ControlSequence

        seq = ControlSequence(((self.dt, ControlInput(*control)),))
        ego_states = simulate_dense(prev_ego, seq, self.ego_params)
        n = len(ego_states) - 1
        for i, es in enumerate(ego_states):
            lam = i / n
            op = (1 - lam) * obs_a.position + lam * obs_b.position
            hull_e = oriented_rectangle(self.scenario.ego_shape.length,
                                        self.scenario.ego_shape.width,
                                        es.position, es.orientation)
            hull_o = oriented_rectangle(self.scenario.obstacle_shape.length,
                                        self.scenario.obstacle_shape.width,
                                        op, obs_a.orientation)
            if intersects(hull_e, hull_o):
                return True
        return False

    def _flags(self, s_ego: VesselState, k: int, collided: bool) -> dict:
        area_min = np.asarray(self.scenario.area_min)
        area_max = np.asarray(self.scenario.area_max)
        outside = bool(np.any(s_ego.position < area_min) or np.any(s_ego.position > area_max))
        in_goal = self._goal_poly.contains_point(s_ego.position)
        goal_ok = in_goal and _orientation_gap_to_range(
            s_ego.orientation, self.scenario.goal_orientation,
            self.scenario.goal_orientation_tol) == 0.0
        return {
            "collision": collided,
            "area": outside,
            "stopped": s_ego.velocity <= 1e-9,
            "goal": bool(goal_ok),
            "time": k >= self.scenario.k_max,
        }

    def _cause(self, flags: dict) -> Optional[str]:
        for name in TERMINATION_ORDER:
            if flags[name]:
                return name
        return None

    def _sector_of(self, s_ego: VesselState, s_obs: VesselState) -> Optional[str]:
        if in_front_sector(s_ego, s_obs, self.rule):
            return "front"
        if in_left_sector(s_ego, s_obs, self.rule):
            return "left"
        if in_right_sector(s_ego, s_obs, self.rule):
            return "right"
        if in_behind_sector(s_ego, s_obs, self.rule):
            return "behind"
        return None

    def _observation(self, flags: dict) -> np.ndarray:
        s = self.s_ego
        goal = np.asarray(self.scenario.goal_center)
        d_goal = float(np.linalg.norm(goal - s.position))
        remaining = float(self.scenario.k_max - self.k)
        beta_goal = _orientation_gap_to_range(s.orientation,
                                              self.scenario.goal_orientation,
                                              self.scenario.goal_orientation_tol)
        rel = s.position - self._path_origin
        d_long = float(rel @ self._path_dir)
        d_lat = float(self._path_dir[0] * rel[1] - self._path_dir[1] * rel[0])
        far = float(min(abs(d_lat), abs(d_long)) > self.env.d_hull)

        obs_state = self._obstacle(self.k)
        dist = float(np.linalg.norm(obs_state.position - s.position))
        sector_vals = {n: [self.env.d_sense, 0.0, 0.0] for n in SECTOR_NAMES}
        current_sector = None
        if dist <= self.env.d_sense:
            current_sector = self._sector_of(s, obs_state)
            if current_sector is not None:
                rate = 0.0
                if self._prev_sector == current_sector and self._prev_sector_dist is not None:
                    rate = (dist - self._prev_sector_dist) / self.dt
                d = obs_state.position - s.position
                bearing = wrap_pi(np.arctan2(d[1], d[0]) - s.orientation)
                sector_vals[current_sector] = [dist, float(bearing), rate]
        self._prev_sector = current_sector
        self._prev_sector_dist = dist if current_sector is not None else None

        vec = [s.velocity, s.orientation, self.control[0], self.control[1],
               d_goal, remaining, beta_goal, d_long, d_lat, far]
        for name in SECTOR_NAMES:
            vec.extend(sector_vals[name])
        vec.extend(float(flags[n]) for n in FLAG_ORDER)
        out = np.asarray(vec, dtype=float)
        assert out.shape == (OBSERVATION_SIZE,)
        return out

    def _reward(self, flags: dict, used_emergency: bool, d_lat: float,
                prev_goal_dist: float, goal_dist: float) -> RewardBreakdown:
        e = self.env
        sparse = (e.c_time * flags["time"] + e.c_area * flags["area"]
                  + e.c_goal * flags["goal"] + e.c_stopped * flags["stopped"]
                  + e.c_collision * flags["collision"]
                  + e.c_emergency * float(used_emergency))
        s = self.s_ego
        obs_state = self._obstacle(self.k)
        d = obs_state.position - s.position
        dist = float(np.linalg.norm(d))
        d_obs = min(dist, e.d_sense)
        if dist <= e.d_sense and dist > 1e-9:
            radial = d / dist
            v_radial = float(obs_state.velocity_vector() @ radial)
            phi_deg = abs(np.degrees(wrap_pi(np.arctan2(d[1], d[0]) - s.orientation)))
        else:
            v_radial = 0.0
            phi_deg = 0.0
        colregs = (-e.colregs_alpha / (1.0 + np.exp(e.colregs_gamma_deg * phi_deg))
                   * np.exp(e.colregs_zeta_v * v_radial - e.colregs_zeta_d * d_obs))
        goal = e.c_reach * (prev_goal_dist - goal_dist)
        if s.velocity > e.v_high:
            velocity = e.c_v * (s.velocity - e.v_high)
        elif s.velocity < e.v_low:
            velocity = e.c_v * (e.v_low - s.velocity)
        else:
            velocity = 0.0
        deviate = e.c_deviate * min(abs(d_lat), e.d_hull)
        return RewardBreakdown(float(sparse), float(colregs), float(goal),
                               float(velocity), float(deviate))

    def _append_trace(self, action_id, mask, reward: Optional[RewardBreakdown],
                      records, events, cause):
        row = {
            "k": self.k,
            "t": self.k * self.dt,
            "ego": list(self.s_ego.as_tuple()),
            "obs": list(self._obstacle(self.k).as_tuple()),
            "action": action_id,
            "control": [self.control[0], self.control[1]],
            "mask": mask_to_hex(mask),
            "rho": int(self.supervisor.state) if self.supervisor else None,
            "reward": reward.to_dict() if reward else None,
            "events": events,
            "records": [[r.step, r.source, r.target, r.trigger] for r in records],
            "terminated": cause,
        }
        self.trace_rows.append(row)

    # -- stepping ---------------------------------------------------------------

    def step(self, action_id: int) -> StepResult:
        if not self._started:
            raise RuntimeError("reset() must be called before step()")
        if self.done:
            raise RuntimeError("episode finished; reset() required")
        mask = self._mask()
        if not mask[action_id]:
            raise MaskViolationError(
                f"action {action_id} is not in the safe action set at step {self.k}")
        action = self.table.by_id(action_id)
        if action.kind == "emergency":
            u = self.supervisor.emergency_control(self.s_ego, self._obstacle(self.k))
        else:
            u = self.table.control(action)
            if self.verify:
                self.supervisor.consume(action)
        prev_ego = self.s_ego
        prev_goal_dist = self._prev_goal_dist
        new_ego = step_dynamics(prev_ego, u, self.dt, self.ego_params)
        collided = self._collision(prev_ego, (u.accel, u.turn_rate), new_ego, self.k)
        self.k += 1
        self.s_ego = new_ego
        self.control = (u.accel, u.turn_rate)
        records, events = [], []
        if self.verify:
            records = self.supervisor.update(self.k, new_ego, self._obstacle(self.k))
            events = self.supervisor.drain_events()
        flags = self._flags(new_ego, self.k, collided)
        cause = self._cause(flags)
        goal_dist = float(np.linalg.norm(np.asarray(self.scenario.goal_center) - new_ego.position))
        rel = new_ego.position - self._path_origin
        d_lat = float(self._path_dir[0] * rel[1] - self._path_dir[1] * rel[0])
        reward = self._reward(flags, action.kind == "emergency", d_lat,
                              prev_goal_dist, goal_dist)
        self._prev_goal_dist = goal_dist
        obs = self._observation(flags)
        new_mask = self._mask()
        self.done = cause is not None
        self.cause = cause
        info = {"rho": int(self.supervisor.state) if self.supervisor else None,
                "records": records, "events": events}
        self._append_trace(action_id, new_mask, reward, records, events, cause)
        return StepResult(obs, reward, self.done, cause, new_mask, info)
