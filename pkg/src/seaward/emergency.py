"""Last-minute collision avoidance: mode classification, turning-direction
choice, target construction and the tracking control loop."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ControlInput, EgoParams, VesselShape, VesselState
from .geometry import wrap_pi
from .predicates import RuleParams, in_sector, is_emergency, orientation_delta, u_acc_sequence
from .reachability import PointMassParams

MODE_BASE = "base"
MODE_AHEAD = "ahead"
MODE_STERN = "stern"


@dataclass(frozen=True)
class TrackingTarget:
    position: np.ndarray
    speed: float


@dataclass(frozen=True)
class TrackingGains:
    k_omega: float = 0.05
    k_accel: float = 0.02
    align_threshold: float = np.radians(10.0)


def classify_mode(s_ego: VesselState, s_obs: VesselState, shape_ego: VesselShape,
                  shape_obs: VesselShape, params: RuleParams, pm: PointMassParams,
                  ego_params: EgoParams, in_emergency: bool, dt: float = 10.0) -> str:
    """Ahead: near-reciprocal obstacle in the bow sector. Stern: obstacle in the
    shifted stern half-plane and accelerating away provably clears it. Base
    otherwise. Ahead takes precedence over stern."""
    if not in_emergency:
        raise ValueError("emergency mode is only defined in the emergency state")
    ahead = (not orientation_delta(s_ego, s_obs, params.delta_ahead, np.pi)
             and in_sector(s_ego, s_obs, -params.delta_ahead, params.delta_ahead))
    if ahead:
        return MODE_AHEAD
    stern_sector = in_sector(s_ego, s_obs, 1.5 * np.pi + params.delta_stern,
                             0.5 * np.pi + params.delta_stern)
    if stern_sector and not is_emergency(s_ego, s_obs, shape_ego, shape_obs,
                                         params, pm, ego_params,
                                         u_ego=u_acc_sequence(params, ego_params), dt=dt):
        return MODE_STERN
    return MODE_BASE


def turning_direction(s_ego: VesselState, s_obs: VesselState) -> str:
    """Pick the 90-degree turn that moves the ego away from the obstacle's
    projected track; dead-on geometry defaults to starboard."""
    e_obs = s_obs.heading_vector()
    rel = s_ego.position - s_obs.position
    side = e_obs[0] * rel[1] - e_obs[1] * rel[0]  # >0: ego left of the track
    if abs(side) < 1e-9:
        return "right"
    e_ego = s_ego.heading_vector()
    d_right = np.array([e_ego[1], -e_ego[0]])
    track_normal = np.array([-e_obs[1], e_obs[0]])
    away = np.sign(side) * track_normal
    return "right" if float(d_right @ away) >= 0.0 else "left"


def get_target_ahead(entry_ego: VesselState, entry_obs: VesselState, direction: str,
                     shape_obs: VesselShape, params: RuleParams) -> TrackingTarget:
    """Point reached by turning 90 degrees off the entry heading, at the
    minimum clearing distance."""
    sign = -1.0 if direction == "right" else 1.0
    ang = entry_ego.orientation + sign * 0.5 * np.pi
    pos = entry_ego.position + params.d_min_ahead(shape_obs.length) * np.array(
        [np.cos(ang), np.sin(ang)])
    return TrackingTarget(pos, params.v_desired)


def get_target_base(s_ego: VesselState, s_obs: VesselState, l_ego: float,
                    params: RuleParams) -> TrackingTarget:
    """Point astern of the live obstacle along its reversed heading."""
    pos = s_obs.position - params.d_resolved(l_ego) * s_obs.heading_vector()
    return TrackingTarget(pos, params.v_desired)


def tracking_controller(s_ego: VesselState, target: TrackingTarget,
                        ego_params: EgoParams,
                        gains: TrackingGains = TrackingGains()) -> ControlInput:
    """Proportional heading/speed law toward the target, saturated at the
    actuator bounds; the same law serves the align and transit phases."""
    to_target = target.position - s_ego.position
    desired = np.arctan2(to_target[1], to_target[0])
    err = wrap_pi(desired - s_ego.orientation)
    omega = float(np.clip(gains.k_omega * err, -ego_params.omega_max, ego_params.omega_max))
    accel = float(np.clip(gains.k_accel * (target.speed - s_ego.velocity),
                          -ego_params.a_max, ego_params.a_max))
    return ControlInput(accel, omega)


class EmergencyController:
    """Per-episode controller active while the supervisor is in the emergency
    state. The mode is fixed at entry except for the ahead-to-base switch once
    the ego has traveled past the clearing distance without resolution."""

    def __init__(self, s_ego: VesselState, s_obs: VesselState, shape_ego: VesselShape,
                 shape_obs: VesselShape, params: RuleParams, pm: PointMassParams,
                 ego_params: EgoParams, dt: float = 10.0,
                 gains: TrackingGains = TrackingGains()):
        self.params = params
        self.ego_params = ego_params
        self.shape_obs = shape_obs
        self.dt = dt
        self.gains = gains
        self.entry_ego = s_ego
        self.entry_obs = s_obs
        self.elapsed = 0.0
        self.mode = classify_mode(s_ego, s_obs, shape_ego, shape_obs, params, pm,
                                  ego_params, in_emergency=True, dt=dt)
        self.switched = False
        if self.mode == MODE_AHEAD:
            direction = turning_direction(s_ego, s_obs)
            self.direction = direction
            self.ahead_target = get_target_ahead(s_ego, s_obs, direction, shape_obs, params)
        else:
            self.direction = None
            self.ahead_target = None

    def step_control(self, s_ego: VesselState, s_obs: VesselState) -> ControlInput:
        """One controller evaluation; the supervisor owns loop termination."""
        traveled = float(np.linalg.norm(s_ego.position - self.entry_ego.position))
        if self.mode == MODE_AHEAD and traveled > self.params.d_min_ahead(self.shape_obs.length):
            self.mode = MODE_BASE
            self.switched = True
        if self.mode == MODE_STERN:
            if self.elapsed < self.params.t_react - 1e-9:
                u = ControlInput(self.params.a_stern_factor * self.ego_params.a_max, 0.0)
            else:
                u = ControlInput(0.0, 0.0)
        elif self.mode == MODE_AHEAD:
            u = tracking_controller(s_ego, self.ahead_target, self.ego_params, self.gains)
        else:
            target = get_target_base(s_ego, s_obs, self.ego_params.length, self.params)
            u = tracking_controller(s_ego, target, self.ego_params, self.gains)
        self.elapsed += self.dt
        return u
