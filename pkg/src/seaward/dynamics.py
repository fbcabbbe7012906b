"""Ego vessel yaw-constrained dynamics, discrete action table, forward simulation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .geometry import normalize_angle

INTEGRATION_STEP = 1.0  # s, internal RK4 substep


@dataclass(frozen=True)
class VesselShape:
    length: float = 175.0
    width: float = 30.0

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise ValueError("vessel shape dimensions must be positive")


@dataclass(frozen=True)
class VesselState:
    """Planar pose plus orientation-aligned speed."""

    x: float
    y: float
    orientation: float
    velocity: float

    def __post_init__(self):
        object.__setattr__(self, "orientation", normalize_angle(self.orientation))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def heading_vector(self) -> np.ndarray:
        return np.array([np.cos(self.orientation), np.sin(self.orientation)])

    def velocity_vector(self) -> np.ndarray:
        return self.velocity * self.heading_vector()

    def as_tuple(self):
        return (self.x, self.y, self.orientation, self.velocity)


@dataclass(frozen=True)
class ControlInput:
    accel: float = 0.0
    turn_rate: float = 0.0


@dataclass(frozen=True)
class ControlSequence:
    """Piecewise-constant control: ordered (duration, input) segments."""

    segments: tuple

    def __post_init__(self):
        segs = tuple((float(d), u) for d, u in self.segments)
        for d, _ in segs:
            if d <= 0 or abs(d / INTEGRATION_STEP - round(d / INTEGRATION_STEP)) > 1e-9:
                raise ValueError("segment durations must be positive multiples of the integration step")
        object.__setattr__(self, "segments", segs)

    @property
    def duration(self) -> float:
        return sum(d for d, _ in self.segments)

    def input_at(self, t: float) -> ControlInput:
        """Input active at time t; piecewise-constant, right-open segments."""
        acc = 0.0
        for d, u in self.segments:
            if t < acc + d - 1e-9:
                return u
            acc += d
        return self.segments[-1][1]


def u_keep(duration: float) -> ControlSequence:
    return ControlSequence(((duration, ControlInput(0.0, 0.0)),))


@dataclass(frozen=True)
class EgoParams:
    length: float = 175.0
    width: float = 30.0
    a_max: float = 0.24
    omega_max: float = 0.03
    v_max: float = 9.5
    # Rate grids for the regular action set. The printed turn-rate grid in the
    # source material is irregular; the symmetric reading +-0.006 is used here.
    accels: tuple = (-0.048, -0.032, -0.016, 0.0, 0.016, 0.032, 0.048)
    turn_rates: tuple = (-0.018, -0.012, -0.006, 0.0, 0.006, 0.012, 0.018)

    def __post_init__(self):
        if len(self.accels) != 7 or len(self.turn_rates) != 7:
            raise ValueError("expected 7 accelerations and 7 turn rates")
        for grid in (self.accels, self.turn_rates):
            arr = np.asarray(grid)
            if not np.allclose(arr, -arr[::-1]):
                raise ValueError("action grids must be symmetric about zero")

    @property
    def shape(self) -> VesselShape:
        return VesselShape(self.length, self.width)


@dataclass(frozen=True)
class Action:
    id: int
    kind: str  # "regular" | "emergency"
    accel_index: int = -1
    turn_index: int = -1


class ActionTable:
    """49 discrete actions: 48 regular (accel x turn-rate) plus one emergency.

    A full 7x7 grid has 49 combinations; to keep the published 48+1 split, the
    gentlest-starboard/strongest-deceleration combination is left out.
    """

    DROPPED_COMBO = (0, 2)  # (accel index -0.048, turn index -0.006)

    def __init__(self, params: EgoParams):
        self.params = params
        self.actions: list[Action] = []
        self._by_combo: dict[tuple, Action] = {}
        i = 0
        for ia in range(7):
            for iw in range(7):
                if (ia, iw) == self.DROPPED_COMBO:
                    continue
                a = Action(i, "regular", ia, iw)
                self.actions.append(a)
                self._by_combo[(ia, iw)] = a
                i += 1
        self.emergency = Action(i, "emergency")
        self.actions.append(self.emergency)
        self.keep = self._by_combo[(3, 3)]

    def __len__(self):
        return len(self.actions)

    @property
    def n_regular(self) -> int:
        return len(self.actions) - 1

    def by_id(self, action_id: int) -> Action:
        if action_id < 0 or action_id >= len(self.actions):
            raise ValueError(f"action id {action_id} out of range")
        return self.actions[action_id]

    def by_combo(self, accel_index: int, turn_index: int) -> Action:
        return self._by_combo[(accel_index, turn_index)]

    def control(self, action: Action) -> ControlInput:
        if action.kind != "regular":
            raise ValueError("emergency action has no fixed control input")
        return ControlInput(self.params.accels[action.accel_index],
                            self.params.turn_rates[action.turn_index])

    def regular_actions(self) -> list[Action]:
        return self.actions[:-1]


def _rk4_substep(x, y, th, v, accel, omega, h):
    def f(th_, v_):
        return np.cos(th_) * v_, np.sin(th_) * v_, omega, accel

    k1 = f(th, v)
    k2 = f(th + 0.5 * h * k1[2], v + 0.5 * h * k1[3])
    k3 = f(th + 0.5 * h * k2[2], v + 0.5 * h * k2[3])
    k4 = f(th + h * k3[2], v + h * k3[3])
    x += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    y += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    th += h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    v += h / 6.0 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
    return x, y, th, v


def step_dynamics(state: VesselState, u: ControlInput, dt: float, params: EgoParams) -> VesselState:
    """Advance the yaw-constrained model by dt with speed saturated to [0, v_max]."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = dt / INTEGRATION_STEP
    if abs(n - round(n)) > 1e-9:
        raise ValueError("dt must be a multiple of the integration step")
    if abs(u.accel) > params.a_max + 1e-12 or abs(u.turn_rate) > params.omega_max + 1e-12:
        raise ValueError("control input exceeds actuator bounds")
    x, y, th, v = state.x, state.y, state.orientation, state.velocity
    for _ in range(int(round(n))):
        x, y, th, v = _rk4_substep(x, y, th, v, u.accel, u.turn_rate, INTEGRATION_STEP)
        v = min(max(v, 0.0), params.v_max)
    return VesselState(x, y, normalize_angle(th), v)


def simulate(state: VesselState, u: ControlSequence, params: EgoParams,
             dt: float = 10.0) -> list[VesselState]:
    """States on the dt grid over the sequence duration, initial state included."""
    total = u.duration
    n = int(round(total / dt))
    if abs(n * dt - total) > 1e-9:
        raise ValueError("control sequence duration must align with the output grid")
    states = [state]
    t = 0.0
    for _ in range(n):
        # One grid step never straddles a segment boundary in practice; if it
        # does, integrate each constant piece separately.
        remaining = dt
        s = states[-1]
        while remaining > 1e-9:
            u_now = u.input_at(t)
            t_next = _next_switch(u, t)
            chunk = min(remaining, t_next - t) if t_next is not None else remaining
            s = step_dynamics(s, u_now, chunk, params)
            t += chunk
            remaining -= chunk
        states.append(s)
    return states


def _next_switch(u: ControlSequence, t: float):
    acc = 0.0
    for d, _ in u.segments:
        acc += d
        if acc > t + 1e-9:
            return acc
    return None


def simulate_dense(state: VesselState, u: ControlSequence, params: EgoParams,
                   h: float = INTEGRATION_STEP) -> list[VesselState]:
    """States on an h grid; consistent with simulate() at shared grid points."""
    return simulate(state, u, params, dt=h)


def a2u(actions: Sequence[Action], t_m: float, table: ActionTable) -> ControlSequence:
    """Concatenate one t_m segment per regular action, in order."""
    if not actions:
        raise ValueError("empty action sequence")
    segs = []
    for a in actions:
        if a.kind != "regular":
            raise ValueError("only regular actions form maneuver segments")
        segs.append((t_m, table.control(a)))
    return ControlSequence(tuple(segs))
