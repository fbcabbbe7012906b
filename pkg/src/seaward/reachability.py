"""Set-based occupancy prediction for the constrained point-mass abstraction
and for closed-loop trajectories of the ego model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ControlSequence, EgoParams, VesselShape, VesselState, simulate
from .geometry import (
    ConvexPolygon,
    disc_polygon,
    hull_of,
    minkowski_sum,
    oriented_rectangle,
    regular_polygon_circumscribed,
    rotated_shape_hull,
)


class ModelConformanceError(ValueError):
    """Initial state outside the abstract model's admissible envelope."""


@dataclass(frozen=True)
class PointMassParams:
    v_max: float = 10.0
    a_max: float = 0.045

    def __post_init__(self):
        if self.v_max <= 0 or self.a_max <= 0:
            raise ValueError("point-mass bounds must be positive")


@dataclass(frozen=True)
class ReachEntry:
    t_lo: float
    t_hi: float
    position: ConvexPolygon
    velocity_center: np.ndarray
    velocity_radius: float
    theta_lo: float
    theta_hi: float


@dataclass(frozen=True)
class ReachSet:
    entries: tuple


@dataclass(frozen=True)
class OccupancyEntry:
    t_lo: float
    t_hi: float
    region: ConvexPolygon


@dataclass(frozen=True)
class OccupancySet:
    entries: tuple

    def translated(self, offset) -> "OccupancySet":
        return OccupancySet(tuple(
            OccupancyEntry(e.t_lo, e.t_hi, e.region.translated(offset))
            for e in self.entries))

    def to_jsonable(self):
        return [
            {"t_lo": e.t_lo, "t_hi": e.t_hi, "vertices": e.region.vertices.tolist()}
            for e in self.entries
        ]


def _deviation_radius(t: float, v0: float, pm: PointMassParams) -> float:
    """Bound on |p(t) - (p0 + v0 t)|: quadratic growth capped once the speed
    deviation saturates at v_max + v0."""
    t_star = (pm.v_max + v0) / pm.a_max
    if t <= t_star:
        return 0.5 * pm.a_max * t * t
    return 0.5 * pm.a_max * t_star * t_star + (pm.v_max + v0) * (t - t_star)


def _orientation_halfwidth(t: float, v0: float, pm: PointMassParams) -> float:
    """Bound on the velocity-direction deviation after time t."""
    dev = pm.a_max * t
    if v0 <= 1e-9 or dev >= v0:
        return np.pi
    return float(np.arcsin(dev / v0))


def reach_pm(x0: VesselState, params: PointMassParams, t_pred: float, dt: float = 10.0) -> ReachSet:
    """Time-interval reachable sets of the constrained point-mass model."""
    if t_pred <= 0 or dt <= 0:
        raise ValueError("horizon and step must be positive")
    n = int(round(t_pred / dt))
    if abs(n * dt - t_pred) > 1e-9:
        raise ValueError("dt must divide t_pred")
    if x0.velocity > params.v_max + 1e-9:
        raise ModelConformanceError(
            f"initial speed {x0.velocity} exceeds point-mass cap {params.v_max}")
    p0 = x0.position
    v0 = x0.velocity_vector()
    speed0 = x0.velocity
    entries = []
    for k in range(n):
        t_lo, t_hi = k * dt, (k + 1) * dt
        poly = hull_of(
            disc_polygon(p0 + v0 * t_lo, _deviation_radius(t_lo, speed0, params)),
            disc_polygon(p0 + v0 * t_hi, _deviation_radius(t_hi, speed0, params)),
        )
        half = _orientation_halfwidth(t_hi, speed0, params)
        entries.append(ReachEntry(
            t_lo, t_hi, poly,
            velocity_center=v0,
            velocity_radius=min(params.a_max * t_hi, 2.0 * params.v_max),
            theta_lo=x0.orientation - half,
            theta_hi=x0.orientation + half,
        ))
    return ReachSet(tuple(entries))


def occupancy_pm(x0: VesselState, params: PointMassParams, t_pred: float,
                 shape: VesselShape, dt: float = 10.0) -> OccupancySet:
    """Position reachable sets enlarged by the hull over reachable orientations."""
    reach = reach_pm(x0, params, t_pred, dt)
    entries = []
    for e in reach.entries:
        shape_hull = rotated_shape_hull(shape.length, shape.width, e.theta_lo, e.theta_hi)
        entries.append(OccupancyEntry(e.t_lo, e.t_hi, minkowski_sum(e.position, shape_hull)))
    return OccupancySet(tuple(entries))


def _segment_bloat(u_accel: float, u_omega: float, v_hi: float, dt: float,
                   corner_radius: float) -> float:
    """Covers chord-vs-arc error of positions and hull-corner rotation within
    one interval bounded by the interval's constant control input."""
    perp = np.hypot(u_accel, v_hi * abs(u_omega))
    sagitta_pos = dt * dt / 8.0 * perp
    dtheta = abs(u_omega) * dt
    sagitta_rot = corner_radius * (1.0 - np.cos(min(np.pi, dtheta) / 2.0))
    return float(sagitta_pos + sagitta_rot)


def occupancy_traj(s0: VesselState, u: ControlSequence, t_pred: float,
                   shape: VesselShape, ego: EgoParams, dt: float = 10.0) -> OccupancySet:
    """Occupancy of the closed-loop trajectory under the control sequence u,
    one convex region per dt interval."""
    if u.duration + 1e-9 < t_pred:
        raise ValueError("control sequence must cover the prediction horizon")
    n = int(round(t_pred / dt))
    states = simulate(s0, u, ego, dt=dt)[: n + 1]
    corner_radius = 0.5 * float(np.hypot(shape.length, shape.width))
    entries = []
    for k in range(n):
        a, b = states[k], states[k + 1]
        hull = hull_of(
            oriented_rectangle(shape.length, shape.width, a.position, a.orientation).vertices,
            oriented_rectangle(shape.length, shape.width, b.position, b.orientation).vertices,
        )
        u_now = u.input_at(k * dt + 0.5 * dt)
        bloat = _segment_bloat(u_now.accel, u_now.turn_rate,
                               max(a.velocity, b.velocity), dt, corner_radius)
        if bloat > 1e-9:
            hull = minkowski_sum(hull, regular_polygon_circumscribed(bloat, 8))
        entries.append(OccupancyEntry(k * dt, (k + 1) * dt, hull))
    return OccupancySet(tuple(entries))


def occupancies_intersect(a: OccupancySet, b: OccupancySet, window=None) -> bool:
    """True iff some pair of time-overlapping entries has intersecting regions."""
    from .geometry import intersects

    lo = -np.inf if window is None else window[0]
    hi = np.inf if window is None else window[1]
    for ea in a.entries:
        if ea.t_hi < lo or ea.t_lo > hi:
            continue
        ca, ra = ea.region.bounding_center, ea.region.bounding_radius
        for eb in b.entries:
            if eb.t_hi < ea.t_lo or eb.t_lo > ea.t_hi or eb.t_hi < lo or eb.t_lo > hi:
                continue
            if np.linalg.norm(ca - eb.region.bounding_center) > ra + eb.region.bounding_radius:
                continue
            if intersects(ea.region, eb.region):
                return True
    return False
