"""Offline rule-compliance monitoring over completed episode traces.

Bounded-horizon metric-temporal evaluation on the step grid. Rule obligations
are anchored at encounter instances; the rulebook priority exempts steps where
the emergency rule governs. Windows cut short by the episode end are reported
as inconclusive instead of violations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import ActionTable, EgoParams, VesselShape, VesselState
from .geometry import intersects, oriented_rectangle
from .predicates import (
    GIVE_WAY_KINDS,
    RuleParams,
    TrajectoryTrace,
    change_course,
    collision_possible,
    encounter_kind,
    is_emergency,
    is_emergency_resolved,
    keep,
    persistent_encounter,
    turning_to_starboard,
    _prediction_grid,
)
from .reachability import PointMassParams


def window_steps(anchor: int, lo: float, hi: float, dt: float, n_steps: int):
    """Grid steps j with lo <= (j - anchor) * dt <= hi, clipped to the trace."""
    first = anchor + int(np.ceil(lo / dt - 1e-9))
    last = anchor + int(np.floor(hi / dt + 1e-9))
    return range(max(first, 0), min(last, n_steps - 1) + 1), last <= n_steps - 1


@dataclass
class ViolationReport:
    episode_id: str = ""
    steps: int = 0
    cause: str | None = None
    stand_on_violation_steps: int = 0
    give_way_violations: dict = field(default_factory=dict)
    give_way_instances: dict = field(default_factory=dict)
    inconclusive: int = 0
    emergency_preempted: int = 0
    emergency_breach: bool = False
    emergency_breach_steps: int = 0
    emergency_pending: bool = False
    collision: bool = False
    emergency_action_steps: int = 0
    timeline: list = field(default_factory=list)

    @property
    def total_violations(self) -> int:
        return self.stand_on_violation_steps + sum(self.give_way_violations.values())

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "steps": self.steps,
            "cause": self.cause,
            "stand_on_violation_steps": self.stand_on_violation_steps,
            "give_way_violations": dict(self.give_way_violations),
            "give_way_instances": dict(self.give_way_instances),
            "total_violations": self.total_violations,
            "inconclusive": self.inconclusive,
            "emergency_preempted": self.emergency_preempted,
            "emergency_breach": self.emergency_breach,
            "emergency_breach_steps": self.emergency_breach_steps,
            "emergency_pending": self.emergency_pending,
            "collision": self.collision,
            "emergency_action_steps": self.emergency_action_steps,
        }


@dataclass
class _Parsed:
    dt: float
    ego: list
    obs: list
    actions: list  # action taken from state k (None at the last state)
    turn_rates: list
    cause: str | None
    episode_id: str


def parse_trace(rows, episode_id: str = "") -> _Parsed:
    if not rows:
        raise ValueError("empty trace")
    dt = rows[1]["t"] - rows[0]["t"] if len(rows) > 1 else 10.0
    ego = [VesselState(*r["ego"]) for r in rows]
    obs = [VesselState(*r["obs"]) for r in rows]
    actions = [rows[k + 1]["action"] for k in range(len(rows) - 1)] + [None]
    rates = [rows[k + 1]["control"][1] for k in range(len(rows) - 1)]
    cause = rows[-1].get("terminated")
    return _Parsed(dt, ego, obs, actions, rates, cause, episode_id)


def monitor_episode(rows, rule: RuleParams, pm: PointMassParams,
                    ego_params: EgoParams, shape_ego: VesselShape,
                    shape_obs: VesselShape, episode_id: str = "",
                    with_timeline: bool = True) -> ViolationReport:
    data = parse_trace(rows, episode_id)
    n = len(data.ego)
    dt = data.dt
    table = ActionTable(ego_params)
    em_id = table.emergency.id
    cache: dict = {}

    trace = TrajectoryTrace(dt=dt, states=data.ego, turn_rates=data.turn_rates)

    kinds, keeps, cps, ems, resolveds = [], [], [], [], []
    persistent = {k: [] for k in GIVE_WAY_KINDS}
    for k in range(n):
        e, o = data.ego[k], data.obs[k]
        kinds.append(encounter_kind(e, o, shape_ego, shape_obs, rule))
        keeps.append(keep(e, o, shape_ego, shape_obs, rule))
        cps.append(collision_possible(e, o, rule.t_horizon_check, shape_obs.length, rule))
        ems.append(is_emergency(e, o, shape_ego, shape_obs, rule, pm, ego_params,
                                dt=dt, cache=cache))
        resolveds.append(is_emergency_resolved(e, o, ego_params.length, rule))
        grid = _prediction_grid(e, o, rule, dt)
        for kind in GIVE_WAY_KINDS:
            persistent[kind].append(
                persistent_encounter(kind, e, o, shape_ego, shape_obs, rule,
                                     ego_params, dt, grid=grid))

    report = ViolationReport(episode_id=episode_id, steps=n - 1, cause=data.cause)
    report.give_way_violations = {k: 0 for k in GIVE_WAY_KINDS}
    report.give_way_instances = {k: 0 for k in GIVE_WAY_KINDS}
    report.emergency_action_steps = sum(1 for a in data.actions if a == em_id)

    # Give-way rules first: one instance per maximal true-interval of the
    # encounter predicate, obligations anchored at activation.
    horizon_steps = int(round(rule.t_max_m / dt))
    giveway_cover = np.zeros(n, dtype=bool)  # steps governed by an open give-way obligation
    for kind in GIVE_WAY_KINDS:
        needs_starboard = kind in ("head_on", "crossing")
        open_until = -1
        for k0 in range(n):
            if kinds[k0] != kind or (k0 > 0 and kinds[k0 - 1] == kind) or k0 <= open_until:
                continue
            report.give_way_instances[kind] += 1
            open_until = k0 + horizon_steps
            # the obligation governs lower-priority rules while the collision
            # course persists (rulebook priority, maneuvering lock-in)
            j = k0
            while j < n and j <= k0 + horizon_steps and cps[j]:
                giveway_cover[j] = True
                j += 1
            w_turn, complete_turn = window_steps(
                k0, 0.0, rule.t_react + rule.t_maneuver, dt, n)
            w_clear, complete_clear = window_steps(
                k0, rule.t_react, rule.t_react + 2 * rule.t_maneuver, dt, n)
            if not (complete_turn and complete_clear):
                report.inconclusive += 1
                continue
            if any(ems[j] for j in range(k0, min(k0 + horizon_steps, n - 1) + 1)):
                report.emergency_preempted += 1
                continue
            ok_turn = any(
                change_course(trace, k0, rule.delta_large_turn, end_index=j)
                and (not needs_starboard or turning_to_starboard(trace, k0, end_index=j))
                for j in w_turn)
            ok_clear = any(not cps[j] for j in w_clear)
            if not (ok_turn and ok_clear):
                report.give_way_violations[kind] += 1

    # Stand-on rule: per offending step within each keep interval; steps where
    # a higher-priority rule governs (emergency, open give-way maneuver) are
    # exempt per the rulebook order.
    k = 0
    while k < n:
        if keeps[k]:
            start = k
            while k < n and keeps[k]:
                if (not ems[k] and not giveway_cover[k] and k > start
                        and change_course(trace, start, rule.delta_no_turn, end_index=k)):
                    report.stand_on_violation_steps += 1
                k += 1
        else:
            k += 1

    # emergency rule: the emergency action must hold from detection to resolution
    k = 0
    while k < n:
        if ems[k]:
            start = k
            res = next((j for j in range(start, n) if resolveds[j]), None)
            end = res if res is not None else n - 1
            for j in range(start, end):
                if data.actions[j] is not None and data.actions[j] != em_id:
                    report.emergency_breach = True
                    report.emergency_breach_steps += 1
            if res is None and not report.emergency_breach:
                report.emergency_pending = True
            k = end + 1
        else:
            k += 1

    # collision: recompute hull overlap at trace states, plus the episode cause
    report.collision = data.cause == "collision"
    if not report.collision:
        for k in range(n):
            e, o = data.ego[k], data.obs[k]
            if np.linalg.norm(e.position - o.position) > shape_ego.length + shape_obs.length:
                continue
            he = oriented_rectangle(shape_ego.length, shape_ego.width, e.position, e.orientation)
            ho = oriented_rectangle(shape_obs.length, shape_obs.width, o.position, o.orientation)
            if intersects(he, ho):
                report.collision = True
                break

    if with_timeline:
        for k in range(n):
            report.timeline.append({
                "k": k,
                "kind": kinds[k],
                "keep": keeps[k],
                "collision_possible": cps[k],
                "is_emergency": ems[k],
                "resolved": resolveds[k],
                "persistent": {kd: persistent[kd][k] for kd in GIVE_WAY_KINDS},
            })
    return report


def aggregate(reports: list, causes: list | None = None) -> dict:
    """Batch means in the shape of the deployment results table."""
    if not reports:
        raise ValueError("no reports to aggregate")
    n = len(reports)
    causes = causes if causes is not None else [r.cause for r in reports]
    goal = sum(1 for c in causes if c == "goal") / n
    collided = sum(1 for r in reports if r.collision) / n
    violations = sum(r.total_violations for r in reports)
    mean_violations = violations / n
    em_frac = float(np.mean([r.emergency_action_steps / r.steps if r.steps else 0.0
                             for r in reports]))
    mean_len = float(np.mean([r.steps for r in reports]))
    return {
        "episodes": n,
        "goal_reach_rate": goal,
        "collision_rate": collided,
        "rule_violations_total": violations,
        "rule_violations_mean": mean_violations,
        "emergency_step_fraction": em_frac,
        "mean_episode_steps": mean_len,
        "emergency_breaches": sum(1 for r in reports if r.emergency_breach),
        "inconclusive_total": sum(r.inconclusive for r in reports),
        "emergency_preempted_total": sum(r.emergency_preempted for r in reports),
    }
