"""Legal-safety supervisor: the six-state statechart, its transition rules,
and the per-state safe action set."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import numpy as np

from .dynamics import ActionTable, EgoParams, VesselShape, VesselState
from .emergency import EmergencyController
from .predicates import (
    GIVE_WAY_KINDS,
    RuleParams,
    collision_possible,
    encounter_kind,
    first_persistent_kind,
    is_emergency,
    is_emergency_resolved,
    keep,
)
from .reachability import PointMassParams
from .synthesis import ActionSets, ManeuverCursor, SearchCounters, encounter_action_verification


class Rho(IntEnum):
    NO_CONFLICT = 0
    STAND_ON = 1
    HEAD_ON = 2
    CROSSING = 3
    OVERTAKE = 4
    EMERGENCY = 5


RHO_BY_KIND = {"head_on": Rho.HEAD_ON, "crossing": Rho.CROSSING, "overtake": Rho.OVERTAKE}
KIND_BY_RHO = {v: k for k, v in RHO_BY_KIND.items()}
NORMAL_OPERATION = (Rho.NO_CONFLICT, Rho.STAND_ON, Rho.HEAD_ON, Rho.CROSSING, Rho.OVERTAKE)

# Legal edges of the supervisor automaton (self-stays are implicit).
EDGES = frozenset(
    [(Rho.NO_CONFLICT, Rho.STAND_ON), (Rho.STAND_ON, Rho.NO_CONFLICT),
     (Rho.NO_CONFLICT, Rho.HEAD_ON), (Rho.HEAD_ON, Rho.NO_CONFLICT),
     (Rho.NO_CONFLICT, Rho.CROSSING), (Rho.CROSSING, Rho.NO_CONFLICT),
     (Rho.NO_CONFLICT, Rho.OVERTAKE), (Rho.OVERTAKE, Rho.NO_CONFLICT),
     (Rho.EMERGENCY, Rho.NO_CONFLICT)]
    + [(s, Rho.EMERGENCY) for s in NORMAL_OPERATION]
)


@dataclass(frozen=True)
class TransitionRecord:
    step: int
    source: int
    target: int
    trigger: str


class SafetySupervisor:
    """Per-episode statechart instance plus the maneuver and emergency context
    needed to produce the safe action set of the current state."""

    def __init__(self, shape_ego: VesselShape, shape_obs: VesselShape,
                 rule_params: RuleParams, pm: PointMassParams,
                 ego_params: EgoParams, table: ActionTable,
                 action_sets: ActionSets, dt: float = 10.0):
        self.shape_ego = shape_ego
        self.shape_obs = shape_obs
        self.params = rule_params
        self.pm = pm
        self.ego_params = ego_params
        self.table = table
        self.action_sets = action_sets
        self.dt = dt
        self.state = Rho.NO_CONFLICT
        self.cursor: Optional[ManeuverCursor] = None
        self.fallback = False
        self.committed = None  # (action, remaining steps of the segment)
        self.emergency: Optional[EmergencyController] = None
        self.counters = SearchCounters()
        self.events: list = []
        self._steps_per_segment = int(round(rule_params.t_m / dt))
        self._occ_cache: dict = {}

    # -- predicates bound to the episode context ---------------------------

    def _is_emergency(self, s_ego, s_obs) -> bool:
        return is_emergency(s_ego, s_obs, self.shape_ego, self.shape_obs,
                            self.params, self.pm, self.ego_params, dt=self.dt,
                            cache=self._occ_cache)

    def _cp(self, s_ego, s_obs) -> bool:
        return collision_possible(s_ego, s_obs, self.params.t_horizon_check,
                                  self.shape_obs.length, self.params)

    def _keep(self, s_ego, s_obs) -> bool:
        return keep(s_ego, s_obs, self.shape_ego, self.shape_obs, self.params)

    # -- state entry / exit bookkeeping -------------------------------------

    def _clear_encounter(self):
        self.cursor = None
        self.fallback = False
        self.committed = None

    def _enter_encounter(self, kind: str, s_ego, s_obs):
        safe, forest = encounter_action_verification(
            kind, s_ego, s_obs, self.action_sets, self.shape_ego, self.shape_obs,
            self.params, self.ego_params, self.table, self.dt, self.counters)
        if not safe:
            # Verification gap: keep course until the statechart resolves it.
            self.fallback = True
            self.cursor = None
            self.events.append({"event": "empty_tree", "kind": kind})
        else:
            self.fallback = False
            self.cursor = ManeuverCursor(safe, forest)
        self.committed = None

    def _fire(self, step: int, target: Rho, trigger: str, s_ego, s_obs,
              records: list):
        source = self.state
        if (source, target) not in EDGES:
            raise RuntimeError(f"illegal transition {source} -> {target}")
        if source in RHO_BY_KIND.values():
            self._clear_encounter()
        if source == Rho.EMERGENCY:
            self.events.append({"event": "emergency_exit"})
            self.emergency = None
        self.state = target
        if target in RHO_BY_KIND.values():
            self._enter_encounter(KIND_BY_RHO[target], s_ego, s_obs)
        if target == Rho.EMERGENCY:
            self.emergency = EmergencyController(s_ego, s_obs, self.shape_ego,
                                                 self.shape_obs, self.params,
                                                 self.pm, self.ego_params, self.dt)
            self.events.append({"event": "emergency_entry", "mode": self.emergency.mode})
        records.append(TransitionRecord(step, int(source), int(target), trigger))

    # -- the transition relation --------------------------------------------

    def update(self, step: int, s_ego: VesselState, s_obs: VesselState) -> list:
        """Evaluate the statechart for the new states. Cascaded re-evaluation
        after landing in the no-conflict state is capped at two hops."""
        records: list = []
        hops = 0
        while hops < 2:
            cur = self.state
            if cur != Rho.EMERGENCY:
                if self._is_emergency(s_ego, s_obs):
                    self._fire(step, Rho.EMERGENCY, "is_emergency", s_ego, s_obs, records)
                    break
            if cur == Rho.EMERGENCY:
                if is_emergency_resolved(s_ego, s_obs, self.ego_params.length, self.params):
                    self._fire(step, Rho.NO_CONFLICT, "is_emergency_resolved",
                               s_ego, s_obs, records)
                    hops += 1
                    continue
                break
            if cur in (Rho.HEAD_ON, Rho.CROSSING, Rho.OVERTAKE):
                if not self._cp(s_ego, s_obs):
                    self._fire(step, Rho.NO_CONFLICT, "not_collision_possible",
                               s_ego, s_obs, records)
                    hops += 1
                    continue
                break
            if cur == Rho.STAND_ON:
                if not self._keep(s_ego, s_obs):
                    self._fire(step, Rho.NO_CONFLICT, "not_keep", s_ego, s_obs, records)
                    hops += 1
                    continue
                break
            # no-conflict state
            if self._keep(s_ego, s_obs):
                self._fire(step, Rho.STAND_ON, "keep", s_ego, s_obs, records)
                break
            active = encounter_kind(s_ego, s_obs, self.shape_ego, self.shape_obs, self.params)
            if active in GIVE_WAY_KINDS:
                # An already-active encounter binds immediately (rule priority);
                # the anticipatory trigger below handles the usual case.
                self._fire(step, RHO_BY_KIND[active], active, s_ego, s_obs, records)
                break
            kind = first_persistent_kind(s_ego, s_obs, self.shape_ego,
                                         self.shape_obs, self.params,
                                         self.ego_params, self.dt)
            if kind is not None:
                self._fire(step, RHO_BY_KIND[kind], f"persistent_{kind}",
                           s_ego, s_obs, records)
            break
        return records

    # -- action interface ----------------------------------------------------

    def safe_action_ids(self) -> np.ndarray:
        """Boolean mask over the 49 discrete actions for the current state."""
        mask = np.zeros(len(self.table), dtype=bool)
        if self.state == Rho.NO_CONFLICT:
            for a in self.table.regular_actions():
                mask[a.id] = True
        elif self.state == Rho.STAND_ON:
            mask[self.table.keep.id] = True
        elif self.state == Rho.EMERGENCY:
            mask[self.table.emergency.id] = True
        else:
            if self.committed is not None:
                mask[self.committed[0].id] = True
            elif self.fallback or self.cursor is None or self.cursor.complete:
                mask[self.table.keep.id] = True
            else:
                opts = self.cursor.options()
                if not opts:
                    mask[self.table.keep.id] = True
                else:
                    for a in opts:
                        mask[a.id] = True
        return mask

    def consume(self, action):
        """Record the agent's choice: descends the maneuver tree and holds the
        chosen action for the remainder of its segment."""
        if self.state not in (Rho.HEAD_ON, Rho.CROSSING, Rho.OVERTAKE):
            return
        if self.fallback or self.cursor is None:
            return
        if self.committed is not None:
            act, left = self.committed
            if action.id != act.id:
                raise ValueError("segment commitment violated")
            left -= 1
            self.committed = (act, left) if left > 0 else None
            if self.committed is None and self.cursor.complete:
                self.events.append({"event": "maneuver_complete"})
            return
        if self.cursor.complete:
            return  # keep-course tail until the exit guard fires
        self.cursor.advance(action)
        if self._steps_per_segment > 1:
            self.committed = (action, self._steps_per_segment - 1)
        elif self.cursor.complete:
            self.events.append({"event": "maneuver_complete"})

    def emergency_control(self, s_ego, s_obs):
        if self.state != Rho.EMERGENCY or self.emergency is None:
            raise ValueError("emergency control requested outside the emergency state")
        mode_before = self.emergency.mode
        u = self.emergency.step_control(s_ego, s_obs)
        if self.emergency.mode != mode_before:
            self.events.append({"event": "emergency_mode_switch",
                                "from": mode_before, "to": self.emergency.mode})
        return u

    def drain_events(self) -> list:
        out = self.events
        self.events = []
        return out
