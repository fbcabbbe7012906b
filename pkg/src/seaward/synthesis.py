"""Rule-compliant give-way maneuver synthesis: candidate turn actions, the
maneuver verification predicate, and the pruned breadth-first search tree."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .dynamics import (
    Action,
    ActionTable,
    ControlSequence,
    EgoParams,
    VesselShape,
    VesselState,
    a2u,
    simulate,
    u_keep,
)
from .geometry import intersects, wrap_pi
from .predicates import RuleParams, collision_possible
from .reachability import OccupancyEntry, OccupancySet, occupancy_traj


@dataclass(frozen=True)
class ActionSets:
    """Candidate turn actions per side plus the keep/accelerate extensions."""

    turn_right: tuple
    turn_left: tuple
    accelerate: tuple
    keep: Action


def derive_action_sets(table: ActionTable, params: RuleParams) -> ActionSets:
    """Candidates must change the heading by at least delta_large_turn within
    one segment; starboard turns carry negative turn rate."""
    right, left, acc = [], [], []
    for a in table.regular_actions():
        u = table.control(a)
        if abs(u.turn_rate) * params.t_m >= params.delta_large_turn - 1e-12:
            (right if u.turn_rate < 0 else left).append(a)
        if u.turn_rate == 0.0 and u.accel >= 0.0:
            acc.append(a)
    if not right or not left or not acc:
        raise ValueError("action grid yields no maneuver candidates")
    return ActionSets(tuple(right), tuple(left), tuple(acc), table.keep)


@dataclass
class SearchCounters:
    branching_expansions: int = 0
    nodes_created: int = 0
    verification_checks: int = 0


@dataclass(frozen=True)
class ManeuverTree:
    """Verified paths (root candidate first) of equal depth, plus ancestors."""

    root: Action
    paths: tuple  # tuple of tuples of Action

    @property
    def depth(self) -> int:
        return len(self.paths[0]) if self.paths else 0

    def children(self, prefix: tuple) -> list:
        """Next actions available after the given action prefix."""
        pref_ids = tuple(a.id for a in prefix)
        out, seen = [], set()
        for path in self.paths:
            ids = tuple(a.id for a in path)
            if len(ids) > len(pref_ids) and ids[: len(pref_ids)] == pref_ids:
                nxt = path[len(pref_ids)]
                if nxt.id not in seen:
                    seen.add(nxt.id)
                    out.append(nxt)
        return out

    def is_complete(self, prefix: tuple) -> bool:
        return len(prefix) >= self.depth

    def to_jsonable(self):
        return {
            "root": self.root.id,
            "paths": [[a.id for a in p] for p in self.paths],
        }


def inflated_obstacle_shape(shape_obs: VesselShape, params: RuleParams) -> VesselShape:
    pad = params.d_obs_safety(shape_obs.length)
    return VesselShape(shape_obs.length + pad, shape_obs.width + pad)


def _keep_course_params(ego_params: EgoParams, speed: float) -> EgoParams:
    # Obstacle predictions must not be clipped by the ego's speed limit.
    if speed > ego_params.v_max:
        return replace(ego_params, v_max=speed)
    return ego_params


def obstacle_keep_occupancy(s_obs: VesselState, shape_obs: VesselShape,
                            params: RuleParams, ego_params: EgoParams,
                            dt: float = 10.0, horizon: Optional[float] = None,
                            inflate: bool = True) -> OccupancySet:
    shape = inflated_obstacle_shape(shape_obs, params) if inflate else shape_obs
    t_end = params.t_max_m if horizon is None else horizon
    dyn = _keep_course_params(ego_params, s_obs.velocity)
    return occupancy_traj(s_obs, u_keep(t_end), t_end, shape, dyn, dt)


def predict_keep_course(s: VesselState, t: float) -> VesselState:
    """Constant course and speed propagation."""
    return VesselState(s.x + s.velocity * np.cos(s.orientation) * t,
                       s.y + s.velocity * np.sin(s.orientation) * t,
                       s.orientation, s.velocity)


def maneuver_verified(u_m: ControlSequence, s_ego: VesselState, s_obs: VesselState,
                      shape_ego: VesselShape, shape_obs: VesselShape,
                      params: RuleParams, ego_params: EgoParams,
                      dt: float = 10.0) -> bool:
    """A maneuver is verified when the ego and safety-inflated obstacle
    occupancies stay disjoint over its whole duration and no collision is
    possible at its final state."""
    t_end = u_m.duration
    if t_end > params.t_max_m + 1e-9:
        raise ValueError("maneuver exceeds the maneuver horizon")
    occ_ego = occupancy_traj(s_ego, u_m, t_end, shape_ego, ego_params, dt)
    occ_obs = obstacle_keep_occupancy(s_obs, shape_obs, params, ego_params, dt, horizon=t_end)
    from .reachability import occupancies_intersect

    if occupancies_intersect(occ_ego, occ_obs, (0.0, t_end)):
        return False
    ego_end = simulate(s_ego, u_m, ego_params, dt)[-1]
    obs_end = predict_keep_course(s_obs, t_end)
    return not collision_possible(ego_end, obs_end, params.t_horizon_check,
                                  shape_obs.length, params)


@dataclass
class _Node:
    path: tuple
    end_state: VesselState
    clean: bool  # occupancy disjoint from the obstacle so far


class _TreeBuilder:
    def __init__(self, s_ego, s_obs, shape_ego, shape_obs, params, ego_params,
                 table, dt, counters):
        self.s_ego = s_ego
        self.s_obs = s_obs
        self.shape_ego = shape_ego
        self.shape_obs = shape_obs
        self.params = params
        self.ego_params = ego_params
        self.table = table
        self.dt = dt
        self.counters = counters
        self.obs_occ = obstacle_keep_occupancy(s_obs, shape_obs, params, ego_params, dt)
        self.n_segments = int(round(params.t_max_m / params.t_m))

    def _segment_clean(self, start_state: VesselState, action: Action, depth: int) -> tuple:
        """Extend by one segment; returns (end_state, still_disjoint)."""
        seg = a2u([action], self.params.t_m, self.table)
        occ = occupancy_traj(start_state, seg, self.params.t_m, self.shape_ego,
                             self.ego_params, self.dt)
        t0 = (depth - 1) * self.params.t_m
        clean = True
        for e in occ.entries:
            shifted = OccupancyEntry(e.t_lo + t0, e.t_hi + t0, e.region)
            for oe in self.obs_occ.entries:
                if oe.t_hi < shifted.t_lo or oe.t_lo > shifted.t_hi:
                    continue
                c = shifted.region.bounding_center - oe.region.bounding_center
                if np.linalg.norm(c) > shifted.region.bounding_radius + oe.region.bounding_radius:
                    continue
                if intersects(shifted.region, oe.region):
                    clean = False
                    break
            if not clean:
                break
        end = simulate(start_state, seg, self.ego_params, self.dt)[-1]
        return end, clean

    def _verified(self, node: _Node, depth: int) -> bool:
        self.counters.verification_checks += 1
        if not node.clean:
            return False
        obs_end = predict_keep_course(self.s_obs, depth * self.params.t_m)
        return not collision_possible(node.end_state, obs_end,
                                      self.params.t_horizon_check,
                                      self.shape_obs.length, self.params)

    def build(self, candidate: Action, acc_actions: tuple) -> Optional[ManeuverTree]:
        end, clean = self._segment_clean(self.s_ego, candidate, 1)
        self.counters.nodes_created += 1
        root = _Node((candidate,), end, clean)
        if self._verified(root, 1):
            return ManeuverTree(candidate, ((candidate,),))
        frontier = [root]
        depth = 1
        while True:
            if depth >= self.n_segments:
                return None
            depth += 1
            new_frontier = []
            for node in frontier:
                if node.path[-1].id == candidate.id:
                    children = (candidate,) + acc_actions
                    self.counters.branching_expansions += 1
                else:
                    children = (node.path[-1],)
                for child in children:
                    if node.clean:
                        end, clean = self._segment_clean(node.end_state, child, depth)
                    else:
                        # dead prefix: occupancy already collides, keep the node
                        # only so the expansion schedule matches the algorithm
                        end, clean = node.end_state, False
                    self.counters.nodes_created += 1
                    new_frontier.append(_Node(node.path + (child,), end, clean))
            frontier = new_frontier
            verified = [n for n in frontier if self._verified(n, depth)]
            if verified:
                return ManeuverTree(candidate, tuple(n.path for n in verified))


def st_build(candidate: Action, acc_actions: tuple, s_ego: VesselState,
             s_obs: VesselState, shape_ego: VesselShape, shape_obs: VesselShape,
             params: RuleParams, ego_params: EgoParams, table: ActionTable,
             dt: float = 10.0, counters: Optional[SearchCounters] = None,
             builder: Optional[_TreeBuilder] = None) -> Optional[ManeuverTree]:
    """Breadth-first deepening by one segment time; stops at the first depth
    where any extension verifies and returns exactly the verified paths.
    Returns None when the maneuver horizon is exhausted."""
    if builder is None:
        builder = _TreeBuilder(s_ego, s_obs, shape_ego, shape_obs, params,
                               ego_params, table, dt, counters or SearchCounters())
    return builder.build(candidate, tuple(acc_actions))


def overtake_turning_side(s_ego: VesselState, s_obs: VesselState) -> str:
    """Turn away from the obstacle's heading offset: obstacle oriented to the
    right of the ego heading means the maneuver goes left, and vice versa."""
    off = wrap_pi(s_obs.orientation - s_ego.orientation)
    return "left" if off < 0 else "right"


def encounter_action_verification(kind: str, s_ego: VesselState, s_obs: VesselState,
                                  sets: ActionSets, shape_ego: VesselShape,
                                  shape_obs: VesselShape, params: RuleParams,
                                  ego_params: EgoParams, table: ActionTable,
                                  dt: float = 10.0,
                                  counters: Optional[SearchCounters] = None):
    """Safe action set and verified trees for the active encounter state.

    Stand-on returns the keep action alone; give-way encounters search every
    candidate on the obliged side and keep the candidates whose tree verified.
    """
    counters = counters or SearchCounters()
    if kind == "keep":
        return [sets.keep], {}
    if kind in ("head_on", "crossing"):
        candidates = sets.turn_right
    elif kind == "overtake":
        side = overtake_turning_side(s_ego, s_obs)
        candidates = sets.turn_left if side == "left" else sets.turn_right
    else:
        raise ValueError(f"unknown encounter kind {kind!r}")
    builder = _TreeBuilder(s_ego, s_obs, shape_ego, shape_obs, params,
                           ego_params, table, dt, counters)
    safe, forest = [], {}
    for a in candidates:
        tree = builder.build(a, tuple(sets.accelerate))
        if tree is not None:
            safe.append(a)
            forest[a.id] = tree
    return safe, forest


class ManeuverCursor:
    """Walks a verified tree: options at the current node, one action chosen
    per segment, completion at a verified leaf."""

    def __init__(self, safe_actions: list, forest: dict):
        self.safe_actions = list(safe_actions)
        self.forest = dict(forest)
        self.prefix: tuple = ()
        self.tree: Optional[ManeuverTree] = None

    def options(self) -> list:
        if self.tree is None:
            return list(self.safe_actions)
        return self.tree.children(self.prefix)

    def advance(self, action: Action):
        opts = {a.id for a in self.options()}
        if action.id not in opts:
            raise ValueError(f"action {action.id} not among the verified options")
        if self.tree is None:
            self.tree = self.forest[action.id]
            self.prefix = (action,)
        else:
            self.prefix = self.prefix + (action,)

    @property
    def complete(self) -> bool:
        return self.tree is not None and self.tree.is_complete(self.prefix)
