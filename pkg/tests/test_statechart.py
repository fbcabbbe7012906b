import numpy as np
import pytest

from seaward.dynamics import ActionTable, EgoParams, VesselShape, VesselState
from seaward.predicates import RuleParams, is_emergency
from seaward.reachability import PointMassParams
from seaward.statechart import EDGES, Rho, SafetySupervisor
from seaward.synthesis import derive_action_sets

P = RuleParams()
EGO = EgoParams()
PM = PointMassParams()
TABLE = ActionTable(EGO)
SETS = derive_action_sets(TABLE, P)
SHAPE = VesselShape(175.0, 30.0)


def supervisor():
    return SafetySupervisor(SHAPE, SHAPE, P, PM, EGO, TABLE, SETS)


def far_obstacle():
    return VesselState(50000, 50000, 0, 5)


def test_initial_state_and_full_mask():
    sup = supervisor()
    assert sup.state == Rho.NO_CONFLICT
    mask = sup.safe_action_ids()
    assert mask.sum() == 48
    assert not mask[TABLE.emergency.id]


def test_keep_enters_stand_on():
    sup = supervisor()
    ego = VesselState(0, 0, 0, 5)
    obs = VesselState(2000, 2000, -np.pi / 2, 5)  # port crossing toward starboard
    recs = sup.update(1, ego, obs)
    assert sup.state == Rho.STAND_ON
    assert recs[-1].trigger == "keep"
    mask = sup.safe_action_ids()
    assert mask.sum() == 1 and mask[TABLE.keep.id]


def test_stand_on_exits_on_not_keep():
    sup = supervisor()
    ego = VesselState(0, 0, 0, 5)
    sup.update(1, ego, VesselState(2000, 2000, -np.pi / 2, 5))
    assert sup.state == Rho.STAND_ON
    recs = sup.update(2, ego, far_obstacle())
    assert sup.state == Rho.NO_CONFLICT
    assert any(r.trigger == "not_keep" for r in recs)


def test_crossing_entry_and_lock_in():
    sup = supervisor()
    ego = VesselState(0, 0, 0, 5)
    obs = VesselState(2150, -2150, np.pi / 2, 5)  # persistence fires just before activation
    recs = sup.update(1, ego, obs)
    assert sup.state == Rho.CROSSING
    assert recs[-1].trigger in ("crossing", "persistent_crossing")
    mask = sup.safe_action_ids()
    right_ids = {a.id for a in SETS.turn_right}
    assert set(np.flatnonzero(mask)) <= right_ids


def test_crossing_exit_on_clear():
    sup = supervisor()
    ego = VesselState(0, 0, 0, 5)
    sup.update(1, ego, VesselState(2150, -2150, np.pi / 2, 5))
    assert sup.state == Rho.CROSSING
    recs = sup.update(2, ego, far_obstacle())
    assert sup.state == Rho.NO_CONFLICT
    assert any(r.trigger == "not_collision_possible" for r in recs)


def test_emergency_preempts_stand_on():
    sup = supervisor()
    ego = VesselState(0, 0, 0, 5)
    sup.update(1, ego, VesselState(2000, 2000, -np.pi / 2, 5))
    assert sup.state == Rho.STAND_ON
    close = VesselState(600, 0, np.pi, 6)
    assert is_emergency(ego, close, SHAPE, SHAPE, P, PM, EGO)
    sup.update(2, ego, close)
    assert sup.state == Rho.EMERGENCY
    mask = sup.safe_action_ids()
    assert mask.sum() == 1 and mask[TABLE.emergency.id]


def test_emergency_exit_reenters_no_conflict():
    sup = supervisor()
    ego = VesselState(0, 0, 0, 6)
    sup.update(1, ego, VesselState(600, 0, np.pi, 6))
    assert sup.state == Rho.EMERGENCY
    # obstacle now far astern and receding: resolved, cascading back to rho0
    recs = sup.update(2, ego, VesselState(-900, 0, np.pi, 5))
    assert sup.state == Rho.NO_CONFLICT
    assert any(r.trigger == "is_emergency_resolved" for r in recs)


def test_all_transitions_within_edge_set():
    rng = np.random.default_rng(31)
    sup = supervisor()
    for step in range(300):
        ego = VesselState(0, 0, rng.uniform(0, 2 * np.pi), rng.uniform(0, 9.5))
        obs = VesselState(*rng.uniform(-6000, 6000, 2), rng.uniform(0, 2 * np.pi),
                          rng.uniform(0, 9.5))
        recs = sup.update(step, ego, obs)
        for r in recs:
            assert (Rho(r.source), Rho(r.target)) in EDGES


def test_mask_never_empty_fuzz():
    rng = np.random.default_rng(32)
    sup = supervisor()
    for step in range(300):
        ego = VesselState(0, 0, rng.uniform(0, 2 * np.pi), rng.uniform(0, 9.5))
        obs = VesselState(*rng.uniform(-6000, 6000, 2), rng.uniform(0, 2 * np.pi),
                          rng.uniform(0, 9.5))
        sup.update(step, ego, obs)
        assert sup.safe_action_ids().sum() >= 1


def test_requirement_lock_in_no_sibling_switch():
    rng = np.random.default_rng(33)
    sup = supervisor()
    prev = sup.state
    encounter_states = {Rho.HEAD_ON, Rho.CROSSING, Rho.OVERTAKE}
    for step in range(400):
        ego = VesselState(0, 0, rng.uniform(0, 2 * np.pi), rng.uniform(0, 9.5))
        obs = VesselState(*rng.uniform(-5000, 5000, 2), rng.uniform(0, 2 * np.pi),
                          rng.uniform(0, 9.5))
        for r in sup.update(step, ego, obs):
            if Rho(r.source) in encounter_states:
                assert Rho(r.target) in (Rho.NO_CONFLICT, Rho.EMERGENCY)
        prev = sup.state


def test_segment_commitment():
    sup = supervisor()
    ego = VesselState(0, 0, 0, 5)
    obs = VesselState(2150, -2150, np.pi / 2, 5)
    sup.update(1, ego, obs)
    assert sup.state == Rho.CROSSING
    options = np.flatnonzero(sup.safe_action_ids())
    chosen = TABLE.by_id(int(options[0]))
    sup.consume(chosen)
    mask = sup.safe_action_ids()
    assert mask.sum() == 1 and mask[chosen.id]
    # committing to a different action is rejected
    with pytest.raises(ValueError):
        sup.consume(TABLE.by_id(int(options[-1])))
    sup.consume(chosen)
    sup.consume(chosen)
    sup.consume(chosen)  # segment ends after t_m / dt steps
    after = np.flatnonzero(sup.safe_action_ids())
    assert len(after) >= 1


def test_emergency_control_requires_emergency_state():
    sup = supervisor()
    with pytest.raises(ValueError):
        sup.emergency_control(VesselState(0, 0, 0, 5), far_obstacle())
