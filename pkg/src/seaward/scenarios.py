"""Critical-encounter scenario generation, JSON persistence, and validation."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import EgoParams, VesselShape, VesselState
from .predicates import RuleParams, collision_possible, encounter_kind, is_emergency
from .reachability import PointMassParams
from .synthesis import predict_keep_course

SCHEMA_VERSION = 1

ENCOUNTER_KINDS = ("head_on", "crossing_give_way", "crossing_stand_on",
                   "overtake_give_way", "overtake_stand_on")

# Expected first active predicate (ego view) per generated encounter kind.
EXPECTED_FIRST = {"head_on": "head_on", "crossing_give_way": "crossing",
                  "crossing_stand_on": "keep", "overtake_give_way": "overtake",
                  "overtake_stand_on": "keep"}


class SchemaError(ValueError):
    """Scenario file malformed or of an unsupported schema version."""


class GenerationError(RuntimeError):
    """Could not produce a scenario satisfying the construction invariants."""


@dataclass(frozen=True)
class GeneratorConfig:
    encounter_distance: tuple = (2000.0, 3500.0)
    speed_range: tuple = (3.0, 7.0)
    goal_distance: float = 4500.0
    heading_noise: float = 0.05
    speed_noise: float = 0.1
    kinds: tuple = ENCOUNTER_KINDS
    min_encounter_time: float = 440.0
    area_margin: float = 5000.0
    goal_length: float = 400.0
    goal_width: float = 60.0
    goal_orientation_tol: float = np.radians(15.0)
    k_max: int = 170
    dt: float = 10.0
    max_retries: int = 200


@dataclass(frozen=True)
class Scenario:
    id: str
    dt: float
    k_max: int
    ego_start: VesselState
    ego_shape: VesselShape
    obstacle_shape: VesselShape
    obstacle_trajectory: tuple
    goal_center: tuple
    goal_length: float
    goal_width: float
    goal_orientation: float
    goal_orientation_tol: float
    area_min: tuple
    area_max: tuple
    seed: int = 0
    encounter: str = "unknown"

    def obstacle_state(self, k: int) -> VesselState:
        return self.obstacle_trajectory[min(k, len(self.obstacle_trajectory) - 1)]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "dt": self.dt,
            "k_max": self.k_max,
            "ego": {
                "state": list(self.ego_start.as_tuple()),
                "shape": {"length": self.ego_shape.length, "width": self.ego_shape.width},
            },
            "obstacle": {
                "shape": {"length": self.obstacle_shape.length, "width": self.obstacle_shape.width},
                "trajectory": [list(s.as_tuple()) for s in self.obstacle_trajectory],
            },
            "goal": {
                "center": list(self.goal_center),
                "length": self.goal_length,
                "width": self.goal_width,
                "orientation": self.goal_orientation,
                "orientation_tol": self.goal_orientation_tol,
            },
            "area": {"min": list(self.area_min), "max": list(self.area_max)},
            "meta": {"seed": self.seed, "encounter": self.encounter},
        }

    @staticmethod
    def from_dict(data: dict) -> "Scenario":
        try:
            version = data["schema_version"]
            if version != SCHEMA_VERSION:
                raise SchemaError(f"unsupported schema version {version}")
            traj = tuple(VesselState(*s) for s in data["obstacle"]["trajectory"])
            scenario = Scenario(
                id=str(data["id"]),
                dt=float(data["dt"]),
                k_max=int(data["k_max"]),
                ego_start=VesselState(*data["ego"]["state"]),
                ego_shape=VesselShape(**data["ego"]["shape"]),
                obstacle_shape=VesselShape(**data["obstacle"]["shape"]),
                obstacle_trajectory=traj,
                goal_center=tuple(data["goal"]["center"]),
                goal_length=float(data["goal"]["length"]),
                goal_width=float(data["goal"]["width"]),
                goal_orientation=float(data["goal"]["orientation"]),
                goal_orientation_tol=float(data["goal"]["orientation_tol"]),
                area_min=tuple(data["area"]["min"]),
                area_max=tuple(data["area"]["max"]),
                seed=int(data["meta"].get("seed", 0)),
                encounter=str(data["meta"].get("encounter", "unknown")),
            )
        except SchemaError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed scenario: {exc}") from exc
        if len(scenario.obstacle_trajectory) != scenario.k_max + 1:
            raise SchemaError("obstacle trajectory must have k_max + 1 states")
        return scenario

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(scenario.canonical_json() + "\n")


def load_scenario(path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read scenario {path}: {exc}") from exc
    return Scenario.from_dict(data)


def load_scenario_dir(path) -> list:
    files = sorted(Path(path).glob("*.json"))
    if not files:
        raise SchemaError(f"no scenario files under {path}")
    return [load_scenario(f) for f in files]


# ---------------------------------------------------------------------------
# generation

def _unit(angle: float) -> np.ndarray:
    return np.array([np.cos(angle), np.sin(angle)])


def _course_offset(rng, kind: str) -> float:
    if kind == "head_on":
        return np.pi + rng.uniform(-0.03, 0.03)
    if kind == "crossing_give_way":
        return rng.uniform(np.radians(40.0), np.radians(140.0))
    if kind == "crossing_stand_on":
        return -rng.uniform(np.radians(40.0), np.radians(140.0))
    return rng.uniform(-0.2, 0.2)  # overtaking: nearly parallel courses


def _sample_obstacle_speed(rng, kind: str, v_ego: float, t_arr: float,
                           cfg: GeneratorConfig):
    lo = max(cfg.speed_range[0], cfg.encounter_distance[0] / t_arr)
    hi = min(cfg.speed_range[1], cfg.encounter_distance[1] / t_arr)
    if kind == "overtake_give_way":
        hi = min(hi, v_ego - 0.5)
    elif kind == "overtake_stand_on":
        lo = max(lo, v_ego + 0.5)
    if lo >= hi:
        return None
    return rng.uniform(lo, hi)


def _first_active_kind(scenario: Scenario, rule: RuleParams):
    ego = scenario.ego_start
    for k in range(scenario.k_max + 1):
        pe = predict_keep_course(ego, k * scenario.dt)
        po = scenario.obstacle_state(k)
        kind = encounter_kind(pe, po, scenario.ego_shape, scenario.obstacle_shape, rule)
        if kind is not None:
            return kind, k
    return None, None


def naive_criticality(scenario: Scenario, rule: RuleParams) -> bool:
    """Collision-course flag reached at some step when the ego holds course."""
    ego = scenario.ego_start
    for k in range(scenario.k_max + 1):
        pe = predict_keep_course(ego, k * scenario.dt)
        po = scenario.obstacle_state(k)
        if collision_possible(pe, po, rule.t_horizon_check,
                              scenario.obstacle_shape.length, rule):
            return True
    return False


def validate_initial_state(scenario: Scenario, rule: RuleParams,
                           pm: PointMassParams, ego_params: EgoParams) -> bool:
    """No collision avoidance rule may apply at the first step."""
    ego, obs = scenario.ego_start, scenario.obstacle_state(0)
    if encounter_kind(ego, obs, scenario.ego_shape, scenario.obstacle_shape, rule):
        return False
    return not is_emergency(ego, obs, scenario.ego_shape, scenario.obstacle_shape,
                            rule, pm, ego_params, dt=scenario.dt)


def generate_scenario(index: int, seed: int, cfg: GeneratorConfig,
                      rule: RuleParams, pm: PointMassParams,
                      ego_params: EgoParams,
                      obstacle_shape: VesselShape | None = None) -> Scenario:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, index)))
    ego_shape = ego_params.shape
    obstacle_shape = obstacle_shape or VesselShape(ego_params.length, ego_params.width)
    for _ in range(cfg.max_retries):
        kind = str(rng.choice(cfg.kinds))
        psi_e = rng.uniform(0.0, 2 * np.pi)
        d_e = rng.uniform(*cfg.encounter_distance)
        v_hi = min(cfg.speed_range[1], d_e / cfg.min_encounter_time)
        if v_hi <= cfg.speed_range[0]:
            continue
        v_e = rng.uniform(cfg.speed_range[0], v_hi)
        t_arr = d_e / v_e
        v_o = _sample_obstacle_speed(rng, kind, v_e, t_arr, cfg)
        if v_o is None:
            continue
        psi_o = psi_e + _course_offset(rng, kind)
        d_o = v_o * t_arr
        meet = np.zeros(2)
        ego_start = VesselState(*(meet - d_e * _unit(psi_e)), psi_e, v_e)
        obs_pos = meet - d_o * _unit(psi_o)
        # one-shot realism noise on the obstacle's initial course and speed
        psi_noisy = psi_o + rng.uniform(-cfg.heading_noise, cfg.heading_noise)
        v_noisy = float(np.clip(v_o + rng.uniform(-cfg.speed_noise, cfg.speed_noise),
                                0.1, ego_params.v_max))
        obs0 = VesselState(*obs_pos, psi_noisy, v_noisy)
        traj = tuple(predict_keep_course(obs0, k * cfg.dt) for k in range(cfg.k_max + 1))
        goal_center = ego_start.position + cfg.goal_distance * _unit(psi_e)
        pts = np.vstack([ego_start.position, goal_center,
                         [s.position for s in traj]])
        scenario = Scenario(
            id=f"sc-{seed}-{index:05d}",
            dt=cfg.dt,
            k_max=cfg.k_max,
            ego_start=ego_start,
            ego_shape=ego_shape,
            obstacle_shape=obstacle_shape,
            obstacle_trajectory=traj,
            goal_center=tuple(goal_center),
            goal_length=cfg.goal_length,
            goal_width=cfg.goal_width,
            goal_orientation=psi_e,
            goal_orientation_tol=cfg.goal_orientation_tol,
            area_min=tuple(pts.min(axis=0) - cfg.area_margin),
            area_max=tuple(pts.max(axis=0) + cfg.area_margin),
            seed=seed,
            encounter=kind,
        )
        if not validate_initial_state(scenario, rule, pm, ego_params):
            continue
        first, _ = _first_active_kind(scenario, rule)
        if first != EXPECTED_FIRST[kind]:
            continue
        return scenario
    raise GenerationError(f"scenario {index}: retries exhausted")


def generate(cfg: GeneratorConfig, seed: int, count: int, rule: RuleParams,
             pm: PointMassParams, ego_params: EgoParams) -> list:
    if count <= 0:
        raise ValueError("count must be positive")
    return [generate_scenario(i, seed, cfg, rule, pm, ego_params) for i in range(count)]


def split_train_test(scenarios: list, seed: int, train_fraction: float = 0.7):
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0xC0FFEE)))
    order = rng.permutation(len(scenarios))
    n_train = int(round(train_fraction * len(scenarios)))
    train = [scenarios[i] for i in sorted(order[:n_train])]
    test = [scenarios[i] for i in sorted(order[n_train:])]
    return train, test
