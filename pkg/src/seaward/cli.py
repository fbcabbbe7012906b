"""Command-line front door: scenario generation, batch rollouts, offline
monitoring, and single-step inspection."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, Params, load_params
from .environment import Environment, MaskViolationError
from .monitor import aggregate, monitor_episode
from .policies import POLICIES, make_policy
from .predicates import (
    collision_possible,
    encounter_kind,
    is_emergency,
    is_emergency_resolved,
    keep,
)
from .reachability import occupancy_pm
from .scenarios import (
    GenerationError,
    Scenario,
    SchemaError,
    generate,
    load_scenario,
    naive_criticality,
    save_scenario,
    split_train_test,
)
from .synthesis import obstacle_keep_occupancy

EXIT_OK, EXIT_DOMAIN, EXIT_CONFIG = 0, 1, 2

UNMASKED_TOLERANT = {"random-unmasked", "keep-course"}


def _canonical(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_canonical(data) + "\n")


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _derive_seed(seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _scenario_paths(spec: str) -> list:
    p = Path(spec)
    if p.is_dir():
        files = sorted(p.glob("*.json"))
        if not files:
            raise SchemaError(f"no scenario files under {p}")
        return files
    if not p.exists():
        raise SchemaError(f"scenario path {p} does not exist")
    return [p]


# ---------------------------------------------------------------------------
# generate

def cmd_generate(args, params: Params) -> int:
    if args.count <= 0:
        raise ConfigError("--count must be positive")
    out = Path(args.out)
    scenarios = generate(params.generator, args.seed, args.count,
                         params.rule, params.pm, params.ego)
    train, test = split_train_test(scenarios, args.seed, args.split)
    files = {}
    for group, items in (("train", train), ("test", test)):
        gdir = out / group
        gdir.mkdir(parents=True, exist_ok=True)
        for sc in items:
            path = gdir / f"{sc.id}.json"
            save_scenario(sc, path)
            files[str(path.relative_to(out))] = sc.digest()
    critical = sum(naive_criticality(sc, params.rule) for sc in scenarios)
    manifest = {
        "command": "generate",
        "seed": args.seed,
        "count": args.count,
        "split": args.split,
        "train": len(train),
        "test": len(test),
        "criticality_fraction": critical / len(scenarios),
        "files": files,
        "params": params.to_dict(),
    }
    _write_json(out / "manifest.json", manifest)
    print(f"wrote {len(train)} train + {len(test)} test scenarios to {out} "
          f"(criticality {critical / len(scenarios):.1%})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# rollout

def _trace_header(scenario: Scenario) -> dict:
    return {"meta": {
        "scenario_id": scenario.id,
        "scenario_digest": scenario.digest(),
        "encounter": scenario.encounter,
        "dt": scenario.dt,
        "ego_shape": [scenario.ego_shape.length, scenario.ego_shape.width],
        "obstacle_shape": [scenario.obstacle_shape.length, scenario.obstacle_shape.width],
    }}


def run_episode(scenario: Scenario, params: Params, policy_name: str,
                seed: int, verify: bool):
    """One full episode; returns (trace rows with header, monitor report)."""
    env = Environment(scenario, rule_params=params.rule, env_params=params.env,
                      ego_params=params.ego, pm_params=params.pm, verify=verify)
    res = env.reset()
    policy = make_policy(policy_name, env.table, _derive_seed(seed, scenario.id))
    while not res.terminated:
        res = env.step(policy(res.observation, res.mask))
    report = monitor_episode(env.trace_rows, params.rule, params.pm, params.ego,
                             scenario.ego_shape, scenario.obstacle_shape,
                             episode_id=scenario.id, with_timeline=False)
    return env.trace_rows, report, res.cause


def _rollout_worker(job):
    path, params, policy_name, seed, verify, out_dir = job
    scenario = load_scenario(path)
    rows, report, cause = run_episode(scenario, params, policy_name, seed, verify)
    trace_path = Path(out_dir) / "traces" / f"{scenario.id}.jsonl"
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    with trace_path.open("w") as fh:
        fh.write(_canonical(_trace_header(scenario)) + "\n")
        for row in rows:
            fh.write(_canonical(row) + "\n")
    summary = {
        "id": scenario.id,
        "encounter": scenario.encounter,
        "cause": cause,
        "steps": report.steps,
        "violations": report.total_violations,
        "collision": report.collision,
        "emergency_breach": report.emergency_breach,
        "emergency_action_steps": report.emergency_action_steps,
        "trace": str(trace_path),
        "trace_sha256": _sha256_file(trace_path),
    }
    return summary, report.to_dict(), cause


def cmd_rollout(args, params: Params) -> int:
    if not args.verify and args.policy not in UNMASKED_TOLERANT:
        raise ConfigError(f"policy {args.policy!r} requires --verify on")
    paths = _scenario_paths(args.scenarios)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(str(p), params, args.policy, args.seed, args.verify, str(out))
            for p in paths]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_rollout_worker, jobs))
    else:
        results = [_rollout_worker(j) for j in jobs]
    results.sort(key=lambda r: r[0]["id"])
    summaries = [r[0] for r in results]
    from .monitor import ViolationReport

    reports = []
    for _, rep_dict, _ in results:
        rep = ViolationReport(**{k: v for k, v in rep_dict.items()
                                 if k in ViolationReport.__dataclass_fields__})
        reports.append(rep)
    causes = [r[2] for r in results]
    metrics = aggregate(reports, causes)
    metrics["per_episode"] = summaries
    _write_json(out / "metrics.json", metrics)
    manifest = {
        "command": "rollout",
        "policy": args.policy,
        "seed": args.seed,
        "verify": args.verify,
        "scenarios": [str(p) for p in paths],
        "traces": {s["id"]: s["trace_sha256"] for s in summaries},
        "params": params.to_dict(),
    }
    _write_json(out / "manifest.json", manifest)
    if args.plots:
        from .plots import plot_episode, plot_metrics

        figdir = out / "figures"
        figdir.mkdir(exist_ok=True)
        plot_metrics(metrics, figdir / "metrics.png")
        for s in summaries[: args.plot_limit]:
            scenario = load_scenario(next(p for p in paths
                                          if Path(p).stem == s["id"]))
            rows = _read_trace(Path(s["trace"]))[1]
            plot_episode(rows, scenario, figdir / f"{s['id']}.png")
    print(f"rollout: {len(summaries)} episodes, goal {metrics['goal_reach_rate']:.1%}, "
          f"collisions {metrics['collision_rate']:.1%}, "
          f"violations {metrics['rule_violations_total']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# monitor

def _read_trace(path: Path):
    lines = path.read_text().splitlines()
    if not lines:
        raise SchemaError(f"empty trace file {path}")
    header = json.loads(lines[0])
    if "meta" not in header:
        raise SchemaError(f"trace {path} lacks the meta header")
    rows = [json.loads(line) for line in lines[1:]]
    return header["meta"], rows


def cmd_monitor(args, params: Params) -> int:
    tdir = Path(args.traces)
    files = sorted(tdir.glob("*.jsonl")) if tdir.is_dir() else [tdir]
    if not files or not all(f.exists() for f in files):
        raise SchemaError(f"no trace files under {args.traces}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    from .dynamics import VesselShape

    reports, causes, timelines = [], [], {}
    for f in files:
        meta, rows = _read_trace(f)
        shape_e = VesselShape(*meta["ego_shape"])
        shape_o = VesselShape(*meta["obstacle_shape"])
        rep = monitor_episode(rows, params.rule, params.pm, params.ego,
                              shape_e, shape_o, episode_id=meta["scenario_id"])
        timelines[meta["scenario_id"]] = rep.timeline
        reports.append(rep)
        causes.append(rows[-1].get("terminated"))
    summary = aggregate(reports, causes)
    report_data = {"summary": summary, "episodes": [r.to_dict() for r in reports]}
    _write_json(out / "report.json", report_data)
    fields = ["episode_id", "steps", "cause", "stand_on_violation_steps",
              "total_violations", "inconclusive", "emergency_preempted",
              "emergency_breach", "emergency_breach_steps", "collision",
              "emergency_action_steps"]
    with (out / "episodes.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for r in reports:
            writer.writerow(r.to_dict())
    if args.plots:
        from .plots import plot_metrics, plot_violation_timeline

        figdir = out / "figures"
        figdir.mkdir(exist_ok=True)
        plot_metrics(summary, figdir / "report.png")
        flagged = [r for r in reports if r.total_violations or r.emergency_breach]
        for r in flagged[: args.plot_limit]:
            plot_violation_timeline(r.to_dict(), timelines[r.episode_id],
                                    figdir / f"{r.episode_id}.png")
    print(f"monitored {len(reports)} episodes: "
          f"{summary['rule_violations_total']} violations, "
          f"{summary['emergency_breaches']} emergency breaches")
    return EXIT_OK


# ---------------------------------------------------------------------------
# inspect

def cmd_inspect(args, params: Params) -> int:
    scenario = load_scenario(args.scenario)
    if args.step < 0 or args.step > scenario.k_max:
        print(f"step {args.step} outside [0, {scenario.k_max}]", file=sys.stderr)
        return EXIT_DOMAIN
    env = Environment(scenario, rule_params=params.rule, env_params=params.env,
                      ego_params=params.ego, pm_params=params.pm, verify=True)
    res = env.reset()
    policy = make_policy("keep-course", env.table, 0)
    for _ in range(args.step):
        if res.terminated:
            print(f"episode ended before step {args.step}", file=sys.stderr)
            return EXIT_DOMAIN
        res = env.step(policy(res.observation, res.mask))
    s_ego = env.s_ego
    s_obs = scenario.obstacle_state(env.k)
    dump = {
        "step": env.k,
        "ego": list(s_ego.as_tuple()),
        "obstacle": list(s_obs.as_tuple()),
        "rho": int(env.supervisor.state),
        "mask_ids": [int(i) for i in np.flatnonzero(res.mask)],
        "predicates": {
            "encounter_kind": encounter_kind(s_ego, s_obs, scenario.ego_shape,
                                             scenario.obstacle_shape, params.rule),
            "keep": keep(s_ego, s_obs, scenario.ego_shape, scenario.obstacle_shape,
                         params.rule),
            "collision_possible": collision_possible(
                s_ego, s_obs, params.rule.t_horizon_check,
                scenario.obstacle_shape.length, params.rule),
            "is_emergency": is_emergency(s_ego, s_obs, scenario.ego_shape,
                                         scenario.obstacle_shape, params.rule,
                                         params.pm, params.ego, dt=scenario.dt),
            "is_emergency_resolved": is_emergency_resolved(
                s_ego, s_obs, params.ego.length, params.rule),
        },
        "occupancies": {
            "obstacle_reachable": occupancy_pm(
                s_obs, params.pm, params.rule.t_pred,
                scenario.obstacle_shape, scenario.dt).to_jsonable(),
            "obstacle_keep_inflated": obstacle_keep_occupancy(
                s_obs, scenario.obstacle_shape, params.rule, params.ego,
                scenario.dt).to_jsonable(),
        },
    }
    if env.supervisor.emergency is not None:
        dump["emergency_mode"] = env.supervisor.emergency.mode
    print(json.dumps(dump, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seaward",
        description="Maritime rule-compliance verification and simulation")
    parser.add_argument("--params", help="YAML/JSON parameter override file")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate critical encounter scenarios")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--split", type=float, default=0.7)
    g.add_argument("--out", required=True)

    r = sub.add_parser("rollout", help="run scripted-policy episodes")
    r.add_argument("--scenarios", required=True, help="scenario file or directory")
    r.add_argument("--policy", choices=sorted(POLICIES), default="random-masked")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--verify", choices=("on", "off"), default="on")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--out", required=True)
    r.add_argument("--plots", action="store_true")
    r.add_argument("--plot-limit", type=int, default=12)

    m = sub.add_parser("monitor", help="evaluate rule compliance on traces")
    m.add_argument("--traces", required=True, help="trace file or directory")
    m.add_argument("--out", required=True)
    m.add_argument("--plots", action="store_true")
    m.add_argument("--plot-limit", type=int, default=12)

    i = sub.add_parser("inspect", help="dump predicates and mask at one step")
    i.add_argument("--scenario", required=True)
    i.add_argument("--step", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params = load_params(args.params)
        if getattr(args, "verify", None) is not None:
            args.verify = args.verify == "on"
        handler = {"generate": cmd_generate, "rollout": cmd_rollout,
                   "monitor": cmd_monitor, "inspect": cmd_inspect}[args.command]
        return handler(args, params)
    except (ConfigError, SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GenerationError, MaskViolationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
