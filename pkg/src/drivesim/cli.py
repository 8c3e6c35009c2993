"""Command-line front end: preprocess scenario directories, run throughput
benchmarks, roll out policies, render SVG snapshots, and generate synthetic
scenarios.

Exit codes: 0 success, 1 domain error (bad input content, unknown policy),
2 I/O error (missing/unwritable paths).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import engine
from .engine import SimBatch, SimConfig, World, benchmark, make_policy
from .observation import ObsConfig, obs_width
from .render import SnapshotFrame, render_svg
from .scenario import (ScenarioError, load_prepared, parse_scenario,
                       preprocess, serialize_prepared, serialize_scenario,
                       validate_scenario)
from .synthetic import InvalidSpec, SyntheticSpec, generate_synthetic

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IO = 2


def _read(path: str) -> str:
    with open(path) as f:
        return f.read()


def _scenario_files(directory: str) -> list[str]:
    return sorted(os.path.join(directory, f) for f in os.listdir(directory)
                  if f.endswith(".json"))


def cmd_preprocess(args) -> int:
    try:
        files = _scenario_files(args.in_dir)
    except OSError as e:
        print(f"error: cannot read {args.in_dir}: {e}", file=sys.stderr)
        return EXIT_IO
    if not files:
        print(f"error: no scenario JSON in {args.in_dir}", file=sys.stderr)
        return EXIT_IO
    try:
        os.makedirs(args.out_dir, exist_ok=True)
    except OSError as e:
        print(f"error: cannot create {args.out_dir}: {e}", file=sys.stderr)
        return EXIT_IO

    failures = 0
    for path in files:
        name = os.path.basename(path)
        try:
            scenario = parse_scenario(_read(path))
            report = validate_scenario(scenario)
            if not report.ok:
                raise ScenarioError(name, "; ".join(
                    f"{e.code}@{e.path}" for e in report.entries[:5]))
        except (ScenarioError, OSError) as e:
            failures += 1
            print(f"{name}: FAILED ({e})", file=sys.stderr)
            if args.skip_bad:
                continue
            return EXIT_DOMAIN
        prepared = preprocess(scenario, args.decimate_eps,
                              args.controllable_threshold)
        st = prepared.stats
        ratio = st.n_road_points_before / max(st.n_road_points_after, 1)
        out_path = os.path.join(args.out_dir, name)
        try:
            with open(out_path, "w") as f:
                f.write(serialize_prepared(prepared))
        except OSError as e:
            print(f"error: cannot write {out_path}: {e}", file=sys.stderr)
            return EXIT_IO
        print(f"{name}: points {st.n_road_points_before} -> "
              f"{st.n_road_points_after} ({ratio:.1f}x), "
              f"controllable {st.n_controllable}/{st.n_objects}")
    return EXIT_OK


def _load_scenarios(directory: str):
    files = _scenario_files(directory)
    if not files:
        raise OSError(f"no scenario JSON in {directory}")
    return [load_prepared(_read(p)) for p in files]


def cmd_bench(args) -> int:
    try:
        scenarios = _load_scenarios(args.scenarios)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN

    cfg = SimConfig(obs=ObsConfig(mode=args.obs), seed=args.seed)
    world_counts = [int(w) for w in args.worlds.split(",")]
    max_agents = max(len(p.base.objects) for p in scenarios)
    width = obs_width(cfg.obs)
    for w in world_counts:
        est_mb = w * max_agents * width * 8 * 4 / 1e6
        if est_mb > args.mem_cap_mb:
            print(f"error: worlds={w} needs ~{est_mb:.0f} MB "
                  f"(> cap {args.mem_cap_mb} MB)", file=sys.stderr)
            return EXIT_DOMAIN

    rows = []
    for w in world_counts:
        report = benchmark(scenarios, cfg, worlds=w, steps=args.steps,
                           policy=args.policy, seed=args.seed)
        rows.append(report)
        print(f"worlds={report.worlds} steps={report.steps} "
              f"agents={report.total_agents} elapsed={report.elapsed_s:.3f}s "
              f"ASPS={report.asps:,.0f} CASPS={report.casps:,.0f}")
    if args.csv:
        try:
            new = not os.path.exists(args.csv)
            with open(args.csv, "a") as f:
                if new:
                    f.write(engine.BENCH_CSV_HEADER + "\n")
                for r in rows:
                    f.write(engine.bench_csv_row(r) + "\n")
        except OSError as e:
            print(f"error: cannot write {args.csv}: {e}", file=sys.stderr)
            return EXIT_IO
    best = max(rows, key=lambda r: r.asps)
    print(f"peak ASPS={best.asps:,.0f} CASPS={best.casps:,.0f} "
          f"at worlds={best.worlds}")
    return EXIT_OK


def cmd_rollout(args) -> int:
    try:
        prepared = load_prepared(_read(args.scenario))
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN

    cfg = SimConfig(seed=args.seed)
    world = World(prepared, cfg)
    try:
        policy = make_policy(args.policy, cfg, world, seed=args.seed)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN

    obs_buf = np.zeros((world.n_controlled, obs_width(cfg.obs)))
    steps = []

    def record():
        steps.append({
            "t": world.t,
            "pos": [[round(float(x), 9), round(float(y), 9)]
                    for x, y in world.pos],
            "heading": [round(float(h), 9) for h in world.heading],
            "present": [bool(p and not r)
                        for p, r in zip(world.present, world.removed)],
        })

    record()
    t = 0
    while not world.episode_over:
        world.step(policy(t), obs_out=obs_buf)
        record()
        t += 1
    info = world.episode_info()
    metrics = engine.compute_metrics([info])

    doc = {
        "scenario": world.name,
        "timestep_s": world.dt,
        "policy": args.policy,
        "agents": [int(i) for i in range(world.n_agents)],
        "kinds": [int(k) for k in world.kind],
        "lengths": [float(x) for x in world.length],
        "widths": [float(x) for x in world.width],
        "goals": [[float(x), float(y)] for x, y in world.goal],
        "steps": steps,
        "metrics": {"goal_rate": metrics.goal_rate,
                    "veh_collision_rate": metrics.veh_collision_rate,
                    "offroad_rate": metrics.offroad_rate},
    }
    try:
        with open(args.out, "w") as f:
            json.dump(doc, f)
    except OSError as e:
        print(f"error: cannot write {args.out}: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"{world.name}: controlled={world.n_controlled} "
          f"goal_rate={metrics.goal_rate:.3f} "
          f"veh_collision_rate={metrics.veh_collision_rate:.3f} "
          f"offroad_rate={metrics.offroad_rate:.3f}")
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        text = _read(args.in_path)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    doc = None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        pass
    if isinstance(doc, dict) and "steps" in doc and "objects" not in doc:
        # Trajectory file from cmd_rollout: rebuild a static frame.
        try:
            scen_doc = _trajectory_to_scenario(doc)
            step = min(args.step, len(doc["steps"]) - 1)
            frame = SnapshotFrame(scen_doc, step=0,
                                  poses=[(p[0], p[1], h) for p, h in
                                         zip(doc["steps"][step]["pos"],
                                             doc["steps"][step]["heading"])],
                                  present=doc["steps"][step]["present"])
        except (KeyError, ValueError) as e:
            print(f"error: bad trajectory file: {e}", file=sys.stderr)
            return EXIT_DOMAIN
    else:
        try:
            scenario = parse_scenario(text)
        except ScenarioError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_DOMAIN
        frame = SnapshotFrame(scenario, step=args.step)
    svg = render_svg(frame)
    try:
        with open(args.out, "w") as f:
            f.write(svg)
    except OSError as e:
        print(f"error: cannot write {args.out}: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {args.out}")
    return EXIT_OK


def _trajectory_to_scenario(doc: dict):
    from .scenario import ObjectLog, Scenario
    from .geometry import Vec2
    from .scenario import LoggedStep, OBJECT_KINDS

    objects = []
    first = doc["steps"][0]
    for i in doc["agents"]:
        st = LoggedStep(position=Vec2(*first["pos"][i]),
                        heading=first["heading"][i],
                        velocity=Vec2(0, 0), valid=first["present"][i])
        objects.append(ObjectLog(
            id=i, kind=OBJECT_KINDS[doc["kinds"][i]],
            length=doc["lengths"][i], width=doc["widths"][i],
            goal=Vec2(*doc["goals"][i]), states=[st]))
    return Scenario(name=doc.get("scenario", "trajectory"), num_steps=1,
                    objects=objects, roads=[])


def cmd_synth(args) -> int:
    try:
        spec = SyntheticSpec(template=args.template, n_agents=args.agents,
                             seed=args.seed)
        scenario = generate_synthetic(spec)
    except InvalidSpec as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    try:
        with open(args.out, "w") as f:
            f.write(serialize_scenario(scenario))
    except OSError as e:
        print(f"error: cannot write {args.out}: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {args.out} ({scenario.name}: {len(scenario.objects)} agents, "
          f"{len(scenario.roads)} roads)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drivesim",
                                description="batched 2D driving simulator")
    sub = p.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("preprocess", help="decimate + mark scenario dirs")
    sp.add_argument("--in", dest="in_dir", required=True)
    sp.add_argument("--out", dest="out_dir", required=True)
    sp.add_argument("--decimate-eps", type=float, default=0.05)
    sp.add_argument("--controllable-threshold", type=float, default=2.0)
    sp.add_argument("--skip-bad", action="store_true")
    sp.set_defaults(func=cmd_preprocess)

    sp = sub.add_parser("bench", help="throughput benchmark sweep")
    sp.add_argument("--scenarios", required=True)
    sp.add_argument("--worlds", default="1,2,4,8")
    sp.add_argument("--steps", type=int, default=91)
    sp.add_argument("--obs", default="radial",
                    choices=["radial", "lidar", "view_cone"])
    sp.add_argument("--policy", default="random",
                    choices=["random", "constant", "replay"])
    sp.add_argument("--csv", default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--mem-cap-mb", type=float, default=4096.0)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("rollout", help="roll one scenario under a policy")
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--policy", default="replay",
                    help="replay | constant:a:s | goal_seek | random")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_rollout)

    sp = sub.add_parser("render", help="bird's-eye SVG snapshot")
    sp.add_argument("--in", dest="in_path", required=True)
    sp.add_argument("--step", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("synth", help="generate a synthetic scenario")
    sp.add_argument("--template", required=True,
                    choices=["straight_road", "intersection", "parking_lot"])
    sp.add_argument("--agents", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
