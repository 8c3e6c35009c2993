import math
import os

import numpy as np
import pytest

from drivesim.engine import (ActionCountMismatch, EpisodeInfo, SimBatch,
                             SimConfig, ThroughputReport, World, benchmark,
                             compute_metrics, goal_seek_actions, init_batch)
from drivesim.geometry import Vec2
from drivesim.observation import ObsConfig, obs_width
from drivesim.scenario import (LoggedStep, ObjectLog, RoadElement, Scenario,
                               preprocess)
from drivesim.synthetic import SyntheticSpec, generate_synthetic
from oracles import collision_events_brute


def scripted_object(oid, poses, kind="vehicle", goal=None, length=4.0,
                    width=2.0, speed=0.0, force_replay=False, valid=None):
    """ObjectLog from a list of (x, y, heading) poses."""
    states = []
    for t, (x, y, h) in enumerate(poses):
        ok = True if valid is None else valid[t]
        states.append(LoggedStep(position=Vec2(x, y), heading=h,
                                 velocity=Vec2(speed * math.cos(h),
                                               speed * math.sin(h)),
                                 valid=ok))
    if goal is None:
        goal = poses[-1][:2]
    return ObjectLog(id=oid, kind=kind, length=length, width=width,
                     goal=Vec2(*goal), states=states,
                     force_replay=force_replay)


def build_world(objects, roads=(), cfg=None, num_steps=None):
    num_steps = num_steps or len(objects[0].states)
    s = Scenario(name="scripted", num_steps=num_steps, objects=objects,
                 roads=list(roads))
    return World(preprocess(s, decimation_threshold=0.0), cfg or SimConfig())


def hold(x, y, h, n):
    return [(x, y, h)] * n


# ---------------------------------------------------------------------------
# rewards, goal removal
# ---------------------------------------------------------------------------

def test_goal_reward_then_removal():
    # Agent 1.9 m from goal, tolerance 2.0: any action keeping it inside
    # earns reward 1 and done; next step it is removed from the scene.
    obj = scripted_object(0, hold(0, 0, 0.0, 5), goal=(1.9, 0.0))
    watcher = scripted_object(1, hold(0, 30.0, 0.0, 5), goal=(80, 30))
    w = build_world([obj, watcher], cfg=SimConfig(init_mode="all_valid"))
    obs = np.zeros((w.n_controlled, obs_width(w.cfg.obs)))
    actions = np.zeros((w.n_controlled, 2))
    rew, done, info = w.step(actions, obs_out=obs)
    assert rew[0] == 1.0 and done[0]
    assert info["goal"][0]
    assert not w.removed[0]            # still in scene this step
    assert (obs[0] == 0).all()         # finished agents get zero obs
    rew2, done2, _ = w.step(actions, obs_out=obs)
    assert w.removed[0]                # removed now
    assert rew2[0] == 0.0 and done2[0]
    # The watcher no longer sees agent 0 in partner slots.
    assert obs[1][7:7 + 7][6] == 0.0


def test_cumulative_reward_at_most_one():
    obj = scripted_object(0, hold(0, 0, 0.0, 6), goal=(0.5, 0.0))
    w = build_world([obj], cfg=SimConfig(init_mode="all_valid"))
    total = 0.0
    acts = np.zeros((1, 2))
    for _ in range(5):
        rew, _, _ = w.step(acts)
        total += rew[0]
    assert total == 1.0


def test_rewards_are_binary():
    p = preprocess(generate_synthetic(
        SyntheticSpec("straight_road", n_agents=8, seed=2)))
    w = World(p, SimConfig())
    rng = np.random.default_rng(0)
    seen = set()
    for _ in range(91):
        rew, _, _ = w.step(rng.uniform(-1, 1, (w.n_controlled, 2)))
        seen.update(np.unique(rew).tolist())
    assert seen <= {0.0, 1.0}


# ---------------------------------------------------------------------------
# collisions
# ---------------------------------------------------------------------------

def test_head_on_collision_both_flagged_and_removed():
    a = scripted_object(0, hold(-1.0, 0, 0.0, 5), goal=(50, 0))
    b = scripted_object(1, hold(1.0, 0, math.pi, 5), goal=(-50, 0))
    cfg = SimConfig(collision_behavior="remove_agent")
    w = build_world([a, b], cfg=cfg)
    rew, done, info = w.step(np.zeros((2, 2)))
    assert info["veh_collision"].tolist() == [True, True]
    assert done.tolist() == [True, True]


def test_collision_ignore_keeps_agents_alive():
    a = scripted_object(0, hold(-1.0, 0, 0.0, 5), goal=(50, 0))
    b = scripted_object(1, hold(1.0, 0, math.pi, 5), goal=(-50, 0))
    w = build_world([a, b], cfg=SimConfig(collision_behavior="ignore"))
    _, done, info = w.step(np.zeros((2, 2)))
    assert info["veh_collision"].tolist() == [True, True]
    assert done.tolist() == [False, False]


def test_collision_end_episode_finishes_world():
    a = scripted_object(0, hold(-1.0, 0, 0.0, 5), goal=(50, 0))
    b = scripted_object(1, hold(1.0, 0, math.pi, 5), goal=(-50, 0))
    c = scripted_object(2, hold(0.0, 30, 0.0, 5), goal=(50, 30))
    w = build_world([a, b, c], cfg=SimConfig(collision_behavior="end_episode"))
    _, done, _ = w.step(np.zeros((3, 2)))
    assert done.tolist() == [True, True, True]
    assert w.episode_over


def test_pedestrian_road_edge_exemption():
    edge = RoadElement(id=0, kind="road_edge",
                       geometry=[Vec2(5.0, -10), Vec2(5.0, 10)])
    ped = scripted_object(0, hold(5.0, 0, 0.0, 4), kind="pedestrian",
                          goal=(30, 0), length=0.8, width=0.8)
    veh = scripted_object(1, hold(5.0, 5.0, 0.0, 4), kind="vehicle",
                          goal=(30, 5))
    w = build_world([ped, veh], roads=[edge])
    _, _, info = w.step(np.zeros((2, 2)))
    assert not info["offroad"][0]   # pedestrian may cross road edges
    assert info["offroad"][1]       # vehicle may not


def test_cyclist_hits_road_edge():
    edge = RoadElement(id=0, kind="road_edge",
                       geometry=[Vec2(5.0, -10), Vec2(5.0, 10)])
    cyc = scripted_object(0, hold(5.0, 0, 0.0, 4), kind="cyclist",
                          goal=(30, 0), length=1.8, width=0.6)
    w = build_world([cyc], roads=[edge])
    _, _, info = w.step(np.zeros((1, 2)))
    assert info["offroad"][0]


def test_non_edge_road_types_dont_collide():
    lane = RoadElement(id=0, kind="lane",
                       geometry=[Vec2(5.0, -10), Vec2(5.0, 10)])
    veh = scripted_object(0, hold(5.0, 0, 0.0, 4), goal=(30, 0))
    w = build_world([veh], roads=[lane])
    _, _, info = w.step(np.zeros((1, 2)))
    assert not info["offroad"][0]


def test_removed_agent_not_in_collisions():
    # Agent 0 reaches its goal at step 1, then agent 1 replays through the
    # same spot without any collision flag.
    a = scripted_object(0, hold(0, 0, 0.0, 6), goal=(0.0, 0.0))
    b_poses = [(-8.0 + 2.0 * t, 0.0, 0.0) for t in range(6)]
    b = scripted_object(1, b_poses, goal=(100, 0), force_replay=True)
    w = build_world([a, b], cfg=SimConfig(collision_behavior="ignore",
                                          init_mode="all_valid"))
    acts = np.zeros((1, 2))
    rew, done, info = w.step(acts)
    assert rew[0] == 1.0
    for _ in range(4):
        _, _, info = w.step(acts)
        assert not info["veh_collision"][0]


def test_invalid_replay_steps_hold_pose_and_skip_collision():
    # Replay agent is valid at t0/t1, blinks out at t2/t3 while overlapping
    # the controlled agent's path; no collision is flagged there.
    poses = [(20.0, 0, 0.0)] * 5
    ghost = scripted_object(1, poses, goal=(20, 0), force_replay=True,
                            valid=[True, True, False, False, True])
    mover = scripted_object(0, [(18.0 + t, 0, 0.0) for t in range(5)],
                            goal=(60, 0))
    w = build_world([mover, ghost], cfg=SimConfig(collision_behavior="ignore"))
    acts = np.zeros((1, 2))
    _, _, info1 = w.step(acts)      # t1: ghost valid, boxes overlap
    assert info1["veh_collision"][0]
    _, _, info2 = w.step(acts)      # t2: ghost invalid, held pose, exempt
    assert not info2["veh_collision"][0]
    assert w.pos[1, 0] == 20.0      # pose held
    _, _, info3 = w.step(acts)      # t3: still invalid
    assert not info3["veh_collision"][0]
    _, _, info4 = w.step(acts)      # t4: valid again
    assert info4["veh_collision"][0]


@pytest.mark.parametrize("seed", range(20))
def test_collision_events_match_brute_force_random_scene(seed):
    rng = np.random.default_rng(900 + seed)
    n = int(rng.integers(4, 40))
    objects = []
    for i in range(n):
        x, y = rng.uniform(-40, 40, size=2)
        h = rng.uniform(-np.pi, np.pi)
        kind = ("vehicle", "pedestrian", "cyclist")[rng.integers(3)]
        objects.append(scripted_object(i, hold(x, y, h, 2), kind=kind,
                                       goal=(x + 100, y),
                                       length=rng.uniform(1, 6),
                                       width=rng.uniform(0.5, 2.5)))
    roads = []
    for r in range(rng.integers(0, 4)):
        pts = np.cumsum(rng.uniform(-15, 15, size=(5, 2)), axis=0)
        roads.append(RoadElement(id=r, kind="road_edge",
                                 geometry=[Vec2(*p) for p in pts]))
    w = build_world(objects, roads=roads,
                    cfg=SimConfig(collision_behavior="ignore"))
    w.step(np.zeros((w.n_controlled, 2)))

    edge_a = w.seg_a[w.seg_is_edge] if len(w.seg_a) else np.zeros((0, 2))
    edge_b = w.seg_b[w.seg_is_edge] if len(w.seg_b) else np.zeros((0, 2))
    eligible = w.present & ~w.removed
    offroad_elig = eligible & (w.kind != 1)
    brute_col, brute_off = collision_events_brute(
        w.pos, w.heading, w.half_l, w.half_w, eligible, edge_a, edge_b,
        offroad_elig)
    assert (w.collided_now == brute_col).all()
    assert (w.offroad_now == brute_off).all()


# ---------------------------------------------------------------------------
# initialization modes
# ---------------------------------------------------------------------------

def test_nontrivial_init_filters_parked_agents():
    parked = scripted_object(0, hold(0, 0, 0.0, 3), goal=(1.0, 0.0))
    mover = scripted_object(1, hold(10, 0, 0.0, 3), goal=(50.0, 0.0))
    w = build_world([parked, mover],
                    cfg=SimConfig(init_mode="all_nontrivial"))
    assert w.controlled_ids.tolist() == [1]


def test_all_nontrivial_threshold_is_two_meters():
    at_19 = scripted_object(0, hold(0, 0, 0.0, 3), goal=(1.9, 0.0))
    at_25 = scripted_object(1, hold(10, 0, 0.0, 3), goal=(12.5, 0.0))
    w = build_world([at_19, at_25])
    assert w.controlled_ids.tolist() == [1]


def test_all_valid_init_includes_parked():
    parked = scripted_object(0, hold(0, 0, 0.0, 3), goal=(1.0, 0.0))
    mover = scripted_object(1, hold(10, 0, 0.0, 3), goal=(50.0, 0.0))
    w = build_world([parked, mover], cfg=SimConfig(init_mode="all_valid"))
    assert w.controlled_ids.tolist() == [0, 1]


def test_force_replay_never_controlled():
    obj = scripted_object(0, hold(0, 0, 0.0, 3), goal=(50, 0.0),
                          force_replay=True)
    for mode in ("all_nontrivial", "all_valid"):
        w = build_world([obj], cfg=SimConfig(init_mode=mode))
        assert w.n_controlled == 0


def test_max_controlled_truncates_lowest_ids_first():
    objs = [scripted_object(i, hold(10.0 * i, 0, 0.0, 3),
                            goal=(10.0 * i + 30, 0)) for i in range(6)]
    w = build_world(objs, cfg=SimConfig(max_controlled_per_world=3))
    assert w.controlled_ids.tolist() == [0, 1, 2]


def test_no_controllable_agents_warns():
    parked = scripted_object(0, hold(0, 0, 0.0, 3), goal=(0.5, 0.0))
    with pytest.warns(UserWarning):
        build_world([parked])


# ---------------------------------------------------------------------------
# replay fidelity and episode horizon
# ---------------------------------------------------------------------------

def test_replay_reproduces_logged_poses_exactly():
    p = preprocess(generate_synthetic(
        SyntheticSpec("intersection", n_agents=8, seed=13)))
    cfg = SimConfig(max_controlled_per_world=0)
    w = World(p, cfg)
    base = p.base
    for t in range(1, base.num_steps):
        w.step(None)
        for i, o in enumerate(base.objects):
            st = o.states[t]
            if not st.valid:
                continue
            assert w.pos[i, 0] == st.position.x
            assert w.pos[i, 1] == st.position.y
            assert w.heading[i] == st.heading


def test_episode_ends_at_num_steps():
    p = preprocess(generate_synthetic(
        SyntheticSpec("straight_road", n_agents=2, seed=1)))
    w = World(p, SimConfig())
    for t in range(p.base.num_steps - 1):
        _, done, _ = w.step(None)
        assert w.t == t + 1
    assert not w.episode_over or done.all()
    _, done, _ = w.step(None)
    assert w.t == p.base.num_steps
    assert w.episode_over and done.all()


def test_reset_restores_initial_state():
    p = preprocess(generate_synthetic(
        SyntheticSpec("straight_road", n_agents=4, seed=8)))
    w = World(p, SimConfig())
    pos0 = w.pos.copy()
    rng = np.random.default_rng(1)
    for _ in range(10):
        w.step(rng.uniform(-1, 1, (w.n_controlled, 2)))
    w.reset()
    assert (w.pos == pos0).all()
    assert w.t == 0 and not w.episode_over
    assert not w.done.any() and not w.removed.any()


# ---------------------------------------------------------------------------
# SimBatch
# ---------------------------------------------------------------------------

def test_batch_shapes_and_agent_index(straight_prepared):
    batch = init_batch([straight_prepared] * 3, SimConfig())
    per = straight_prepared.stats.n_controllable
    assert batch.n_controlled == 3 * per
    assert batch.observations.shape == (3 * per, obs_width(batch.cfg.obs))
    assert batch.agent_index[0] == (0, 0)
    assert batch.agent_index[per] == (1, 0)
    batch.close()


def test_batch_action_count_mismatch(straight_prepared):
    batch = init_batch([straight_prepared], SimConfig())
    with pytest.raises(ActionCountMismatch):
        batch.step(np.zeros((batch.n_controlled + 1, 2)))
    batch.close()


def test_batch_of_identical_worlds_stays_identical(straight_prepared):
    batch = init_batch([straight_prepared] * 8, SimConfig())
    rng = np.random.default_rng(3)
    per = batch.offsets[1]
    for _ in range(20):
        acts = np.tile(rng.uniform(-1, 1, (per, 2)), (8, 1))
        out = batch.step(acts)
        first = out.observations[:per]
        for k in range(1, 8):
            assert (out.observations[k * per:(k + 1) * per] == first).all()
    batch.close()


def test_world_independence_batch_vs_solo(straight_prepared,
                                          intersection_prepared):
    cfg = SimConfig()
    batch = init_batch([straight_prepared, intersection_prepared], cfg)
    rng = np.random.default_rng(7)
    acts = [rng.uniform(-1, 1, (batch.n_controlled, 2)) for _ in range(30)]
    batch_traj = []
    for a in acts:
        out = batch.step(a)
        batch_traj.append((out.observations.copy(), out.rewards.copy(),
                           out.dones.copy()))
    solo0 = World(straight_prepared, cfg, world_id=0)
    solo1 = World(intersection_prepared, cfg, world_id=1)
    sl0 = slice(0, batch.offsets[1])
    sl1 = slice(batch.offsets[1], batch.offsets[2])
    o0 = np.zeros((solo0.n_controlled, obs_width(cfg.obs)))
    o1 = np.zeros((solo1.n_controlled, obs_width(cfg.obs)))
    for t, a in enumerate(acts):
        r0, d0, _ = solo0.step(a[sl0], obs_out=o0)
        r1, d1, _ = solo1.step(a[sl1], obs_out=o1)
        obs, rew, done = batch_traj[t]
        assert (obs[sl0] == o0).all() and (obs[sl1] == o1).all()
        assert (rew[sl0] == r0).all() and (rew[sl1] == r1).all()
        assert (done[sl0] == d0).all() and (done[sl1] == d1).all()
    batch.close()


def run_batch_trajectory(prepared, n_workers, steps=25, n_worlds=8, seed=42):
    batch = init_batch([prepared] * n_worlds, SimConfig(), n_workers=n_workers)
    rng = np.random.default_rng(seed)
    frames = []
    for _ in range(steps):
        out = batch.step(rng.uniform(-1, 1, (batch.n_controlled, 2)))
        frames.append((out.observations.copy(), out.rewards.copy(),
                       out.dones.copy(),
                       {k: v.copy() for k, v in out.info.items()}))
    batch.close()
    return frames


def test_bitwise_determinism_across_worker_counts(straight_prepared):
    base = run_batch_trajectory(straight_prepared, n_workers=1)
    for workers in (2, 4):
        other = run_batch_trajectory(straight_prepared, n_workers=workers)
        for (o1, r1, d1, i1), (o2, r2, d2, i2) in zip(base, other):
            assert (o1 == o2).all()
            assert (r1 == r2).all()
            assert (d1 == d2).all()
            for k in i1:
                assert (i1[k] == i2[k]).all()


def test_two_batches_same_seed_identical(straight_prepared):
    a = run_batch_trajectory(straight_prepared, n_workers=1)
    b = run_batch_trajectory(straight_prepared, n_workers=1)
    for (o1, r1, d1, _), (o2, r2, d2, _) in zip(a, b):
        assert (o1 == o2).all() and (r1 == r2).all() and (d1 == d2).all()


def test_partial_reset_leaves_other_worlds_alone(straight_prepared):
    batch = init_batch([straight_prepared] * 4, SimConfig())
    rng = np.random.default_rng(5)
    for _ in range(10):
        batch.step(rng.uniform(-1, 1, (batch.n_controlled, 2)))
    before = batch.observations.copy()
    world2 = batch.worlds[2]
    t_before = [w.t for w in batch.worlds]
    batch.reset(world_ids=[2])
    assert world2.t == 0
    assert [w.t for w in batch.worlds] == [t_before[0], t_before[1], 0,
                                           t_before[3]]
    sl = batch._slice(2)
    outside = np.ones(batch.n_controlled, dtype=bool)
    outside[sl] = False
    assert (batch.observations[outside] == before[outside]).all()
    batch.close()


def test_replay_policy_reaches_goals(straight_prepared):
    batch = init_batch([straight_prepared], SimConfig())
    for _ in range(straight_prepared.base.num_steps):
        out = batch.step(None)
    assert out.dones.all()
    m = batch.compute_metrics()
    assert m.goal_rate == 1.0
    assert m.veh_collision_rate == 0.0
    batch.close()


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def test_metrics_all_goals():
    infos = [EpisodeInfo("s", 0, 4, 4, 0, 0)]
    m = compute_metrics(infos)
    assert (m.goal_rate, m.veh_collision_rate, m.offroad_rate) == (1, 0, 0)


def test_metrics_counting():
    infos = [EpisodeInfo("s", 0, 4, 3, 1, 0)]
    m = compute_metrics(infos)
    assert m.goal_rate == 0.75
    assert m.veh_collision_rate == 0.25


def test_metrics_aggregate_over_episodes():
    infos = [EpisodeInfo("a", 0, 2, 2, 0, 0), EpisodeInfo("b", 1, 2, 0, 2, 2)]
    m = compute_metrics(infos)
    assert m.goal_rate == 0.5
    assert m.veh_collision_rate == 0.5
    assert m.offroad_rate == 0.5
    assert m.episodes == 2


def test_metrics_requires_episodes():
    with pytest.raises(ValueError):
        compute_metrics([])


# ---------------------------------------------------------------------------
# goal_seek controller
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("template,n", [("straight_road", 4),
                                        ("intersection", 4)])
def test_goal_seek_reaches_all_goals_without_collisions(template, n):
    p = preprocess(generate_synthetic(SyntheticSpec(template, n_agents=n,
                                                    seed=0)))
    w = World(p, SimConfig(collision_behavior="ignore"))
    while not w.episode_over:
        w.step(goal_seek_actions(w))
    info = w.episode_info()
    assert info.n_goal == w.n_controlled
    assert info.n_veh_collision == 0
    assert info.n_offroad == 0


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

def test_throughput_report_formula():
    r = ThroughputReport(worlds=2, steps=100, elapsed_s=0.5, total_agents=8,
                         controlled_agents=5)
    assert r.asps == 100 * 8 / 0.5
    assert r.casps == 100 * 5 / 0.5


def test_benchmark_counts_and_formula(straight_prepared):
    cfg = SimConfig()
    r = benchmark([straight_prepared], cfg, worlds=3, steps=10,
                  policy="random", n_workers=1)
    assert r.worlds == 3 and r.steps == 10
    assert r.total_agents == 3 * straight_prepared.stats.n_objects
    assert r.controlled_agents == 3 * straight_prepared.stats.n_controllable
    assert abs(r.asps - 10 * r.total_agents / r.elapsed_s) < 1e-9
    assert r.casps <= r.asps + 1e-12


def test_benchmark_policies_run(straight_prepared):
    cfg = SimConfig()
    for policy in ("random", "constant:1:0.1", "replay"):
        r = benchmark([straight_prepared], cfg, worlds=2, steps=5,
                      policy=policy, n_workers=1)
        assert r.asps > 0


def test_benchmark_parallel_matches_agent_counts(straight_prepared):
    cfg = SimConfig()
    r = benchmark([straight_prepared], cfg, worlds=4, steps=5,
                  policy="replay", n_workers=2)
    assert r.total_agents == 4 * straight_prepared.stats.n_objects


# ---------------------------------------------------------------------------
# config file, CSV rows, head rotation
# ---------------------------------------------------------------------------

def test_sim_config_from_file(tmp_path):
    path = tmp_path / "sim.cfg"
    path.write_text(
        "# engine settings\n"
        "dynamics = invertible\n"
        "goal_tolerance = 3.5\n"
        "collision_behavior = remove_agent\n"
        "init_mode = all_valid\n"
        "max_controlled_per_world = 4\n"
        "seed = 9\n"
        "accel_bounds = -3,3\n"
        "mode = lidar\n"
        "n_rays = 32\n"
        "max_range = 42.0\n")
    cfg = SimConfig.from_file(str(path))
    assert cfg.dynamics == "invertible"
    assert cfg.goal_tolerance == 3.5
    assert cfg.collision_behavior == "remove_agent"
    assert cfg.init_mode == "all_valid"
    assert cfg.max_controlled_per_world == 4
    assert cfg.seed == 9
    assert cfg.accel_bounds == (-3.0, 3.0)
    assert cfg.obs.mode == "lidar" and cfg.obs.n_rays == 32
    assert cfg.obs.max_range == 42.0


def test_metrics_and_bench_csv_rows():
    from drivesim.engine import (BENCH_CSV_HEADER, METRICS_CSV_HEADER,
                                 bench_csv_row, metrics_csv_row)
    info = EpisodeInfo("scene", 0, 4, 3, 1, 0)
    row = metrics_csv_row(info, episode=2)
    assert METRICS_CSV_HEADER.count(",") == row.count(",")
    assert row == "scene,2,4,0.75,0.25,0.0"
    r = ThroughputReport(worlds=1, steps=10, elapsed_s=2.0, total_agents=4,
                         controlled_agents=2)
    assert BENCH_CSV_HEADER.count(",") == bench_csv_row(r).count(",")


def test_casps_below_asps_with_parked_agents():
    p = preprocess(generate_synthetic(
        SyntheticSpec("parking_lot", n_agents=9, seed=0)))
    r = benchmark([p], SimConfig(), worlds=2, steps=5, policy="replay",
                  n_workers=1)
    assert r.controlled_agents < r.total_agents
    assert r.casps < r.asps


def test_head_rotation_action_integrates_and_clamps():
    cfg = SimConfig(obs=ObsConfig(mode="view_cone", n_rays=8))
    obj = scripted_object(0, hold(0, 0, 0.0, 40), goal=(100, 0))
    w = build_world([obj], cfg=cfg)
    acts = np.array([[0.0, 0.0, 1.0]])  # 1 rad/s head rotation
    w.step(acts)
    assert abs(w.head_angle[0] - 0.1) < 1e-12
    for _ in range(30):
        w.step(acts)
    assert w.head_angle[0] == pytest.approx(math.pi / 2)  # clamped
