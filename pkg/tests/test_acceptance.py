"""End-to-end acceptance gate.

Each test exercises one shipping requirement, prints exactly one
"ACCEPTANCE <n> <label>: PASS|FAIL [measurements]" line, and then asserts.
The batch-based checks run the real benchmark at full trial counts, so this
module dominates the suite's runtime.
"""

import json
import math
import time

import numpy as np

from spsbench import cli
from spsbench.geometry import PHI_MAX, Obstacle, ObstacleKind, vec3
from spsbench.grid import GridConfig, sample_candidates_grid
from spsbench.kernels import (
    DEFAULT_WINDOW_US,
    Event,
    EventWindow,
    attention_forward,
    attention_gradients,
    attention_weights,
    encode_bem,
    penalty,
    total_loss,
)
from spsbench.scene import Box, Scene, SceneSpec, SceneType, default_scene_spec
from spsbench.simulator import UavState, run_batch
from spsbench.sps import PlannerConfig, sample_candidates_sps, select_plan


def verdict(num, label, ok, detail):
    print(f"ACCEPTANCE {num} {label}: {'PASS' if ok else 'FAIL'} [{detail}]")
    assert ok, f"acceptance {num} ({label}): {detail}"


def all_default_specs():
    return [default_scene_spec(t) for t in
            (SceneType.FOREST, SceneType.STATIC_SPHERES, SceneType.MIXED_SPHERES)]


def test_criterion_1_candidate_counts():
    state = UavState(vec3(0, 0, 0), vec3(13, 0, 0))
    goal = vec3(60, 0, 0)
    sps = len(sample_candidates_sps(state, goal, PlannerConfig(v_set=13.0, n=16)))
    grid = len(sample_candidates_grid(state, goal, GridConfig(v_set=13.0, n=16)))
    ok = sps == 32 and grid == 256 and sps / grid == 0.125
    verdict(1, "candidate counts at n=16", ok,
            f"sps={sps} grid={grid} ratio={sps / grid}")


def test_criterion_2_candidate_scaling():
    state = UavState(vec3(0, 0, 0), vec3(13, 0, 0))
    goal = vec3(60, 0, 0)
    ns = np.array([8, 16, 32, 64], dtype=float)
    started = time.monotonic()
    sps = np.array([
        len(sample_candidates_sps(state, goal, PlannerConfig(v_set=13.0, n=int(n))))
        for n in ns
    ], dtype=float)
    grid = np.array([
        len(sample_candidates_grid(state, goal, GridConfig(v_set=13.0, n=int(n))))
        for n in ns
    ], dtype=float)
    elapsed = time.monotonic() - started

    def rel_residual(counts, basis):
        c = float(counts @ basis) / float(basis @ basis)
        return float(np.abs(c * basis - counts).max()) / float(counts.mean())

    sps_resid = rel_residual(sps, ns)          # linear growth
    grid_resid = rel_residual(grid, ns * ns)   # quadratic growth
    ok = sps_resid < 0.01 and grid_resid < 0.01 and elapsed < 1.0
    verdict(2, "candidate growth linear vs quadratic", ok,
            f"sps_resid={sps_resid:.3g} grid_resid={grid_resid:.3g} elapsed={elapsed:.2f}s")


def test_criterion_3_success_rates_on_matched_seeds():
    started = time.monotonic()
    batch = run_batch(all_default_specs(), (13.0, 17.0), ("sps", "grid"),
                      trials_per_cell=100, base_seed=7)
    elapsed = time.monotonic() - started
    sr = {(r["scene_type"], r["speed"], r["planner"]): r["success_rate"]
          for r in batch.summary}

    scenes = ("forest", "static_spheres", "mixed_spheres")
    never_worse = all(
        sr[(scene, speed, "sps")] >= sr[(scene, speed, "grid")]
        for scene in scenes for speed in (13.0, 17.0)
    )
    forest_17_delta = sr[("forest", 17.0, "sps")] - sr[("forest", 17.0, "grid")]
    static_17_strict = sr[("static_spheres", 17.0, "sps")] > sr[("static_spheres", 17.0, "grid")]
    all_17_positive = all(sr[(s, 17.0, "sps")] > sr[(s, 17.0, "grid")] for s in scenes)

    ok = (never_worse and forest_17_delta >= 0.10 and static_17_strict
          and all_17_positive and elapsed < 300.0)
    pairs = " ".join(
        f"{scene}@{speed:g}:{sr[(scene, speed, 'sps')]:.2f}/{sr[(scene, speed, 'grid')]:.2f}"
        for scene in scenes for speed in (13.0, 17.0)
    )
    verdict(3, "success rates, 100 matched seeds", ok,
            f"{pairs} forest@17_delta={forest_17_delta:+.2f} elapsed={elapsed:.0f}s")


def test_criterion_4_smoother_flight_at_speed():
    started = time.monotonic()
    batch = run_batch([default_scene_spec(SceneType.STATIC_SPHERES)], (17.0,),
                      ("sps", "grid"), trials_per_cell=100, base_seed=7)
    elapsed = time.monotonic() - started
    rows = {r["planner"]: r for r in batch.summary}
    mean_red = 1.0 - rows["sps"]["mean_accel"] / rows["grid"]["mean_accel"]
    max_red = 1.0 - rows["sps"]["max_accel"] / rows["grid"]["max_accel"]
    ok = mean_red >= 0.30 and max_red >= 0.30 and elapsed < 120.0
    verdict(4, "acceleration reduction static@17", ok,
            f"mean_reduction={mean_red:.1%} max_reduction={max_red:.1%} elapsed={elapsed:.0f}s")


def test_criterion_5_loss_and_event_mask_identities():
    penalty_contact = abs(penalty(0.0) - 2.0)
    penalty_beyond = abs(penalty(0.51))
    worked = abs(total_loss((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), 0.5).total - 1.53388)

    rng = np.random.default_rng(101)
    mask_err = 0
    for _ in range(100):
        height, width = 24, 32
        events = tuple(
            Event(int(rng.integers(0, width)), int(rng.integers(0, height)),
                  int(rng.integers(0, DEFAULT_WINDOW_US)), int(rng.choice((-1, 1))))
            for _ in range(1000)
        )
        window = EventWindow(events, 0, DEFAULT_WINDOW_US, height, width)
        sums = {}
        for e in events:
            sums[(e.y, e.x)] = sums.get((e.y, e.x), 0) + e.p
        oracle = np.zeros((height, width), dtype=int)
        for (y, x), s in sums.items():
            oracle[y, x] = int(s != 0)
        mask_err = max(mask_err, int(np.abs(encode_bem(window).astype(int) - oracle).max()))

    ok = (penalty_contact <= 1e-12 and penalty_beyond <= 1e-12
          and worked <= 1e-4 and mask_err == 0)
    verdict(5, "loss terms and event-mask oracle", ok,
            f"penalty0_err={penalty_contact:.1e} cutoff_err={penalty_beyond:.1e} "
            f"loss_err={worked:.1e} mask_err={mask_err}")


def test_criterion_6_attention_numerics():
    rng = np.random.default_rng(202)
    fwd_err = sum_err = 0.0
    for _ in range(20):
        q = rng.standard_normal((8, 16))
        k = rng.standard_normal((8, 16))
        v = rng.standard_normal((8, 16))
        out = attention_forward(q, k, v)
        ql, kl, vl = (m.astype(np.longdouble) for m in (q, k, v))
        s = (ql.T @ kl) / np.sqrt(np.longdouble(8))
        e = np.exp(s)
        ref = np.asarray(vl @ (e / e.sum(axis=1, keepdims=True)).T, dtype=float)
        fwd_err = max(fwd_err, float(np.abs(out - ref).max() / np.abs(ref).max()))
        sum_err = max(sum_err, float(np.abs(attention_weights(q, k).sum(axis=1) - 1.0).max()))

    h = 1e-6
    grad_err = 0.0
    for _ in range(20):
        mats = [rng.standard_normal((4, 5)) for _ in range(3)]
        upstream = rng.standard_normal((4, 5))
        analytic = attention_gradients(*mats, upstream)
        for which in range(3):
            numeric = np.zeros((4, 5))
            for idx in np.ndindex(4, 5):
                orig = mats[which][idx]
                mats[which][idx] = orig + h
                up = float((upstream * attention_forward(*mats)).sum())
                mats[which][idx] = orig - h
                down = float((upstream * attention_forward(*mats)).sum())
                mats[which][idx] = orig
                numeric[idx] = (up - down) / (2 * h)
            scale = max(float(np.abs(numeric).max()), 1e-12)
            grad_err = max(grad_err, float(np.abs(analytic[which] - numeric).max()) / scale)

    ok = fwd_err <= 1e-10 and sum_err <= 1e-12 and grad_err <= 1e-5
    verdict(6, "attention forward and gradients", ok,
            f"fwd_rel_err={fwd_err:.2e} weight_sum_err={sum_err:.2e} grad_rel_err={grad_err:.2e}")


def test_criterion_7_reproducible_runs(tmp_path):
    config = tmp_path / "bench.json"
    config.write_text(json.dumps({
        "version": 1,
        "speeds": [5.0, 9.0, 13.0, 17.0],
        "planners": ["sps", "grid"],
        "trials_per_cell": 5,
        "base_seed": 7,
    }))
    elapsed = []
    for name in ("a", "b"):
        started = time.monotonic()
        assert cli.main(["run", "--config", str(config), "--out", str(tmp_path / name)]) == 0
        elapsed.append(time.monotonic() - started)
    records_equal = ((tmp_path / "a" / "records.jsonl").read_bytes()
                     == (tmp_path / "b" / "records.jsonl").read_bytes())
    summary_equal = ((tmp_path / "a" / "summary.csv").read_bytes()
                     == (tmp_path / "b" / "summary.csv").read_bytes())
    ok = records_equal and summary_equal and max(elapsed) < 300.0
    verdict(7, "identical reruns, byte for byte", ok,
            f"records_equal={records_equal} summary_equal={summary_equal} "
            f"elapsed={elapsed[0]:.0f}s/{elapsed[1]:.0f}s")


def test_criterion_8_single_threshold_relaxation():
    # one sphere ahead sized so the best candidate clears it by exactly 0.9 m:
    # under d_safety = 1.0 the planner must relax the threshold exactly once
    radius = math.sqrt(89.0 - 80.0 * math.cos(PHI_MAX)) - 0.9
    scene = Scene(
        spec=SceneSpec(SceneType.STATIC_SPHERES, obstacle_count=0),
        start=vec3(0, 0, 0),
        goal=vec3(60, 0, 0),
        obstacles=[Obstacle(ObstacleKind.STATIC_SPHERE, (8.0, 0.0, 0.0), radius)],
        bounds=Box(vec3(-50, -50, -50), vec3(110, 50, 50)),
    )
    cfg = PlannerConfig(v_set=5.0, n=4, d_safety=1.0, relaxation_step=0.2)
    res = select_plan(UavState(vec3(0, 0, 0), vec3(5, 0, 0)), scene, scene.goal, cfg)
    clearance_err = abs(res.chosen.clearance - 0.9)
    ok = (res.relaxations_applied == 1 and not res.fallback_used
          and clearance_err < 1e-9 and res.chosen.feasible)
    verdict(8, "exactly one safety relaxation", ok,
            f"relaxations={res.relaxations_applied} fallback={res.fallback_used} "
            f"clearance={res.chosen.clearance:.10f}")
