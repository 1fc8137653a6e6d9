"""Planar-grid baseline planner: sampling layout and shared selection rules."""

import math

import numpy as np
import pytest

from spsbench.geometry import Obstacle, ObstacleKind, PHI_MAX, Segment, segment_obstacle_clearance, vec3
from spsbench.grid import GridConfig, sample_candidates_grid, select_plan_grid
from spsbench.scene import Box, Scene, SceneSpec, SceneType
from spsbench.simulator import UavState
from spsbench.sps import PlannerConfig, sample_candidates_sps, score_candidate, select_plan


def open_scene(obstacles=()):
    return Scene(
        spec=SceneSpec(SceneType.STATIC_SPHERES, obstacle_count=0),
        start=vec3(0, 0, 0),
        goal=vec3(60, 0, 0),
        obstacles=list(obstacles),
        bounds=Box(vec3(-100, -100, -100), vec3(200, 100, 100)),
    )


def corridor_scene():
    return Scene(
        spec=SceneSpec(SceneType.STATIC_SPHERES, obstacle_count=0),
        start=vec3(0, 10, 5),
        goal=vec3(60, 10, 5),
        obstacles=[],
        bounds=Box(vec3(0, 0, 0), vec3(60, 20, 10)),
    )


def test_config_validation():
    GridConfig(v_set=13.0)
    GridConfig(v_set=13.0, n=2)
    with pytest.raises(ValueError):
        GridConfig(v_set=0.0)
    with pytest.raises(ValueError):
        GridConfig(v_set=13.0, n=1)


def test_candidate_counts():
    state = UavState(vec3(0, 0, 0), vec3(13, 0, 0))
    goal = vec3(60, 0, 0)
    assert len(sample_candidates_grid(state, goal, GridConfig(v_set=13.0, n=16))) == 256
    assert len(sample_candidates_grid(state, goal, GridConfig(v_set=13.0, n=2))) == 4
    counts = [
        len(sample_candidates_grid(state, goal, GridConfig(v_set=13.0, n=n)))
        for n in (4, 8, 16, 32)
    ]
    assert counts == [16, 64, 256, 1024]


def test_candidate_count_ratio_against_spherical():
    state = UavState(vec3(0, 0, 0), vec3(13, 0, 0))
    goal = vec3(60, 0, 0)
    sps = len(sample_candidates_sps(state, goal, PlannerConfig(v_set=13.0, n=16)))
    grid = len(sample_candidates_grid(state, goal, GridConfig(v_set=13.0, n=16)))
    assert sps / grid == 0.125


def test_two_by_two_grid_hits_envelope_corners():
    v_set = 13.0
    extent = v_set * math.tan(PHI_MAX)
    state = UavState(vec3(0, 0, 0), vec3(v_set, 0, 0))
    cands = sample_candidates_grid(state, vec3(60, 0, 0), GridConfig(v_set=v_set, n=2))
    got = sorted((round(c.waypoint[1], 9), round(c.waypoint[2], 9)) for c in cands)
    want = sorted(
        (round(sy * extent, 9), round(sz * extent, 9)) for sy in (-1, 1) for sz in (-1, 1)
    )
    assert got == want
    for c in cands:
        assert c.waypoint[0] == pytest.approx(v_set)
        # corner waypoints sit beyond the sphere radius
        assert np.linalg.norm(c.waypoint) > v_set


def test_row_major_ordering():
    v_set = 10.0
    extent = v_set * math.tan(PHI_MAX)
    offsets = np.linspace(-extent, extent, 4)
    state = UavState(vec3(0, 0, 0), vec3(v_set, 0, 0))
    cands = sample_candidates_grid(state, vec3(60, 0, 0), GridConfig(v_set=v_set, n=4))
    for i, c in enumerate(cands):
        assert c.waypoint[1] == pytest.approx(offsets[i % 4], abs=1e-12)  # lateral fastest
        assert c.waypoint[2] == pytest.approx(offsets[i // 4], abs=1e-12)


def test_grid_plane_faces_goal_not_velocity():
    # unlike the spherical sampler, sideways motion does not tilt the plane
    cfg = GridConfig(v_set=10.0, n=4)
    goal = vec3(60, 0, 0)
    state = UavState(vec3(0, 0, 0), vec3(0, 10, 0))
    for c in sample_candidates_grid(state, goal, cfg):
        assert c.waypoint[0] == pytest.approx(10.0)
    sps_cfg = PlannerConfig(v_set=10.0, n=16)
    tilted = sample_candidates_sps(state, goal, sps_cfg)
    assert all(c.waypoint[1] > 9.0 for c in tilted)


def test_empty_scene_picks_center_most_candidate():
    scene = corridor_scene()
    cfg = GridConfig(v_set=13.0, n=16)
    res = select_plan_grid(UavState(scene.start.copy(), vec3(0, 0, 0)), scene, scene.goal, cfg)
    assert res.candidates_evaluated == 256
    assert res.relaxations_applied == 0 and not res.fallback_used
    # the four innermost offsets (+-extent/15 in each axis) tie on score; the
    # winner must be one of them
    delta = 13.0 * math.tan(PHI_MAX) / 15.0
    assert abs(abs(res.chosen.waypoint[1] - 10.0) - delta) < 1e-9
    assert abs(abs(res.chosen.waypoint[2] - 5.0) - delta) < 1e-9
    min_phi = math.atan2(math.hypot(delta, delta), 13.0)
    assert res.chosen.phi == pytest.approx(min_phi, rel=1e-9)
    assert np.linalg.norm(res.command) == pytest.approx(13.0, rel=1e-9)


def brute_force_grid_choice(state, scene, goal, cfg):
    """Exhaustive enumeration with scalar clearances and scoring."""
    cands = sample_candidates_grid(state, goal, cfg)
    for c in cands:
        seg = Segment(state.position, c.waypoint, duration=1.0)
        c.clearance = min(
            (segment_obstacle_clearance(seg, o, cfg.time_samples) for o in scene.obstacles),
            default=math.inf,
        )
        scorer = PlannerConfig(
            v_set=cfg.v_set,
            d_safety=cfg.d_safety,
            relaxation_step=cfg.relaxation_step,
            clearance_norm=cfg.clearance_norm,
        )
        score_candidate(c, state, goal, scorer)
    relax = 0
    while True:
        threshold = max(0.0, cfg.d_safety - relax * cfg.relaxation_step)
        feasible = [i for i, c in enumerate(cands) if c.clearance > threshold]
        if feasible:
            best = min(feasible, key=lambda i: (-round(cands[i].score, 12), abs(cands[i].phi), i))
            return cands[best], relax, False
        if threshold == 0.0:
            best = min(
                range(len(cands)),
                key=lambda i: (-round(cands[i].clearance, 12), abs(cands[i].phi), i),
            )
            return cands[best], relax, True
        relax += 1


def test_blocked_center_matches_brute_force():
    scene = open_scene([Obstacle(ObstacleKind.STATIC_SPHERE, (8.0, 0.0, 0.0), 1.0)])
    cfg = GridConfig(v_set=5.0, n=16)
    state = UavState(vec3(0, 0, 0), vec3(5, 0, 0))
    res = select_plan_grid(state, scene, scene.goal, cfg)
    oracle, relax, fallback = brute_force_grid_choice(
        UavState(vec3(0, 0, 0), vec3(5, 0, 0)), scene, scene.goal, cfg
    )
    np.testing.assert_allclose(res.chosen.waypoint, oracle.waypoint, atol=1e-9)
    assert (res.relaxations_applied, res.fallback_used) == (relax, fallback)
    # the chosen path must actually steer off the blocked center line
    assert abs(res.chosen.waypoint[1]) + abs(res.chosen.waypoint[2]) > 0.1


def test_random_scenes_match_brute_force():
    # the grid score/selection path must agree with the scalar oracle on
    # score-based selection, relaxation count, and fallback flag
    rng = np.random.default_rng(91)
    cfg = GridConfig(v_set=7.0, n=8)
    for trial in range(10):
        obstacles = [
            Obstacle(
                ObstacleKind.STATIC_SPHERE,
                vec3(rng.uniform(2, 12), rng.uniform(-4, 4), rng.uniform(-4, 4)),
                float(rng.uniform(0.4, 1.8)),
            )
            for _ in range(6)
        ]
        scene = open_scene(obstacles)
        vel = vec3(7, 0, 0) if trial % 2 else vec3(0, 0, 0)
        res = select_plan_grid(UavState(vec3(0, 0, 0), vel), scene, scene.goal, cfg)
        oracle, relax, fallback = brute_force_grid_choice(
            UavState(vec3(0, 0, 0), vel), scene, scene.goal, cfg
        )
        np.testing.assert_allclose(res.chosen.waypoint, oracle.waypoint, atol=1e-9)
        assert (res.relaxations_applied, res.fallback_used) == (relax, fallback)


def test_command_is_normalized_to_speed():
    # off-center waypoints are farther than v_set, but the command is not
    rng = np.random.default_rng(17)
    scene = open_scene([Obstacle(ObstacleKind.STATIC_SPHERE, (8.0, 0.0, 0.0), 2.5)])
    for _ in range(5):
        v_set = float(rng.uniform(3.0, 18.0))
        cfg = GridConfig(v_set=v_set, n=16)
        res = select_plan_grid(
            UavState(vec3(0, 0, 0), vec3(v_set, 0, 0)), scene, scene.goal, cfg
        )
        assert np.linalg.norm(res.command) == pytest.approx(v_set, rel=1e-9)


def test_grid_plan_is_deterministic():
    scene = open_scene([Obstacle(ObstacleKind.STATIC_SPHERE, (8.0, 0.5, 0.0), 1.3)])
    cfg = GridConfig(v_set=9.0, n=16)
    a = select_plan_grid(UavState(vec3(0, 0, 0), vec3(9, 0, 0)), scene, scene.goal, cfg)
    b = select_plan_grid(UavState(vec3(0, 0, 0), vec3(9, 0, 0)), scene, scene.goal, cfg)
    assert a.chosen.waypoint.tobytes() == b.chosen.waypoint.tobytes()
    assert a.chosen.score == b.chosen.score
