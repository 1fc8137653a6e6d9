"""Closed-loop trial execution and matched-seed benchmark batches.

The vehicle tracks velocity commands with a first-order lag, replans every
control period, and a trial ends on goal crossing, collision, bounds exit or
time budget. Batches derive one scene seed per trial index so every planner
sees the same scene sequence.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .geometry import Vec3, unit
from .grid import GridConfig, GridPlanner
from .scene import Scene, SceneSpec, advance_obstacles, generate_scene, nearest_clearance
from .sps import PlannerConfig, SpsPlanner

OUTCOMES = ("success", "collision", "timeout", "out_of_bounds")

PLANNER_NAMES = ("sps", "grid")

#: Default time budget is this multiple of the straight-line flight time.
TIME_BUDGET_FACTOR = 3.0

TRAJECTORY_HEADER = "t,x,y,z,vx,vy,vz,ax,ay,az"

#: Fields every record row carries (schema of records.jsonl lines).
RECORD_FIELDS = (
    "scene_type",
    "speed",
    "planner",
    "trial",
    "seed",
    "outcome",
    "flight_time",
    "path_length",
    "min_clearance",
    "mean_accel",
    "max_accel",
    "candidates_evaluated",
    "relaxations",
    "fallbacks",
    "replans",
)

SUMMARY_FIELDS = (
    "scene_type",
    "speed",
    "planner",
    "success_rate",
    "mean_accel",
    "max_accel",
    "mean_candidates",
)


@dataclass(eq=False)
class UavState:
    position: Vec3
    velocity: Vec3
    time: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)


@dataclass(frozen=True)
class TrialConfig:
    v_set: float
    dt: float = 0.05
    control_period: float = 0.05
    tau: float = 0.2
    uav_radius: float = 0.3
    time_budget: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.v_set) and self.v_set > 0.0):
            raise ValueError("v_set must be positive")
        if not (0.0 < self.dt <= self.control_period):
            raise ValueError("need 0 < dt <= control_period")
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        if self.uav_radius <= 0.0:
            raise ValueError("uav_radius must be positive")
        if self.time_budget is not None and self.time_budget <= 0.0:
            raise ValueError("time_budget must be positive when given")


@dataclass(eq=False)
class TrialRecord:
    """Everything measured in one trial; trajectory rows are t,x,y,z,vx,vy,vz,ax,ay,az."""

    outcome: str
    trajectory: np.ndarray
    min_clearance: float
    mean_accel: float
    max_accel: float
    candidates_evaluated_total: int
    relaxations_total: int
    seed: int
    replans: int = 0
    fallbacks: int = 0
    flight_time: float = 0.0
    path_length: float = 0.0


def step_dynamics(state: UavState, command, dt: float, tau: float) -> tuple[UavState, Vec3]:
    """One integration step of first-order velocity tracking.

    v' = v + (dt / tau) (command - v); position integrates v'; the reported
    acceleration is (v' - v) / dt.
    """
    if dt <= 0.0 or tau <= 0.0:
        raise ValueError("dt and tau must be positive")
    cmd = np.asarray(command, dtype=float)
    v_new = state.velocity + (dt / tau) * (cmd - state.velocity)
    accel = (v_new - state.velocity) / dt
    p_new = state.position + v_new * dt
    return UavState(p_new, v_new, state.time + dt), accel


def run_trial(scene: Scene, planner, cfg: TrialConfig, seed: int = 0) -> TrialRecord:
    """Fly one scene to an outcome. Deterministic: no randomness beyond the scene.

    The vehicle starts already cruising at v_set toward the goal, so the
    recorded accelerations measure in-flight corrections rather than a launch
    transient. The planner is invoked every control period (first at t=0);
    obstacles advance with the same dt as the vehicle; collision means the
    nearest clearance dropped below the vehicle radius.
    """
    v0 = cfg.v_set * unit(np.asarray(scene.goal, dtype=float) - scene.start)
    state = UavState(scene.start.copy(), v0, 0.0)
    goal_x = float(scene.goal[0])
    straight_time = (goal_x - float(scene.start[0])) / cfg.v_set
    budget = cfg.time_budget if cfg.time_budget is not None else TIME_BUDGET_FACTOR * straight_time
    max_steps = math.ceil(budget / cfg.dt - 1e-9)
    steps_per_replan = max(1, round(cfg.control_period / cfg.dt))

    rows = [(0.0, *state.position, *state.velocity, 0.0, 0.0, 0.0)]
    min_clear = nearest_clearance(state.position, scene)[0]
    command = np.zeros(3)
    candidates_total = relaxations_total = replans = fallbacks = 0
    outcome = "timeout"
    cur = scene

    for i in range(max_steps):
        if i % steps_per_replan == 0:
            result = planner.plan(state, cur, cur.goal)
            command = result.command
            candidates_total += result.candidates_evaluated
            relaxations_total += result.relaxations_applied
            replans += 1
            fallbacks += int(result.fallback_used)
        state, accel = step_dynamics(state, command, cfg.dt, cfg.tau)
        cur = advance_obstacles(cur, cfg.dt)
        clear, _ = nearest_clearance(state.position, cur)
        min_clear = min(min_clear, clear)
        rows.append((state.time, *state.position, *state.velocity, *accel))
        if clear < cfg.uav_radius:
            outcome = "collision"
            break
        if state.position[0] >= goal_x:
            outcome = "success"
            break
        if not cur.bounds.contains(state.position):
            outcome = "out_of_bounds"
            break

    traj = np.array(rows)
    accel_norms = np.linalg.norm(traj[1:, 7:10], axis=1) if traj.shape[0] > 1 else np.zeros(0)
    steps = traj[:, 1:4]
    return TrialRecord(
        outcome=outcome,
        trajectory=traj,
        min_clearance=float(min_clear),
        mean_accel=float(accel_norms.mean()) if accel_norms.size else 0.0,
        max_accel=float(accel_norms.max()) if accel_norms.size else 0.0,
        candidates_evaluated_total=candidates_total,
        relaxations_total=relaxations_total,
        seed=seed,
        replans=replans,
        fallbacks=fallbacks,
        flight_time=float(traj[-1, 0]),
        path_length=float(np.linalg.norm(np.diff(steps, axis=0), axis=1).sum()),
    )


def make_planner(name: str, scene_type, v_set: float):
    if name == "sps":
        return SpsPlanner(PlannerConfig.for_scene(scene_type, v_set))
    if name == "grid":
        return GridPlanner(GridConfig(v_set=v_set))
    raise ValueError(f"unknown planner {name!r} (valid: {', '.join(PLANNER_NAMES)})")


def _round6(x: float) -> float | None:
    """Fixed 6-significant-digit rounding used for every serialized number."""
    if not math.isfinite(x):
        return None
    return float(f"{x:.6g}")


def _record_row(scene_type: str, speed: float, planner: str, trial: int, rec: TrialRecord) -> dict:
    return {
        "scene_type": scene_type,
        "speed": _round6(speed),
        "planner": planner,
        "trial": trial,
        "seed": rec.seed,
        "outcome": rec.outcome,
        "flight_time": _round6(rec.flight_time),
        "path_length": _round6(rec.path_length),
        "min_clearance": _round6(rec.min_clearance),
        "mean_accel": _round6(rec.mean_accel),
        "max_accel": _round6(rec.max_accel),
        "candidates_evaluated": rec.candidates_evaluated_total,
        "relaxations": rec.relaxations_total,
        "fallbacks": rec.fallbacks,
        "replans": rec.replans,
    }


@dataclass(eq=False)
class BatchResult:
    rows: list[dict]
    summary: list[dict]
    trajectories: dict[tuple[str, float, str, int], np.ndarray]


def _run_cell_trial(args):
    spec, speed, planner_name, trial, seed = args
    scene = generate_scene(replace(spec, seed=seed))
    planner = make_planner(planner_name, spec.scene_type, speed)
    record = run_trial(scene, planner, TrialConfig(v_set=speed), seed=seed)
    return args, record


def run_batch(
    scene_specs,
    speeds,
    planners,
    trials_per_cell: int,
    base_seed: int,
    jobs: int = 1,
    keep_trajectories: int = 0,
    progress=None,
) -> BatchResult:
    """Run every (scene, speed, planner) cell on matched seeds.

    Trial i of every cell uses scene seed base_seed + i, so planners and speeds
    are compared on identical scene sequences. Results are merged by trial
    index, so jobs > 1 changes nothing but wall time. keep_trajectories keeps
    the first N full trajectories per cell for export.
    """
    if trials_per_cell < 1:
        raise ValueError("trials_per_cell must be >= 1")
    if jobs < 1:
        raise ValueError("jobs must be >= 1")
    for name in planners:
        if name not in PLANNER_NAMES:
            raise ValueError(f"unknown planner {name!r} (valid: {', '.join(PLANNER_NAMES)})")

    tasks = [
        (spec, float(speed), planner, trial, base_seed + trial)
        for spec in scene_specs
        for speed in speeds
        for planner in planners
        for trial in range(trials_per_cell)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell_trial, tasks, chunksize=8))
    else:
        results = []
        for t in tasks:
            results.append(_run_cell_trial(t))
            if progress is not None:
                progress(len(results), len(tasks))

    rows: list[dict] = []
    trajectories: dict[tuple[str, float, str, int], np.ndarray] = {}
    for (spec, speed, planner, trial, _seed), record in results:
        scene_type = spec.scene_type.value
        rows.append(_record_row(scene_type, speed, planner, trial, record))
        if trial < keep_trajectories:
            trajectories[(scene_type, speed, planner, trial)] = record.trajectory
    return BatchResult(rows=rows, summary=summarize(rows), trajectories=trajectories)


def summarize(rows) -> list[dict]:
    """Per-cell aggregation of record rows.

    mean_accel averages the per-trial mean acceleration magnitudes; max_accel
    averages the per-trial peaks; mean_candidates is candidates per replan.
    Works from serialized (6-significant-digit) values so a summary recomputed
    from a records file matches the one written at run time byte for byte, and
    sums with math.fsum so row order cannot change the result.
    """
    cells: dict[tuple, list[dict]] = {}
    for r in rows:
        cells.setdefault((r["scene_type"], float(r["speed"]), r["planner"]), []).append(r)
    out = []
    for scene_type, speed, planner in sorted(cells):
        rs = cells[(scene_type, speed, planner)]
        n = len(rs)
        total_candidates = sum(r["candidates_evaluated"] for r in rs)
        total_replans = sum(r["replans"] for r in rs)
        out.append(
            {
                "scene_type": scene_type,
                "speed": speed,
                "planner": planner,
                "success_rate": sum(r["outcome"] == "success" for r in rs) / n,
                "mean_accel": math.fsum(r["mean_accel"] for r in rs) / n,
                "max_accel": math.fsum(r["max_accel"] for r in rs) / n,
                "mean_candidates": total_candidates / total_replans if total_replans else 0.0,
            }
        )
    return out


def comparison_deltas(summary_rows) -> list[dict]:
    """Per (scene, speed): sps-minus-grid success delta and accel reductions."""
    cells: dict[tuple, dict[str, dict]] = {}
    for r in summary_rows:
        cells.setdefault((r["scene_type"], float(r["speed"])), {})[r["planner"]] = r

    def reduction(grid_value, sps_value):
        if grid_value <= 0.0:
            return 0.0
        return 100.0 * (grid_value - sps_value) / grid_value

    out = []
    for scene_type, speed in sorted(cells):
        pair = cells[(scene_type, speed)]
        if "sps" not in pair or "grid" not in pair:
            continue
        s, g = pair["sps"], pair["grid"]
        out.append(
            {
                "scene_type": scene_type,
                "speed": speed,
                "success_rate_delta": s["success_rate"] - g["success_rate"],
                "mean_accel_reduction_pct": reduction(g["mean_accel"], s["mean_accel"]),
                "max_accel_reduction_pct": reduction(g["max_accel"], s["max_accel"]),
            }
        )
    return out


def records_to_jsonl(rows) -> str:
    return "".join(json.dumps(row, sort_keys=True) + "\n" for row in rows)


def rows_from_jsonl(text: str) -> list[dict]:
    """Parse and validate a records file; raises ValueError when unusable."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValueError(f"records line {lineno} is not valid JSON: {e}") from e
        if not isinstance(row, dict):
            raise ValueError(f"records line {lineno} is not an object")
        missing = [k for k in RECORD_FIELDS if k not in row]
        if missing:
            raise ValueError(f"records line {lineno} is missing fields: {', '.join(missing)}")
        if row["outcome"] not in OUTCOMES:
            raise ValueError(f"records line {lineno} has unknown outcome {row['outcome']!r}")
        rows.append(row)
    if not rows:
        raise ValueError("records file contains no trial rows")
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def summary_to_csv(summary_rows) -> str:
    lines = [",".join(SUMMARY_FIELDS)]
    for r in summary_rows:
        lines.append(",".join(_fmt(r[k]) for k in SUMMARY_FIELDS))
    return "\n".join(lines) + "\n"


def deltas_to_csv(delta_rows) -> str:
    fields = (
        "scene_type",
        "speed",
        "success_rate_delta",
        "mean_accel_reduction_pct",
        "max_accel_reduction_pct",
    )
    lines = [",".join(fields)]
    for r in delta_rows:
        lines.append(",".join(_fmt(r[k]) for k in fields))
    return "\n".join(lines) + "\n"


def trajectory_to_csv(traj: np.ndarray) -> str:
    lines = [TRAJECTORY_HEADER]
    for row in traj:
        lines.append(",".join(f"{v:.6g}" for v in row))
    return "\n".join(lines) + "\n"
