"""Spherical-search local planner benchmark.

Library layout:

- ``geometry``: frames, spherical coordinates, obstacle clearance queries.
- ``scene``: randomized corridor scenes (forest / static / mixed).
- ``sps``: spherical principal-direction candidate planner.
- ``grid``: dense grid-sampling baseline planner sharing the same scoring.
- ``simulator``: closed-loop trial execution and batch aggregation.
- ``kernels``: event-camera and attention reference kernels with self checks.
- ``cli``: ``spsbench`` command line entry point.
"""

from .geometry import (
    Frame,
    Obstacle,
    ObstacleKind,
    PackedObstacles,
    Segment,
    SphericalCoord,
    orthonormal_frame,
    pack_obstacles,
    point_segment_distance,
    segment_obstacle_clearance,
    spherical_to_cartesian,
    unit,
    vec3,
)
from .grid import GridConfig, GridPlanner, sample_candidates_grid, select_plan_grid
from .kernels import (
    Event,
    EventWindow,
    KernelCheck,
    LossBreakdown,
    VelocityCommand,
    attention_forward,
    attention_gradients,
    attention_weights,
    bidirectional_fuse,
    encode_bem,
    normalize_command_xy,
    penalty,
    run_kernel_checks,
    synth_events,
    total_loss,
    write_bem_pgm,
)
from .scene import (
    Scene,
    SceneGenerationError,
    SceneSpec,
    SceneType,
    advance_obstacles,
    default_scene_spec,
    generate_scene,
    nearest_clearance,
    scene_from_json,
    scene_to_json,
)
from .simulator import (
    BatchResult,
    TrialConfig,
    TrialRecord,
    UavState,
    comparison_deltas,
    run_batch,
    run_trial,
    step_dynamics,
    summarize,
)
from .sps import (
    CandidatePath,
    PlannerConfig,
    PlanResult,
    sample_candidates_sps,
    score_candidate,
    select_plan,
    SpsPlanner,
)

__version__ = "0.1.0"

__all__ = [
    "BatchResult",
    "CandidatePath",
    "Event",
    "EventWindow",
    "Frame",
    "GridConfig",
    "GridPlanner",
    "KernelCheck",
    "LossBreakdown",
    "Obstacle",
    "ObstacleKind",
    "PackedObstacles",
    "PlanResult",
    "PlannerConfig",
    "Scene",
    "SceneGenerationError",
    "SceneSpec",
    "SceneType",
    "Segment",
    "SphericalCoord",
    "SpsPlanner",
    "TrialConfig",
    "TrialRecord",
    "UavState",
    "VelocityCommand",
    "advance_obstacles",
    "attention_forward",
    "attention_gradients",
    "attention_weights",
    "bidirectional_fuse",
    "comparison_deltas",
    "default_scene_spec",
    "encode_bem",
    "generate_scene",
    "nearest_clearance",
    "normalize_command_xy",
    "orthonormal_frame",
    "pack_obstacles",
    "penalty",
    "point_segment_distance",
    "run_batch",
    "run_kernel_checks",
    "run_trial",
    "sample_candidates_grid",
    "sample_candidates_sps",
    "scene_from_json",
    "scene_to_json",
    "score_candidate",
    "segment_obstacle_clearance",
    "select_plan",
    "select_plan_grid",
    "spherical_to_cartesian",
    "step_dynamics",
    "summarize",
    "synth_events",
    "total_loss",
    "unit",
    "vec3",
    "write_bem_pgm",
]
