"""Benchmark scenes: procedural generation, obstacle dynamics, serialization.

A scene is a rectangular corridor with the vehicle starting at the center of
the x=0 face and a goal plane at the far end. Obstacle layout is a pure
function of the scene spec (including its seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .geometry import (
    Obstacle,
    ObstacleKind,
    PackedObstacles,
    Vec3,
    pack_obstacles,
    point_clearances,
    point_segment_distance,
    unit,
    vec3,
)

#: No obstacle surface may come closer than this to the launch segment, so no
#: trial is lost at spawn.
START_CLEARANCE = 1.0

#: Length of the protected launch segment, a straight run from the start
#: toward the goal. Keeping this stretch clear gives the vehicle room to
#: react before the first obstacle can sit directly on its initial path.
LAUNCH_CLEARANCE_LENGTH = 8.0

#: Rejection-sampling budget per obstacle before generation gives up.
MAX_PLACEMENT_ATTEMPTS = 10_000

SCENE_SCHEMA = "spsbench.scene/1"


class SceneType(str, Enum):
    FOREST = "forest"
    STATIC_SPHERES = "static_spheres"
    MIXED_SPHERES = "mixed_spheres"


class SceneGenerationError(RuntimeError):
    """Raised when obstacles cannot be packed into the requested corridor."""


@dataclass(frozen=True)
class SceneSpec:
    """Deterministic recipe for a scene; equal specs generate identical scenes."""

    scene_type: SceneType
    length: float = 60.0
    width: float = 20.0
    height: float = 10.0
    obstacle_count: int = 35
    radius_range: tuple[float, float] = (0.5, 1.5)
    dynamic_fraction: float = 0.0
    dynamic_speed_range: tuple[float, float] = (1.0, 4.0)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scene_type", SceneType(self.scene_type))
        object.__setattr__(self, "radius_range", tuple(float(v) for v in self.radius_range))
        object.__setattr__(
            self, "dynamic_speed_range", tuple(float(v) for v in self.dynamic_speed_range)
        )
        if min(self.length, self.width, self.height) <= 0.0:
            raise ValueError("corridor dimensions must be positive")
        if self.obstacle_count < 0:
            raise ValueError("obstacle_count must be >= 0")
        lo, hi = self.radius_range
        if not (0.0 < lo <= hi):
            raise ValueError(f"invalid radius_range {self.radius_range}")
        if not (0.0 <= self.dynamic_fraction <= 1.0):
            raise ValueError("dynamic_fraction must be in [0, 1]")
        if self.dynamic_fraction > 0.0 and self.scene_type is not SceneType.MIXED_SPHERES:
            raise ValueError("dynamic_fraction must be 0 unless scene_type is mixed_spheres")
        if self.dynamic_fraction > 0.0:
            slo, shi = self.dynamic_speed_range
            if not (0.0 < slo <= shi):
                raise ValueError(f"invalid dynamic_speed_range {self.dynamic_speed_range}")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must fit in an unsigned 64-bit integer")


def default_scene_spec(scene_type, seed: int = 0) -> SceneSpec:
    """Benchmark defaults for each scene family.

    The forest keeps a narrow corridor so avoidance stays a lateral threading
    problem; the sphere families get a wider one so trials probe obstacle
    avoidance rather than wall-corner squeezes.
    """
    t = SceneType(scene_type)
    if t is SceneType.FOREST:
        return SceneSpec(t, obstacle_count=45, radius_range=(0.3, 0.6), seed=seed)
    if t is SceneType.STATIC_SPHERES:
        return SceneSpec(t, width=30.0, obstacle_count=35, radius_range=(0.5, 1.5), seed=seed)
    return SceneSpec(
        t,
        width=30.0,
        obstacle_count=35,
        radius_range=(0.5, 1.5),
        dynamic_fraction=0.4,
        dynamic_speed_range=(0.5, 1.5),
        seed=seed,
    )


@dataclass(frozen=True, eq=False)
class Box:
    lo: Vec3
    hi: Vec3

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))
        if not np.all(self.hi > self.lo):
            raise ValueError("box upper corner must exceed lower corner")

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))


@dataclass(eq=False)
class Scene:
    """Generated scene; treat as read-only (dynamics return new Scene values)."""

    spec: SceneSpec
    start: Vec3
    goal: Vec3
    obstacles: list[Obstacle]
    bounds: Box
    _packed: PackedObstacles | None = field(default=None, repr=False)

    @property
    def packed(self) -> PackedObstacles:
        if self._packed is None:
            self._packed = pack_obstacles(self.obstacles)
        return self._packed


def _launch_clearance(
    start: Vec3, launch_end: Vec3, kind: ObstacleKind, center: Vec3, radius: float
) -> float:
    if kind is ObstacleKind.TREE_CYLINDER:
        # infinite vertical extent: measure in the horizontal plane
        a = vec3(start[0], start[1], 0.0)
        b = vec3(launch_end[0], launch_end[1], 0.0)
        d = point_segment_distance(vec3(center[0], center[1], 0.0), a, b)
    else:
        d = point_segment_distance(center, start, launch_end)
    return d - radius


def generate_scene(spec: SceneSpec) -> Scene:
    """Build the scene for a spec. Deterministic given the spec (seed included).

    Obstacle centers are sampled uniformly in the corridor, rejecting any
    placement whose surface comes within START_CLEARANCE of the launch
    segment (LAUNCH_CLEARANCE_LENGTH meters from the start toward the goal).
    In mixed scenes the first round(fraction * count) obstacles are dynamic,
    with velocities drawn uniformly in the y-z plane.
    """
    rng = np.random.default_rng(spec.seed)
    start = vec3(0.0, spec.width / 2.0, spec.height / 2.0)
    goal = vec3(spec.length, spec.width / 2.0, spec.height / 2.0)
    launch_end = start + LAUNCH_CLEARANCE_LENGTH * unit(goal - start)
    bounds = Box(vec3(0.0, 0.0, 0.0), vec3(spec.length, spec.width, spec.height))

    n_dynamic = (
        round(spec.dynamic_fraction * spec.obstacle_count)
        if spec.scene_type is SceneType.MIXED_SPHERES
        else 0
    )
    obstacles: list[Obstacle] = []
    for i in range(spec.obstacle_count):
        if spec.scene_type is SceneType.FOREST:
            kind = ObstacleKind.TREE_CYLINDER
        elif i < n_dynamic:
            kind = ObstacleKind.DYNAMIC_SPHERE
        else:
            kind = ObstacleKind.STATIC_SPHERE
        for _ in range(MAX_PLACEMENT_ATTEMPTS):
            center = rng.uniform(bounds.lo, bounds.hi)
            if kind is ObstacleKind.TREE_CYLINDER:
                center[2] = 0.0
            radius = rng.uniform(*spec.radius_range)
            if _launch_clearance(start, launch_end, kind, center, radius) >= START_CLEARANCE:
                break
        else:
            raise SceneGenerationError(
                f"could not place obstacle {i} after {MAX_PLACEMENT_ATTEMPTS} attempts"
            )
        velocity = np.zeros(3)
        if kind is ObstacleKind.DYNAMIC_SPHERE:
            ang = rng.uniform(0.0, 2.0 * math.pi)
            speed = rng.uniform(*spec.dynamic_speed_range)
            velocity = vec3(0.0, speed * math.cos(ang), speed * math.sin(ang))
        obstacles.append(Obstacle(kind, center, radius, velocity))
    return Scene(spec, start, goal, obstacles, bounds)


def _reflect(x: float, vx: float, lo: float, hi: float) -> tuple[float, float]:
    # elastic bounce: mirror across the crossed bound and flip the velocity
    while x > hi or x < lo:
        if x > hi:
            x = 2.0 * hi - x
        else:
            x = 2.0 * lo - x
        vx = -vx
    return x, vx


def advance_obstacles(scene: Scene, dt: float) -> Scene:
    """Advance dynamic spheres by dt, bouncing off lateral/vertical bounds.

    Static obstacles are untouched; a scene with no dynamic obstacles is
    returned as-is.
    """
    if dt < 0.0:
        raise ValueError("dt must be >= 0")
    if dt == 0.0 or not scene.packed.dynamic_idx.size:
        return scene
    lo, hi = scene.bounds.lo, scene.bounds.hi
    obstacles = []
    for o in scene.obstacles:
        if o.kind is not ObstacleKind.DYNAMIC_SPHERE:
            obstacles.append(o)
            continue
        c = o.center + o.velocity * dt
        v = o.velocity.copy()
        c[1], v[1] = _reflect(c[1], v[1], lo[1], hi[1])
        c[2], v[2] = _reflect(c[2], v[2], lo[2], hi[2])
        obstacles.append(Obstacle(ObstacleKind.DYNAMIC_SPHERE, c, o.radius, v))
    return Scene(scene.spec, scene.start, scene.goal, obstacles, scene.bounds)


def nearest_clearance(p, scene: Scene) -> tuple[float, int | None]:
    """Smallest signed clearance from p to any obstacle and that obstacle's index.

    Returns (+inf, None) for an empty scene.
    """
    if not scene.obstacles:
        return math.inf, None
    c = point_clearances(np.asarray(p, dtype=float), scene.packed)
    i = int(np.argmin(c))
    return float(c[i]), i


def scene_to_json(scene: Scene) -> str:
    """Serialize a scene to a stable, human-readable JSON document."""
    spec = scene.spec
    doc = {
        "schema": SCENE_SCHEMA,
        "spec": {
            "scene_type": spec.scene_type.value,
            "length": spec.length,
            "width": spec.width,
            "height": spec.height,
            "obstacle_count": spec.obstacle_count,
            "radius_range": list(spec.radius_range),
            "dynamic_fraction": spec.dynamic_fraction,
            "dynamic_speed_range": list(spec.dynamic_speed_range),
            "seed": spec.seed,
        },
        "bounds": {"lo": scene.bounds.lo.tolist(), "hi": scene.bounds.hi.tolist()},
        "start": scene.start.tolist(),
        "goal": scene.goal.tolist(),
        "obstacles": [
            {
                "kind": o.kind.value,
                "center": o.center.tolist(),
                "radius": o.radius,
                "velocity": o.velocity.tolist(),
            }
            for o in scene.obstacles
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def scene_from_json(text: str) -> Scene:
    doc = json.loads(text)
    if doc.get("schema") != SCENE_SCHEMA:
        raise ValueError(f"unsupported scene schema {doc.get('schema')!r}")
    s = doc["spec"]
    spec = SceneSpec(
        scene_type=s["scene_type"],
        length=s["length"],
        width=s["width"],
        height=s["height"],
        obstacle_count=s["obstacle_count"],
        radius_range=tuple(s["radius_range"]),
        dynamic_fraction=s["dynamic_fraction"],
        dynamic_speed_range=tuple(s["dynamic_speed_range"]),
        seed=s["seed"],
    )
    obstacles = [
        Obstacle(o["kind"], o["center"], o["radius"], o["velocity"]) for o in doc["obstacles"]
    ]
    return Scene(
        spec=spec,
        start=np.asarray(doc["start"], dtype=float),
        goal=np.asarray(doc["goal"], dtype=float),
        obstacles=obstacles,
        bounds=Box(doc["bounds"]["lo"], doc["bounds"]["hi"]),
    )
