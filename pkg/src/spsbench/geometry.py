"""Frames, spherical waypoint coordinates, obstacle shapes, and clearance queries.

World convention: x points down the corridor toward the goal plane, y is
lateral, z is up. Lengths are meters, angles radians, time seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

Vec3 = np.ndarray  # shape (3,) float array

#: Half-angle of the steering cone: candidate waypoints never deviate more
#: than this from the flight direction.
PHI_MAX = math.pi / 15

_WORLD_UP = np.array([0.0, 0.0, 1.0])
_WORLD_X = np.array([1.0, 0.0, 0.0])


def vec3(x: float, y: float, z: float) -> Vec3:
    return np.array([float(x), float(y), float(z)])


def unit(v) -> Vec3:
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n < 1e-12:
        raise ValueError("cannot normalize a near-zero vector")
    return v / n


@dataclass(frozen=True)
class SphericalCoord:
    """Waypoint in sphere coordinates: radius r, steering deviation phi off the
    forward axis, azimuth theta around it (0 lateral-left, +-pi/2 vertical)."""

    r: float
    phi: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 0.0):
            raise ValueError(f"radius must be positive and finite, got {self.r}")
        if abs(self.phi) > PHI_MAX + 1e-12:
            raise ValueError(f"phi {self.phi} outside [-pi/15, pi/15]")
        if abs(self.theta) > math.pi + 1e-12:
            raise ValueError(f"theta {self.theta} outside [-pi, pi]")


@dataclass(frozen=True, eq=False)
class Segment:
    """Straight candidate path from a to b, traversed at constant speed over
    `duration` seconds (duration only matters against moving obstacles)."""

    a: Vec3
    b: Vec3
    duration: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        if not (math.isfinite(self.duration) and self.duration >= 0.0):
            raise ValueError("segment duration must be finite and >= 0")


def orthonormal_frame(forward) -> np.ndarray:
    """Right-handed basis (columns: forward, lateral-left, up) for a flight direction.

    The lateral axis stays horizontal (world-z reference) so azimuth 0/pi mean
    left/right and +-pi/2 mean up/down; near-vertical flight directions fall
    back to the world x axis as reference.
    """
    f = unit(forward)
    lateral = np.cross(_WORLD_UP, f)
    n = float(np.linalg.norm(lateral))
    if n < 1e-6:
        lateral = np.cross(f, _WORLD_X)
        n = float(np.linalg.norm(lateral))
    lateral = lateral / n
    up = np.cross(f, lateral)
    return np.column_stack((f, lateral, up))


@dataclass(frozen=True, eq=False)
class Frame:
    """Pose made of an origin and a right-handed orthonormal basis.

    Columns of `axes` are the forward, lateral and up axes in world coordinates.
    """

    origin: Vec3
    axes: np.ndarray

    def __post_init__(self):
        origin = np.asarray(self.origin, dtype=float)
        axes = np.asarray(self.axes, dtype=float)
        if axes.shape != (3, 3):
            raise ValueError("frame axes must be a 3x3 matrix")
        if not np.allclose(axes.T @ axes, np.eye(3), atol=1e-9):
            raise ValueError("frame axes are not orthonormal")
        if np.linalg.det(axes) <= 0.0:
            raise ValueError("frame axes are not right-handed")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "axes", axes)

    @classmethod
    def identity(cls, origin=(0.0, 0.0, 0.0)) -> "Frame":
        return cls(np.asarray(origin, dtype=float), np.eye(3))

    @classmethod
    def from_forward(cls, forward, origin=(0.0, 0.0, 0.0)) -> "Frame":
        return cls(np.asarray(origin, dtype=float), orthonormal_frame(forward))


def spherical_to_cartesian(c: SphericalCoord, frame: Frame) -> Vec3:
    """World position of (r, phi, theta) expressed in a flight frame.

    Local coordinates are (r cos phi, r sin phi cos theta, r sin phi sin theta),
    so the result sits exactly at distance r from the frame origin.
    """
    sp = math.sin(c.phi)
    local = np.array(
        [
            c.r * math.cos(c.phi),
            c.r * sp * math.cos(c.theta),
            c.r * sp * math.sin(c.theta),
        ]
    )
    return frame.origin + frame.axes @ local


class ObstacleKind(str, Enum):
    STATIC_SPHERE = "static_sphere"
    DYNAMIC_SPHERE = "dynamic_sphere"
    TREE_CYLINDER = "tree_cylinder"


@dataclass(frozen=True, eq=False)
class Obstacle:
    """Spherical or tree-trunk obstacle.

    Trees are vertical cylinders of unbounded height; only the xy position of
    their center matters. Velocity must be zero except for dynamic spheres.
    """

    kind: ObstacleKind
    center: Vec3
    radius: float
    velocity: Vec3 = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "kind", ObstacleKind(self.kind))
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise ValueError("obstacle radius must be positive")
        if self.kind is not ObstacleKind.DYNAMIC_SPHERE and np.any(self.velocity != 0.0):
            raise ValueError(f"{self.kind.value} obstacles must have zero velocity")


def point_segment_distance(p, a, b) -> float:
    """Distance from point p to the closed segment [a, b]."""
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.linalg.norm(p - a))
    t = float((p - a) @ ab) / denom
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(p - (a + t * ab)))


def _point_segment_distance_2d(p, a, b) -> float:
    return point_segment_distance(
        np.asarray(p, dtype=float)[:2], np.asarray(a, dtype=float)[:2], np.asarray(b, dtype=float)[:2]
    )


def point_clearance(p, obstacle: Obstacle) -> float:
    """Signed distance from a point to the obstacle surface (negative inside)."""
    p = np.asarray(p, dtype=float)
    if obstacle.kind is ObstacleKind.TREE_CYLINDER:
        d = math.hypot(p[0] - obstacle.center[0], p[1] - obstacle.center[1])
    else:
        d = float(np.linalg.norm(p - obstacle.center))
    return d - obstacle.radius


def segment_obstacle_clearance(seg: Segment, obstacle: Obstacle, time_samples: int = 64) -> float:
    """Signed clearance between a candidate segment and one obstacle.

    Static spheres and trees use exact point-to-segment distance (trees in the
    horizontal plane). Dynamic spheres are sampled at `time_samples` instants
    with the vehicle traversing the segment uniformly while the obstacle moves
    linearly over the segment duration. Negative values mean penetration.
    """
    if time_samples < 2:
        raise ValueError("time_samples must be >= 2")
    if obstacle.kind is ObstacleKind.STATIC_SPHERE:
        return point_segment_distance(obstacle.center, seg.a, seg.b) - obstacle.radius
    if obstacle.kind is ObstacleKind.TREE_CYLINDER:
        return _point_segment_distance_2d(obstacle.center, seg.a, seg.b) - obstacle.radius
    frac = np.linspace(0.0, 1.0, time_samples)
    pts = seg.a + np.outer(frac, seg.b - seg.a)
    centers = obstacle.center + np.outer(frac * seg.duration, obstacle.velocity)
    d = np.linalg.norm(pts - centers, axis=1)
    return float(d.min()) - obstacle.radius


@dataclass(frozen=True, eq=False)
class PackedObstacles:
    """Column arrays over an obstacle list, grouped by kind for batch queries."""

    count: int
    static_idx: np.ndarray
    static_centers: np.ndarray
    static_radii: np.ndarray
    dynamic_idx: np.ndarray
    dynamic_centers: np.ndarray
    dynamic_radii: np.ndarray
    dynamic_velocities: np.ndarray
    tree_idx: np.ndarray
    tree_xy: np.ndarray
    tree_radii: np.ndarray


def pack_obstacles(obstacles) -> PackedObstacles:
    static_i = [i for i, o in enumerate(obstacles) if o.kind is ObstacleKind.STATIC_SPHERE]
    dyn_i = [i for i, o in enumerate(obstacles) if o.kind is ObstacleKind.DYNAMIC_SPHERE]
    tree_i = [i for i, o in enumerate(obstacles) if o.kind is ObstacleKind.TREE_CYLINDER]

    def centers(idx):
        if not idx:
            return np.zeros((0, 3))
        return np.array([obstacles[i].center for i in idx])

    def radii(idx):
        return np.array([obstacles[i].radius for i in idx])

    return PackedObstacles(
        count=len(obstacles),
        static_idx=np.array(static_i, dtype=int),
        static_centers=centers(static_i),
        static_radii=radii(static_i),
        dynamic_idx=np.array(dyn_i, dtype=int),
        dynamic_centers=centers(dyn_i),
        dynamic_radii=radii(dyn_i),
        dynamic_velocities=(
            np.array([obstacles[i].velocity for i in dyn_i]) if dyn_i else np.zeros((0, 3))
        ),
        tree_idx=np.array(tree_i, dtype=int),
        tree_xy=centers(tree_i)[:, :2] if tree_i else np.zeros((0, 2)),
        tree_radii=radii(tree_i),
    )


def point_clearances(p, packed: PackedObstacles) -> np.ndarray:
    """Signed point clearance to every packed obstacle, in original list order."""
    p = np.asarray(p, dtype=float)
    out = np.empty(packed.count)
    if packed.static_idx.size:
        d = np.linalg.norm(packed.static_centers - p, axis=1)
        out[packed.static_idx] = d - packed.static_radii
    if packed.dynamic_idx.size:
        d = np.linalg.norm(packed.dynamic_centers - p, axis=1)
        out[packed.dynamic_idx] = d - packed.dynamic_radii
    if packed.tree_idx.size:
        d = np.linalg.norm(packed.tree_xy - p[:2], axis=1)
        out[packed.tree_idx] = d - packed.tree_radii
    return out


def candidate_clearances(
    origin, waypoints, duration: float, packed: PackedObstacles, time_samples: int = 64
) -> np.ndarray:
    """Minimum clearance of each origin->waypoint segment over all obstacles.

    Equivalent to segment_obstacle_clearance applied per obstacle and
    minimized, but evaluates the whole candidate set in one vectorized pass.
    Returns +inf entries when there are no obstacles.
    """
    if time_samples < 2:
        raise ValueError("time_samples must be >= 2")
    origin = np.asarray(origin, dtype=float)
    w = np.atleast_2d(np.asarray(waypoints, dtype=float))
    m = w.shape[0]
    best = np.full(m, np.inf)
    ab = w - origin  # (M, 3)

    if packed.static_idx.size:
        best = np.minimum(
            best,
            _segment_point_min(origin, ab, packed.static_centers, packed.static_radii),
        )
    if packed.tree_idx.size:
        best = np.minimum(
            best,
            _segment_point_min(origin[:2], ab[:, :2], packed.tree_xy, packed.tree_radii),
        )
    if packed.dynamic_idx.size:
        frac = np.linspace(0.0, 1.0, time_samples)
        pts = origin + frac[None, :, None] * ab[:, None, :]  # (M, T, 3)
        ct = (
            packed.dynamic_centers[:, None, :]
            + (frac * duration)[None, :, None] * packed.dynamic_velocities[:, None, :]
        )  # (K, T, 3)
        pp = np.einsum("mtd,mtd->mt", pts, pts)
        cc = np.einsum("ktd,ktd->kt", ct, ct)
        cross = np.einsum("mtd,ktd->mkt", pts, ct)
        d2 = np.clip(pp[:, None, :] + cc[None, :, :] - 2.0 * cross, 0.0, None)
        d = np.sqrt(d2.min(axis=2))
        best = np.minimum(best, (d - packed.dynamic_radii[None, :]).min(axis=1))
    return best


def _segment_point_min(origin, ab, centers, radii) -> np.ndarray:
    """Per-segment minimum of exact point-to-segment clearances (any dimension)."""
    denom = np.einsum("md,md->m", ab, ab)
    safe = np.where(denom == 0.0, 1.0, denom)
    rel = centers - origin  # (K, D)
    t = np.clip((ab @ rel.T) / safe[:, None], 0.0, 1.0)  # (M, K)
    diff = rel[None, :, :] - t[:, :, None] * ab[:, None, :]
    d = np.sqrt(np.einsum("mkd,mkd->mk", diff, diff))
    return (d - radii[None, :]).min(axis=1)
