"""Spherical-search expert planner.

Candidates are waypoints on a sphere of radius v_set around the vehicle,
sampled along a handful of principal azimuths instead of a dense grid, so the
candidate count grows linearly with the per-direction resolution n. Selection
scores goal progress, clearance and steering offsets, with a safety threshold
that relaxes stepwise when nothing qualifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np

from .geometry import PHI_MAX, Vec3, candidate_clearances, orthonormal_frame, unit
from .scene import Scene, SceneType

if TYPE_CHECKING:  # pragma: no cover
    from .simulator import UavState

#: Azimuth sets: spheres get all four principal evasion directions
#: (left, right, up, down); forests only the lateral pair. Order matters:
#: earlier azimuths win score ties.
DEFAULT_THETA_SPHERES = (0.0, math.pi, math.pi / 2.0, -math.pi / 2.0)
DEFAULT_THETA_FOREST = (0.0, math.pi)

#: Below this speed the vehicle counts as hovering and the candidate cone is
#: aimed at the goal instead of along the velocity.
HOVER_SPEED = 0.1

#: Seconds to traverse a candidate segment; waypoints sit one horizon ahead.
PLAN_HORIZON = 1.0

# Scores are compared after rounding so exact symmetry ties are not split by
# last-ulp float noise and the declared tie-breaks stay in charge.
_TIE_DECIMALS = 12


@dataclass(frozen=True)
class PlannerConfig:
    """Spherical-search parameters. Defaults follow the benchmark setup."""

    v_set: float
    n: int = 16
    d_safety: float = 1.0
    relaxation_step: float = 0.2
    w_goal: float = 0.2
    w_safety: float = 0.4
    w_x: float = 0.4
    w_y: float = 0.4
    turn_factor: float = 1.2
    turn_threshold: float = math.radians(5.0)
    clearance_norm: float = 4.0
    time_samples: int = 64
    theta_set: tuple[float, ...] = DEFAULT_THETA_SPHERES

    def __post_init__(self):
        object.__setattr__(self, "theta_set", tuple(float(t) for t in self.theta_set))
        if not (math.isfinite(self.v_set) and self.v_set > 0.0):
            raise ValueError("v_set must be positive")
        if self.n < 4 or self.n % 2:
            raise ValueError("n must be an even integer >= 4")
        if self.d_safety < 0.0:
            raise ValueError("d_safety must be >= 0")
        if self.relaxation_step <= 0.0:
            raise ValueError("relaxation_step must be positive")
        if min(self.w_goal, self.w_safety, self.w_x, self.w_y) < 0.0:
            raise ValueError("score weights must be >= 0")
        if self.turn_factor < 1.0:
            raise ValueError("turn_factor must be >= 1")
        if self.clearance_norm <= 0.0:
            raise ValueError("clearance_norm must be positive")
        if self.time_samples < 2:
            raise ValueError("time_samples must be >= 2")
        if not self.theta_set:
            raise ValueError("theta_set must not be empty")

    @classmethod
    def for_scene(cls, scene_type, v_set: float, **overrides) -> "PlannerConfig":
        """Config with the azimuth set matched to the scene family."""
        theta = (
            DEFAULT_THETA_FOREST
            if SceneType(scene_type) is SceneType.FOREST
            else DEFAULT_THETA_SPHERES
        )
        return cls(v_set=v_set, theta_set=theta, **overrides)


@dataclass(eq=False)
class CandidatePath:
    """One sampled waypoint with its evaluation results.

    components holds (s_goal, s_safety, s_x, s_y_offset) once scored.
    """

    waypoint: Vec3
    phi: float
    theta: float
    clearance: float = math.nan
    feasible: bool = False
    score: float = math.nan
    components: tuple[float, float, float, float] | None = None


@dataclass(eq=False)
class PlanResult:
    chosen: CandidatePath
    command: Vec3
    candidates_evaluated: int
    relaxations_applied: int
    fallback_used: bool


@dataclass(frozen=True, eq=False)
class CandidateBasis:
    """Frame-local candidate geometry, fixed per planner config.

    local_points are waypoint offsets in the flight frame; unit_dirs their
    directions; lat_frac/vert_frac are |sin phi cos theta| and
    |sin phi sin theta| (for grid candidates, the equivalent offset fractions).
    """

    local_points: np.ndarray
    unit_dirs: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    lat_frac: np.ndarray
    vert_frac: np.ndarray


@lru_cache(maxsize=128)
def _sps_basis(n: int, theta_set: tuple[float, ...], v_set: float) -> CandidateBasis:
    half = n // 2
    phi_ladder = PHI_MAX * np.arange(1, half + 1) / half
    phi = np.tile(phi_ladder, len(theta_set))
    theta = np.repeat(np.asarray(theta_set, dtype=float), half)
    sp, cp = np.sin(phi), np.cos(phi)
    st, ct = np.sin(theta), np.cos(theta)
    dirs = np.column_stack((cp, sp * ct, sp * st))
    return CandidateBasis(
        local_points=v_set * dirs,
        unit_dirs=dirs,
        phi=phi,
        theta=theta,
        lat_frac=np.abs(sp * ct),
        vert_frac=np.abs(sp * st),
    )


def _forward_axis(position: Vec3, velocity: Vec3, goal) -> Vec3:
    speed = float(np.linalg.norm(velocity))
    if speed > HOVER_SPEED:
        return velocity / speed
    return unit(np.asarray(goal, dtype=float) - position)


def sample_candidates_sps(state: "UavState", goal, config: PlannerConfig) -> list[CandidatePath]:
    """Unevaluated spherical candidates: len(theta_set) * (n / 2) waypoints at
    distance v_set, ordered by azimuth then ascending phi."""
    basis = _sps_basis(config.n, config.theta_set, config.v_set)
    axes = orthonormal_frame(_forward_axis(state.position, state.velocity, goal))
    way = state.position + basis.local_points @ axes.T
    return [
        CandidatePath(way[i], float(basis.phi[i]), float(basis.theta[i]))
        for i in range(way.shape[0])
    ]


def score_candidate(c: CandidatePath, state: "UavState", goal, config: PlannerConfig) -> float:
    """Score one candidate (clearance must already be set) and fill its fields.

    score = w_goal * s_goal + w_safety * s_safety + w_x * s_x + s_y_offset with
    s_goal = (1 + cos alpha) / 2 toward the goal, s_safety the clearance
    clamped against clearance_norm, s_x = 1 - |sin phi cos theta|, and
    s_y_offset = -k |sin phi sin theta| where k = w_y grows by turn_factor
    when the command direction turns away from the current velocity.
    """
    to_wp = c.waypoint - state.position
    to_goal = np.asarray(goal, dtype=float) - state.position
    wp_norm = float(np.linalg.norm(to_wp))
    goal_norm = float(np.linalg.norm(to_goal))
    if wp_norm < 1e-12 or goal_norm < 1e-12:
        raise ValueError("degenerate candidate or goal at vehicle position")
    cos_a = max(-1.0, min(1.0, float(to_wp @ to_goal) / (wp_norm * goal_norm)))
    s_goal = 0.5 * (1.0 + cos_a)
    s_safety = min(1.0, max(0.0, c.clearance / config.clearance_norm))
    sp = abs(math.sin(c.phi))
    s_x = 1.0 - sp * abs(math.cos(c.theta))
    k = config.w_y
    speed = float(np.linalg.norm(state.velocity))
    if speed > HOVER_SPEED:
        cos_turn = float(to_wp @ state.velocity) / (wp_norm * speed)
        if cos_turn < math.cos(config.turn_threshold):
            k *= config.turn_factor
    s_y = -k * sp * abs(math.sin(c.theta))
    c.components = (s_goal, s_safety, s_x, s_y)
    c.score = config.w_goal * s_goal + config.w_safety * s_safety + config.w_x * s_x + s_y
    return c.score


def _score_batch(position, velocity, goal, dirs_world, basis: CandidateBasis, clear, config):
    g = unit(np.asarray(goal, dtype=float) - position)
    cos_a = np.clip(dirs_world @ g, -1.0, 1.0)
    s_goal = 0.5 * (1.0 + cos_a)
    s_safety = np.clip(clear / config.clearance_norm, 0.0, 1.0)
    s_x = 1.0 - basis.lat_frac
    k = np.full(basis.phi.shape, config.w_y)
    speed = float(np.linalg.norm(velocity))
    if speed > HOVER_SPEED:
        turning = (dirs_world @ (velocity / speed)) < math.cos(config.turn_threshold)
        k[turning] *= config.turn_factor
    s_y = -k * basis.vert_frac
    scores = config.w_goal * s_goal + config.w_safety * s_safety + config.w_x * s_x + s_y
    return scores, np.column_stack((s_goal, s_safety, s_x, s_y))


def _select(clear, scores, abs_phi, wall_dist, d_safety: float, relaxation_step: float):
    """Feasibility-first selection with stepwise threshold relaxation.

    The threshold starts at d_safety and drops by relaxation_step until some
    candidate clears it (strictly) or it bottoms out at zero, after which the
    max-clearance candidate is the fallback. Relaxation only loosens the
    obstacle-clearance requirement; the wall margin stays at d_safety (wall
    distance is known exactly, so thin margins there only invite overshoot
    through the walls). Ties break toward smaller |phi|, then earlier sampling
    order.
    """
    key = np.round(scores, _TIE_DECIMALS)
    walled = wall_dist > d_safety
    k = 0
    while True:
        threshold = max(0.0, d_safety - k * relaxation_step)
        mask = walled & (clear > threshold)
        if mask.any():
            candidates = np.flatnonzero(mask)
            order = np.lexsort((abs_phi[candidates], -key[candidates]))
            return int(candidates[order[0]]), k, False
        if threshold == 0.0:
            # Fallback maximizes distance to the nearest hazard, walls
            # included, so a vehicle pinned against a wall steers back inward.
            effective = np.round(np.minimum(clear, wall_dist), _TIE_DECIMALS)
            order = np.lexsort((abs_phi, -effective))
            return int(order[0]), k, True
        k += 1


def _plan_with_basis(
    state: "UavState", scene: Scene, goal, config, basis: CandidateBasis, forward: Vec3
) -> PlanResult:
    """Shared pipeline: place candidates, batch clearances, score, select.

    forward is the frame axis the caller samples around; the spherical planner
    adapts it to the velocity while the grid baseline keeps facing the goal.
    """
    position = state.position
    axes = orthonormal_frame(forward)
    dirs_world = basis.unit_dirs @ axes.T
    way = position + basis.local_points @ axes.T
    clear = candidate_clearances(position, way, PLAN_HORIZON, scene.packed, config.time_samples)
    scores, parts = _score_batch(position, state.velocity, goal, dirs_world, basis, clear, config)
    # Waypoint distance to the lateral and vertical walls joins the feasibility
    # check (open space outside the course always looks safest, so scoring
    # alone would steer the vehicle out). The flight axis stays unconstrained
    # so the goal plane is reachable.
    lo, hi = scene.bounds.lo, scene.bounds.hi
    wall_dist = np.minimum.reduce(
        [way[:, 1] - lo[1], hi[1] - way[:, 1], way[:, 2] - lo[2], hi[2] - way[:, 2]]
    )
    idx, relaxations, fallback = _select(
        clear, scores, np.abs(basis.phi), wall_dist, config.d_safety, config.relaxation_step
    )
    chosen = CandidatePath(
        waypoint=way[idx],
        phi=float(basis.phi[idx]),
        theta=float(basis.theta[idx]),
        clearance=float(clear[idx]),
        feasible=not fallback,
        score=float(scores[idx]),
        components=tuple(float(v) for v in parts[idx]),
    )
    command = config.v_set * dirs_world[idx]
    return PlanResult(
        chosen=chosen,
        command=command,
        candidates_evaluated=int(way.shape[0]),
        relaxations_applied=relaxations,
        fallback_used=fallback,
    )


def select_plan(state: "UavState", scene: Scene, goal, config: PlannerConfig) -> PlanResult:
    """Plan one control step: spherical candidates, then relaxed selection.

    The returned command is v_set times the unit direction to the chosen
    waypoint; candidate segments are checked over the one-second horizon.
    """
    basis = _sps_basis(config.n, config.theta_set, config.v_set)
    forward = _forward_axis(state.position, state.velocity, goal)
    return _plan_with_basis(state, scene, goal, config, basis, forward)


@dataclass(frozen=True)
class SpsPlanner:
    """Planner-interface wrapper around select_plan."""

    config: PlannerConfig
    name = "sps"

    def plan(self, state: "UavState", scene: Scene, goal) -> PlanResult:
        return select_plan(state, scene, goal, self.config)
