"""Planar-grid baseline planner.

Waypoints form an n-by-n grid on the goal-facing plane one horizon ahead,
spanning the same per-axis steering envelope as the spherical sampler, so the
candidate count grows quadratically. Unlike the spherical planner, the plane
does not rotate with the velocity: the grid keeps facing the goal, so its
commands ignore the current motion direction. Scoring, feasibility,
relaxation and tie-break rules are the spherical planner's code, not a copy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np

from .geometry import PHI_MAX, orthonormal_frame, unit
from .scene import Scene
from .sps import (
    CandidateBasis,
    CandidatePath,
    PlanResult,
    _plan_with_basis,
)

if TYPE_CHECKING:  # pragma: no cover
    from .simulator import UavState


@dataclass(frozen=True)
class GridConfig:
    """Grid baseline parameters; scoring fields mirror PlannerConfig."""

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

    def __post_init__(self):
        if not (math.isfinite(self.v_set) and self.v_set > 0.0):
            raise ValueError("v_set must be positive")
        if self.n < 2:
            raise ValueError("n must be >= 2")
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


@lru_cache(maxsize=128)
def _grid_basis(n: int, v_set: float) -> CandidateBasis:
    # plane at forward distance v_set; both offsets span +-v_set*tan(PHI_MAX)
    half_extent = v_set * math.tan(PHI_MAX)
    offsets = np.linspace(-half_extent, half_extent, n)
    lat = np.tile(offsets, n)
    vert = np.repeat(offsets, n)  # row-major: vertical rows, lateral columns
    pts = np.column_stack((np.full(n * n, v_set), lat, vert))
    dist = np.linalg.norm(pts, axis=1)
    return CandidateBasis(
        local_points=pts,
        unit_dirs=pts / dist[:, None],
        phi=np.arctan2(np.hypot(lat, vert), v_set),
        theta=np.arctan2(vert, lat),
        lat_frac=np.abs(lat) / dist,
        vert_frac=np.abs(vert) / dist,
    )


def _goal_axis(state: "UavState", goal) -> np.ndarray:
    return unit(np.asarray(goal, dtype=float) - state.position)


def sample_candidates_grid(state: "UavState", goal, config: GridConfig) -> list[CandidatePath]:
    """Unevaluated grid candidates in row-major order.

    Waypoints sit on the goal-facing plane, not the sphere, so off-center
    distances slightly exceed v_set; phi/theta are the equivalent cone angles.
    """
    basis = _grid_basis(config.n, config.v_set)
    axes = orthonormal_frame(_goal_axis(state, goal))
    way = state.position + basis.local_points @ axes.T
    return [
        CandidatePath(way[i], float(basis.phi[i]), float(basis.theta[i]))
        for i in range(way.shape[0])
    ]


def select_plan_grid(state: "UavState", scene: Scene, goal, config: GridConfig) -> PlanResult:
    """Same contract as sps.select_plan, evaluated over the n*n grid."""
    basis = _grid_basis(config.n, config.v_set)
    return _plan_with_basis(state, scene, goal, config, basis, _goal_axis(state, goal))


@dataclass(frozen=True)
class GridPlanner:
    config: GridConfig
    name = "grid"

    def plan(self, state: "UavState", scene: Scene, goal) -> PlanResult:
        return select_plan_grid(state, scene, goal, self.config)


__all__ = ["GridConfig", "GridPlanner", "sample_candidates_grid", "select_plan_grid"]
