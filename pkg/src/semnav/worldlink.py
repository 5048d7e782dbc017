"""Mapping grid cells to planar SE(2) poses and calibrating against odometry.

Conventions: the world frame is x right / y up; inside the grid, columns
run along the frame's heading and rows run the opposite way to its left
normal (row 0 is the top). A pose's theta is normalized to (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .gridworld import Cell, Direction

FACING_ANGLE = {
    Direction.RIGHT: 0.0,
    Direction.UP: math.pi / 2,
    Direction.LEFT: math.pi,
    Direction.DOWN: -math.pi / 2,
}


def normalize_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = math.remainder(theta, 2 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2 * math.pi
    return wrapped


@dataclass(frozen=True)
class SE2Pose:
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))

    @classmethod
    def identity(cls) -> "SE2Pose":
        return cls(0.0, 0.0, 0.0)

    def compose(self, other: "SE2Pose") -> "SE2Pose":
        """self ∘ other: apply ``other`` first, then ``self``."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return SE2Pose(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )

    __matmul__ = compose

    def inverse(self) -> "SE2Pose":
        c, s = math.cos(self.theta), math.sin(self.theta)
        return SE2Pose(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.theta)

    def isclose(self, other: "SE2Pose", tol: float = 1e-9) -> bool:
        return (
            abs(self.x - other.x) <= tol
            and abs(self.y - other.y) <= tol
            and abs(normalize_angle(self.theta - other.theta)) <= tol
        )


@dataclass(frozen=True)
class GridFrame:
    """Anchor of a grid in the world: center of cell (0, 0), column-axis heading, cell size."""

    origin: tuple[float, float] = (0.0, 0.0)
    heading: float = 0.0
    resolution: float = 1.0

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")


def cell_to_pose(frame: GridFrame, cell: Cell, facing: Direction = Direction.RIGHT) -> SE2Pose:
    """World pose of a cell center, facing one of the four grid directions."""
    row, col = cell
    c, s = math.cos(frame.heading), math.sin(frame.heading)
    u, v = frame.resolution * col, -frame.resolution * row
    return SE2Pose(
        frame.origin[0] + c * u - s * v,
        frame.origin[1] + s * u + c * v,
        frame.heading + FACING_ANGLE[Direction(facing)],
    )


def pose_to_cell(frame: GridFrame, pose: SE2Pose) -> Cell:
    """Nearest cell to a world position (heading ignored)."""
    dx, dy = pose.x - frame.origin[0], pose.y - frame.origin[1]
    c, s = math.cos(frame.heading), math.sin(frame.heading)
    u = (c * dx + s * dy) / frame.resolution
    v = (-s * dx + c * dy) / frame.resolution
    return int(round(-v)), int(round(u))


def calibrate(known_cell: Cell, frame: GridFrame, observed: SE2Pose, facing: Direction = Direction.RIGHT) -> SE2Pose:
    """Fixed grid->odometry transform T with T ∘ cell_to_pose(known_cell) == observed."""
    return observed.compose(cell_to_pose(frame, known_cell, facing).inverse())


def odometry_goal(transform: SE2Pose, frame: GridFrame, cell: Cell, facing: Direction = Direction.RIGHT) -> SE2Pose:
    """Commanded odometry-frame pose for reaching ``cell``."""
    return transform.compose(cell_to_pose(frame, cell, facing))
