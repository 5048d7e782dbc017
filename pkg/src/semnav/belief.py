"""Confidence grid: a decaying score field over where the goal probably is.

Per prediction the grid is decayed, the predicted half-plane relative to
the agent is bumped by one, and every explored cell that is not the goal is
zeroed again. The subgoal is the rounded centroid of the argmax set.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .gridworld import ROOM_NUMBER, Cell, Direction, same_identifier
from .perception import UNKNOWN, AgentBelief

Region = Direction

DEFAULT_ALPHA = 0.9
DEFAULT_EPSILON = 1e-9


@dataclass(frozen=True, eq=False)
class ConfidenceGrid:
    values: np.ndarray
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"decay factor must lie in (0, 1), got {self.alpha}")
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("confidence values must be a 2D grid")
        if (values < 0).any():
            raise ValueError("confidence values must be non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, rows: int, cols: int, alpha: float = DEFAULT_ALPHA) -> "ConfidenceGrid":
        return cls(np.zeros((rows, cols)), alpha)

    @property
    def rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def cols(self) -> int:
        return int(self.values.shape[1])

    def _with(self, values: np.ndarray) -> "ConfidenceGrid":
        return ConfidenceGrid(values, self.alpha)

    def __eq__(self, other):
        if not isinstance(other, ConfidenceGrid):
            return NotImplemented
        return self.alpha == other.alpha and np.array_equal(self.values, other.values)

    __hash__ = None  # type: ignore[assignment]


def decay(grid: ConfidenceGrid) -> ConfidenceGrid:
    return grid._with(grid.values * grid.alpha)


def half_plane_mask(shape: tuple[int, int], agent_pos: Cell, region: Region) -> np.ndarray:
    """Open half-plane of cells strictly beyond the agent in ``region``."""
    r, c = agent_pos
    mask = np.zeros(shape, dtype=bool)
    region = Region(region)
    if region is Region.RIGHT:
        mask[:, c + 1:] = True
    elif region is Region.LEFT:
        mask[:, :c] = True
    elif region is Region.UP:
        mask[:r, :] = True
    else:
        mask[r + 1:, :] = True
    return mask


def apply_prediction(grid: ConfidenceGrid, agent_pos: Cell, region: Region) -> ConfidenceGrid:
    if not (0 <= agent_pos[0] < grid.rows and 0 <= agent_pos[1] < grid.cols):
        raise ValueError(f"agent position {agent_pos} outside grid")
    return grid._with(grid.values + half_plane_mask(grid.values.shape, agent_pos, region))


def explored_non_goal_mask(belief: AgentBelief, goal: str) -> np.ndarray:
    mask = belief.seen_occ != UNKNOWN
    for cell, attrs in belief.seen_sem.items():
        room = attrs.get(ROOM_NUMBER)
        if room is not None and same_identifier(room, goal):
            mask[cell] = False
    return mask


def reset_explored(grid: ConfidenceGrid, belief: AgentBelief, goal: str) -> ConfidenceGrid:
    if belief.shape != grid.values.shape:
        raise ValueError(f"belief shape {belief.shape} != confidence shape {grid.values.shape}")
    values = grid.values.copy()
    values[explored_non_goal_mask(belief, goal)] = 0.0
    return grid._with(values)


def _round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def argmax_cells(grid: ConfidenceGrid) -> np.ndarray:
    return np.argwhere(grid.values == grid.values.max())


def argmax_centroid(grid: ConfidenceGrid) -> Cell:
    """Rounded mean position of the cells attaining the maximum.

    An all-zero grid has the whole grid as its argmax set, so the result is
    the grid center; callers detect that case with ``is_uniform``.
    """
    cells = argmax_cells(grid)
    mean_r, mean_c = cells.mean(axis=0)
    return _round_half_away(float(mean_r)), _round_half_away(float(mean_c))


def is_uniform(grid: ConfidenceGrid, epsilon: float = DEFAULT_EPSILON) -> bool:
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    return float(grid.values.max() - grid.values.min()) <= epsilon


def prediction_update(
    grid: ConfidenceGrid,
    belief: AgentBelief,
    agent_pos: Cell,
    region: Region | None,
    goal: str,
) -> ConfidenceGrid:
    """One control-loop update: decay, bump the predicted half-plane, reset explored cells.

    ``region=None`` (abstention) skips the bump.
    """
    grid = decay(grid)
    if region is not None:
        grid = apply_prediction(grid, agent_pos, region)
    return reset_explored(grid, belief, goal)


def heatmap_json(grid: ConfidenceGrid) -> str:
    values = ",".join(format(float(v), ".17g") for v in grid.values.ravel())
    return (
        f'{{"rows":{grid.rows},"cols":{grid.cols},'
        f'"alpha":{format(grid.alpha, ".17g")},"values":[{values}]}}'
    )


def load_heatmap(text: str) -> ConfidenceGrid:
    doc = json.loads(text)
    values = np.asarray(doc["values"], dtype=np.float64)
    if values.size != doc["rows"] * doc["cols"]:
        raise ValueError("heatmap value count does not match rows x cols")
    return ConfidenceGrid(values.reshape(doc["rows"], doc["cols"]), float(doc["alpha"]))
