"""A* over known free space, frontier extraction and subgoal snapping.

Unknown (-1) and occupied (1) cells are not traversable. The only exception
is an occupied target cell when ``allow_occupied_target`` is set, which lets
the planner end a path on a door.
"""

from __future__ import annotations

import heapq
from collections import deque

import numpy as np

from .gridworld import NEIGHBOR_OFFSETS, Cell, in_bounds
from .perception import UNKNOWN

Path = list[Cell]


class PlanningError(Exception):
    pass


class NoPath(PlanningError):
    pass


class InvalidStart(PlanningError):
    pass


class NoFrontier(PlanningError):
    pass


class NoReachableCell(PlanningError):
    pass


def _known_free(seen_occ: np.ndarray, cell: Cell) -> bool:
    rows, cols = seen_occ.shape
    return in_bounds(cell, rows, cols) and seen_occ[cell] == 0


def astar(seen_occ: np.ndarray, start: Cell, target: Cell, allow_occupied_target: bool = False) -> Path:
    """Shortest 4-connected path from ``start`` to ``target``, both inclusive.

    Unit step costs with the Manhattan heuristic. Open-list ties on f are
    broken by larger g first, then row-major cell order, so identical inputs
    always give the identical path.
    """
    seen_occ = np.asarray(seen_occ)
    rows, cols = seen_occ.shape
    start, target = (int(start[0]), int(start[1])), (int(target[0]), int(target[1]))
    if not _known_free(seen_occ, start):
        raise InvalidStart(f"start {start} is not known free")
    if not in_bounds(target, rows, cols):
        raise NoPath(f"target {target} out of bounds")
    target_free = seen_occ[target] == 0
    if not target_free and not (allow_occupied_target and seen_occ[target] == 1):
        raise NoPath(f"target {target} is not known free")
    if start == target:
        return [start]

    tr, tc = target
    g = {start: 0}
    parent: dict[Cell, Cell] = {}
    closed: set[Cell] = set()
    h0 = abs(start[0] - tr) + abs(start[1] - tc)
    heap = [(h0, 0, start[0], start[1])]
    while heap:
        f, neg_g, r, c = heapq.heappop(heap)
        cell = (r, c)
        if cell in closed:
            continue
        if cell == target:
            path = [cell]
            while cell in parent:
                cell = parent[cell]
                path.append(cell)
            return path[::-1]
        closed.add(cell)
        g_cell = -neg_g
        for dr, dc in NEIGHBOR_OFFSETS:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < rows and 0 <= nc < cols):
                continue
            nxt = (nr, nc)
            if nxt in closed:
                continue
            if seen_occ[nr, nc] != 0 and nxt != target:
                continue
            ng = g_cell + 1
            if ng < g.get(nxt, 1 << 60):
                g[nxt] = ng
                parent[nxt] = cell
                heapq.heappush(heap, (ng + abs(nr - tr) + abs(nc - tc), -ng, nr, nc))
    raise NoPath(f"no known-free path from {start} to {target}")


def bfs_distances(seen_occ: np.ndarray, start: Cell) -> dict[Cell, int]:
    """Step distances from ``start`` to every known-free cell it can reach."""
    rows, cols = seen_occ.shape
    dist = {start: 0}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        d = dist[cell] + 1
        for dr, dc in NEIGHBOR_OFFSETS:
            nr, nc = cell[0] + dr, cell[1] + dc
            if 0 <= nr < rows and 0 <= nc < cols and seen_occ[nr, nc] == 0 and (nr, nc) not in dist:
                dist[(nr, nc)] = d
                queue.append((nr, nc))
    return dist


def frontier_mask(seen_occ: np.ndarray) -> np.ndarray:
    seen_occ = np.asarray(seen_occ)
    unknown = seen_occ == UNKNOWN
    near_unknown = np.zeros_like(unknown)
    near_unknown[1:, :] |= unknown[:-1, :]
    near_unknown[:-1, :] |= unknown[1:, :]
    near_unknown[:, 1:] |= unknown[:, :-1]
    near_unknown[:, :-1] |= unknown[:, 1:]
    return (seen_occ == 0) & near_unknown


def find_frontiers(seen_occ: np.ndarray) -> set[Cell]:
    """Known-free cells with at least one unknown 4-neighbor."""
    return {(int(r), int(c)) for r, c in np.argwhere(frontier_mask(seen_occ))}


def frontier_distances(seen_occ: np.ndarray, agent_pos: Cell) -> dict[Cell, int]:
    """Reachable frontier cells and their path lengths from the agent."""
    if not _known_free(seen_occ, agent_pos):
        raise InvalidStart(f"agent position {agent_pos} is not known free")
    mask = frontier_mask(seen_occ)
    return {cell: d for cell, d in bfs_distances(seen_occ, agent_pos).items() if mask[cell]}


def nearest_frontier(seen_occ: np.ndarray, agent_pos: Cell) -> Cell:
    reachable = frontier_distances(seen_occ, agent_pos)
    if not reachable:
        raise NoFrontier("no reachable frontier")
    return min(reachable, key=lambda cell: (reachable[cell], cell))


def snap_to_reachable(seen_occ: np.ndarray, agent_pos: Cell, desired: Cell) -> Cell:
    """Reachable known-free cell closest (Manhattan) to ``desired``.

    Ties go to the cell with the shorter path from the agent, then row-major.
    An agent boxed in on its own cell gets its own cell back.
    """
    if not _known_free(seen_occ, agent_pos):
        raise NoReachableCell(f"agent position {agent_pos} is not known free")
    dr, dc = desired
    dist = bfs_distances(seen_occ, agent_pos)
    return min(dist, key=lambda cell: (abs(cell[0] - dr) + abs(cell[1] - dc), dist[cell], cell))


def snap_to_frontier(seen_occ: np.ndarray, agent_pos: Cell, desired: Cell) -> Cell:
    """Reachable frontier cell on the cheapest detour from the agent to ``desired``.

    A frontier is scored by its path length from the agent plus its Manhattan
    distance to ``desired``; ties go to the cell closer to ``desired``, then
    the shorter path, then row-major. Aiming at a frontier guarantees that
    reaching the subgoal reveals something, and because a step along the
    path lowers the chosen frontier's score by exactly one, the choice does
    not flip-flop while the agent approaches it.
    """
    reachable = frontier_distances(seen_occ, agent_pos)
    if not reachable:
        raise NoFrontier("no reachable frontier")
    dr, dc = desired

    def score(cell):
        h = abs(cell[0] - dr) + abs(cell[1] - dc)
        return reachable[cell] + h, h, reachable[cell], cell

    return min(reachable, key=score)
