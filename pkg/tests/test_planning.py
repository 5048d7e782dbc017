import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semnav.planning import (
    InvalidStart,
    NoFrontier,
    NoPath,
    astar,
    bfs_distances,
    find_frontiers,
    frontier_distances,
    nearest_frontier,
    snap_to_frontier,
    snap_to_reachable,
)

from oracles import bfs_length, brute_frontiers, dijkstra_lengths, random_grid


def _valid_path(grid, path, start, target, allow_target=False):
    assert path[0] == start and path[-1] == target
    for a, b in zip(path, path[1:]):
        assert abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1
    for cell in path[:-1] if allow_target else path:
        assert grid[cell] == 0


def test_astar_simple_corridor():
    grid = np.array([[0, 0, 0], [1, 1, 0], [0, 0, 0]])
    path = astar(grid, (0, 0), (2, 0))
    assert len(path) - 1 == 6
    _valid_path(grid, path, (0, 0), (2, 0))


def test_astar_errors_and_door_targets():
    grid = np.array([[0, 1, -1]])
    with pytest.raises(InvalidStart):
        astar(grid, (0, 1), (0, 0))
    with pytest.raises(NoPath):
        astar(grid, (0, 0), (0, 1))
    assert astar(grid, (0, 0), (0, 1), allow_occupied_target=True) == [(0, 0), (0, 1)]
    with pytest.raises(NoPath):
        astar(grid, (0, 0), (0, 2), allow_occupied_target=True)
    assert astar(grid, (0, 0), (0, 0)) == [(0, 0)]


def test_astar_is_deterministic():
    grid = np.zeros((6, 6), dtype=np.int8)
    assert astar(grid, (0, 0), (5, 5)) == astar(grid.copy(), (0, 0), (5, 5))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_astar_matches_dijkstra_on_random_grids(seed):
    rng = np.random.default_rng(seed)
    grid = random_grid(rng, max_side=15)
    free = np.argwhere(grid == 0)
    if len(free) < 2:
        return
    s, t = (tuple(int(v) for v in free[i]) for i in rng.choice(len(free), 2, replace=False))
    dist = dijkstra_lengths(grid == 0, s)[t]
    if np.isinf(dist):
        with pytest.raises(NoPath):
            astar(grid, s, t)
    else:
        path = astar(grid, s, t)
        assert len(path) - 1 == int(dist)
        _valid_path(grid, path, s, t)


def test_unknown_cells_block():
    grid = np.array([[0, -1, 0]])
    with pytest.raises(NoPath):
        astar(grid, (0, 0), (0, 2))


def test_bfs_distances_match_oracle():
    rng = np.random.default_rng(3)
    for _ in range(30):
        grid = random_grid(rng, 12)
        free = np.argwhere(grid == 0)
        if not len(free):
            continue
        s = tuple(int(v) for v in free[0])
        dist = bfs_distances(grid, s)
        for cell, d in dist.items():
            assert bfs_length(grid == 0, s, cell) == d
        assert len(dist) == int(np.isfinite(dijkstra_lengths(grid == 0, s)).sum())


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_frontiers_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    grid = random_grid(rng, 20).astype(np.int8)
    grid[rng.random(grid.shape) < rng.uniform(0, 0.6)] = -1
    assert find_frontiers(grid) == brute_frontiers(grid)


def test_nearest_frontier_tie_break_row_major():
    grid = np.array([
        [-1, 0, -1],
        [-1, 0, -1],
    ])
    # (0,1) and (1,1) are both frontiers; from (1,1) itself it is distance 0
    assert nearest_frontier(grid, (1, 1)) == (1, 1)
    grid = np.array([[-1, 0, 0, 0, -1]])
    assert nearest_frontier(grid, (0, 2)) == (0, 1)


def test_no_frontier_when_fully_known_or_walled_off():
    with pytest.raises(NoFrontier):
        nearest_frontier(np.zeros((3, 3), dtype=np.int8), (1, 1))
    grid = np.array([[0, 1, 0, -1]])
    with pytest.raises(NoFrontier):
        nearest_frontier(grid, (0, 0))
    assert frontier_distances(grid, (0, 2)) == {(0, 2): 0}


def test_snap_to_reachable_prefers_closest_then_shortest_path():
    grid = np.array([
        [0, 0, 0, 0],
        [1, 1, 1, 0],
        [-1, -1, -1, 0],
    ])
    assert snap_to_reachable(grid, (0, 0), (2, 0)) == (0, 0)
    assert snap_to_reachable(grid, (0, 0), (2, 2)) == (2, 3)
    assert snap_to_reachable(grid, (0, 0), (0, 2)) == (0, 2)


def test_snap_to_frontier_uses_detour_cost():
    grid = np.array([
        [-1, 0, 0, 0, 0, 0, -1],
    ])
    # equal Manhattan distance to the desired cell above the middle: the
    # frontier nearer to the agent wins
    assert snap_to_frontier(grid, (0, 2), (-5, 3)) == (0, 1)
    assert snap_to_frontier(grid, (0, 4), (-5, 3)) == (0, 5)
    with pytest.raises(NoFrontier):
        snap_to_frontier(np.zeros((2, 2), dtype=np.int8), (0, 0), (1, 1))
