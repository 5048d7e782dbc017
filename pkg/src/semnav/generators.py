"""Seeded floorplan generators for the seven benchmark environment families.

Each family is a fixed corridor skeleton at the family's grid size. A seed
varies the start cell, which wall slots become doors, the numbering base and
direction, and (for the noisy family) the cell-flip noise. Room numbers
increase strictly along the corridor traversal order; with
``parity_sides`` the left/top wall of a corridor takes odd numbers and the
right/bottom wall even ones. Signs sit on free junction cells and list, per
direction, the rooms reached by first stepping that way.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .gridworld import (
    NEIGHBOR_OFFSETS,
    ROOM_NUMBER,
    SIGN_TEXT,
    Cell,
    CellLabel,
    Environment,
    identifier_key,
    in_bounds,
    neighbors4,
)


class GenerationError(Exception):
    pass


class Family(str, Enum):
    SMALL_H_SHAPE = "SmallHShape"
    SMALL_HALLWAYS = "SmallHallways"
    SMALL_PLAZA = "SmallPlaza"
    LARGE_H_SHAPE = "LargeHShape"
    LARGE_L_SHAPE = "LargeLShape"
    LARGE_OFFICES = "LargeOffices"
    NOISY_POLYCAM = "NoisyPolycamAnalogue"

    @property
    def group(self) -> str:
        if self in (Family.SMALL_H_SHAPE, Family.SMALL_HALLWAYS, Family.SMALL_PLAZA):
            return "Small"
        if self is Family.NOISY_POLYCAM:
            return "Noisy"
        return "Large"


FAMILY_SHAPES: dict[Family, tuple[int, int]] = {
    Family.SMALL_H_SHAPE: (11, 7),
    Family.SMALL_HALLWAYS: (7, 11),
    Family.SMALL_PLAZA: (13, 7),
    Family.LARGE_H_SHAPE: (132, 122),
    Family.LARGE_L_SHAPE: (93, 244),
    Family.LARGE_OFFICES: (127, 211),
    Family.NOISY_POLYCAM: (251, 137),
}

SMALL_FAMILIES = (Family.SMALL_H_SHAPE, Family.SMALL_HALLWAYS, Family.SMALL_PLAZA)


@dataclass(frozen=True)
class GeneratorParams:
    """Knobs for ``generate_environment``.

    ``None`` means "family default": noise 0.05 for the noisy family and 0
    elsewhere; every door slot becomes a room on large maps, a fixed count on
    small ones; alphanumeric suites only for offices and the noisy family.
    """

    noise: float | None = None
    rooms: int | None = None
    parity_sides: bool = True
    signs: bool = True
    alphanumeric: bool | None = None

    def validate(self):
        if self.noise is not None and not 0.0 <= self.noise <= 1.0:
            raise ValueError(f"noise rate must lie in [0, 1], got {self.noise}")
        if self.rooms is not None and self.rooms < 1:
            raise ValueError(f"room count must be >= 1, got {self.rooms}")


@dataclass(frozen=True)
class Corridor:
    """Axis-aligned free rectangle, inclusive bounds.

    Vertical corridors are traversed top to bottom with door slots on the
    left (side 0) and right (side 1) walls; horizontal ones left to right
    with slots on the top (side 0) and bottom (side 1) walls.
    """

    top: int
    left: int
    bottom: int
    right: int
    axis: str  # "v" or "h"

    def cells(self):
        for r in range(self.top, self.bottom + 1):
            for c in range(self.left, self.right + 1):
                yield (r, c)

    def slots(self, spacing: int):
        """(position index, side, wall cell, corridor cell) in traversal order."""
        if self.axis == "v":
            for i, r in enumerate(range(self.top, self.bottom + 1)):
                if i % spacing:
                    continue
                yield i, 0, (r, self.left - 1), (r, self.left)
                yield i, 1, (r, self.right + 1), (r, self.right)
        else:
            for i, c in enumerate(range(self.left, self.right + 1)):
                if i % spacing:
                    continue
                yield i, 0, (self.top - 1, c), (self.top, c)
                yield i, 1, (self.bottom + 1, c), (self.bottom, c)

    def intersection(self, other: "Corridor") -> tuple[int, int, int, int] | None:
        top, bottom = max(self.top, other.top), min(self.bottom, other.bottom)
        left, right = max(self.left, other.left), min(self.right, other.right)
        if top > bottom or left > right:
            return None
        return top, left, bottom, right


@dataclass(frozen=True)
class _Layout:
    corridors: tuple[Corridor, ...]
    door_spacing: int
    default_rooms: int | None
    sign_spacing: int | None
    alphanumeric: bool
    default_noise: float


def _v(top, bottom, left, width=1):
    return Corridor(top, left, bottom, left + width - 1, "v")


def _h(row, left, right, width=1):
    return Corridor(row, left, row + width - 1, right, "h")


_LAYOUTS: dict[Family, _Layout] = {
    Family.SMALL_H_SHAPE: _Layout(
        (_v(1, 9, 1), _h(5, 1, 5), _v(1, 9, 5)), 1, 12, None, False, 0.0
    ),
    Family.SMALL_HALLWAYS: _Layout(
        (_h(1, 1, 9), _h(5, 1, 9), _v(1, 5, 1), _v(1, 5, 9)), 1, 12, None, False, 0.0
    ),
    Family.SMALL_PLAZA: _Layout(
        (_v(1, 4, 3), Corridor(4, 1, 8, 5, "v"), _v(8, 11, 3)), 1, 10, None, False, 0.0
    ),
    Family.LARGE_H_SHAPE: _Layout(
        (
            _v(4, 127, 8, 3),
            _h(30, 10, 46, 3),
            _h(64, 8, 113, 3),
            _h(98, 75, 113, 3),
            _v(4, 127, 111, 3),
        ),
        4, None, 20, False, 0.0,
    ),
    Family.LARGE_L_SHAPE: _Layout(
        (
            _v(8, 86, 6, 3),
            _h(8, 6, 237, 3),
            _v(8, 54, 150, 3),
            _h(52, 100, 150, 3),
        ),
        4, None, 20, False, 0.0,
    ),
    Family.LARGE_OFFICES: _Layout(
        (
            _h(10, 6, 204, 3),
            _h(62, 6, 204, 3),
            _h(114, 6, 204, 3),
            _v(10, 116, 6, 3),
            _v(10, 116, 104, 3),
            _v(10, 116, 202, 3),
        ),
        4, None, 20, True, 0.0,
    ),
    Family.NOISY_POLYCAM: _Layout(
        (
            _h(20, 8, 128, 3),
            _h(124, 8, 128, 3),
            _h(228, 8, 128, 3),
            _v(20, 230, 8, 3),
            _v(20, 230, 67, 3),
            _v(20, 230, 126, 3),
        ),
        4, None, 20, True, 0.05,
    ),
}


@dataclass
class Floorplan:
    """A generated environment plus the structure it was built from."""

    env: Environment
    family: Family
    corridors: tuple[Corridor, ...]
    door_order: list[Cell] = field(default_factory=list)


def generate_environment(family, seed: int, params: GeneratorParams | None = None) -> Environment:
    return build_floorplan(family, seed, params).env


def build_floorplan(family, seed: int, params: GeneratorParams | None = None) -> Floorplan:
    family = Family(family)
    params = params or GeneratorParams()
    params.validate()
    layout = _LAYOUTS[family]
    rows, cols = FAMILY_SHAPES[family]
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, list(Family).index(family)])

    occ = np.ones((rows, cols), dtype=np.int8)
    for corridor in layout.corridors:
        for cell in corridor.cells():
            if not in_bounds(cell, rows, cols):
                raise GenerationError(f"corridor cell {cell} outside {rows}x{cols} grid")
            occ[cell] = 0
    labels = np.where(occ == 0, CellLabel.FREE.code, CellLabel.WALL.code).astype(np.int8)

    slots = _door_slots(layout, occ)
    n_rooms = params.rooms if params.rooms is not None else (layout.default_rooms or len(slots))
    if n_rooms > len(slots):
        raise GenerationError(
            f"{n_rooms} rooms requested but {family.value} has {len(slots)} door slots"
        )
    chosen = sorted(rng.choice(len(slots), size=n_rooms, replace=False).tolist())
    ordered = [slots[i] for i in chosen]
    if rng.random() < 0.5:
        ordered.reverse()
    alphanumeric = layout.alphanumeric if params.alphanumeric is None else params.alphanumeric
    names = _number_rooms([side for side, _, _ in ordered], rng, params.parity_sides, alphanumeric)

    attributes: dict[Cell, dict[str, str]] = {}
    door_order = []
    for (side, wall, _), name in zip(ordered, names):
        labels[wall] = CellLabel.DOOR.code
        attributes[wall] = {ROOM_NUMBER: name}
        door_order.append(wall)

    corridor_cells = sorted({cell for corridor in layout.corridors for cell in corridor.cells()})
    start = corridor_cells[int(rng.integers(len(corridor_cells)))]

    if params.signs:
        for cell in _sign_cells(layout, occ):
            text = _sign_text(occ, cell, attributes)
            if text:
                attributes.setdefault(cell, {})[SIGN_TEXT] = text

    noise = layout.default_noise if params.noise is None else params.noise
    if noise > 0:
        protected = {start, *attributes}
        protected.update(inner for _, _, inner in ordered)
        _apply_noise(occ, labels, rng, noise, protected)
        _repair_connectivity(occ, labels, start, [(wall, inner) for _, wall, inner in ordered])

    env = Environment(
        name=f"{family.value}-s{seed}",
        occupancy=occ,
        labels=labels,
        start=start,
        attributes=attributes,
    )
    return Floorplan(env=env, family=family, corridors=layout.corridors, door_order=door_order)


def _door_slots(layout: _Layout, occ: np.ndarray) -> list[tuple[int, Cell, Cell]]:
    rows, cols = occ.shape
    claimed: set[Cell] = set()
    slots = []
    for corridor in layout.corridors:
        for _, side, wall, inner in corridor.slots(layout.door_spacing):
            if not in_bounds(wall, rows, cols) or wall in claimed:
                continue
            if occ[wall] != 1 or occ[inner] != 0:
                continue
            claimed.add(wall)
            slots.append((side, wall, inner))
    return slots


def _number_rooms(sides: list[int], rng, parity_sides: bool, alphanumeric: bool) -> list[str]:
    """Strictly increasing identifiers for door slots in traversal order."""
    floor = int(rng.integers(1, 10))
    prev = floor * 100
    names: list[str] = []
    i = 0
    while i < len(sides):
        n = prev + 1
        if parity_sides and n % 2 != (1 if sides[i] == 0 else 0):
            n += 1
        remaining = len(sides) - i
        if alphanumeric and remaining >= 2 and rng.random() < 0.2:
            length = int(min(remaining, rng.integers(2, 4)))
            names.extend(f"{n}{chr(ord('A') + j)}" for j in range(length))
            i += length
        else:
            names.append(str(n))
            i += 1
        prev = n
    return names


def _sign_cells(layout: _Layout, occ: np.ndarray) -> list[Cell]:
    cells: set[Cell] = set()
    corridors = layout.corridors
    for i, a in enumerate(corridors):
        for b in corridors[i + 1:]:
            box = a.intersection(b)
            if box is not None:
                top, left, bottom, right = box
                cells.add(((top + bottom) // 2, (left + right) // 2))
    if layout.sign_spacing:
        for corridor in corridors:
            mid_r = (corridor.top + corridor.bottom) // 2
            mid_c = (corridor.left + corridor.right) // 2
            if corridor.axis == "v":
                for r in range(corridor.top + layout.sign_spacing, corridor.bottom, layout.sign_spacing):
                    cells.add((r, mid_c))
            else:
                for c in range(corridor.left + layout.sign_spacing, corridor.right, layout.sign_spacing):
                    cells.add((mid_r, c))
    return sorted(cell for cell in cells if occ[cell] == 0)


_DIRECTIONS = {(0, 1): "right", (0, -1): "left", (-1, 0): "up", (1, 0): "down"}
_DIRECTION_PHRASES = {
    "right": "to the right",
    "left": "to the left",
    "up": "upwards",
    "down": "downwards",
}


def _first_steps(occ: np.ndarray, origin: Cell) -> dict[Cell, tuple[int, int]]:
    """BFS over free cells recording the first move taken from ``origin``."""
    rows, cols = occ.shape
    first: dict[Cell, tuple[int, int]] = {origin: (0, 0)}
    queue = deque([origin])
    while queue:
        cell = queue.popleft()
        for dr, dc in NEIGHBOR_OFFSETS:
            nxt = (cell[0] + dr, cell[1] + dc)
            if nxt in first or not in_bounds(nxt, rows, cols) or occ[nxt] != 0:
                continue
            first[nxt] = (dr, dc) if cell == origin else first[cell]
            queue.append(nxt)
    return first


def _in_half_plane(origin: Cell, cell: Cell, direction: str) -> bool:
    dr, dc = cell[0] - origin[0], cell[1] - origin[1]
    return {"right": dc > 0, "left": dc < 0, "up": dr < 0, "down": dr > 0}[direction]


def _sign_text(occ: np.ndarray, origin: Cell, attributes: dict[Cell, dict[str, str]]) -> str:
    rows, cols = occ.shape
    first = _first_steps(occ, origin)
    rooms = sorted(
        ((values[ROOM_NUMBER], cell) for cell, values in attributes.items() if ROOM_NUMBER in values),
        key=lambda item: identifier_key(item[0]) or (0, item[0]),
    )
    direction_of: dict[str, str] = {}
    for name, door in rooms:
        best = None
        for n in neighbors4(door, rows, cols):
            if n == origin:
                best = (0, _DIRECTIONS[(door[0] - origin[0], door[1] - origin[1])])
                break
            if n in first and occ[n] == 0:
                dist = abs(n[0] - origin[0]) + abs(n[1] - origin[1])
                step = _DIRECTIONS[first[n]]
                if best is None or dist < best[0]:
                    best = (dist, step)
        if best is not None and _in_half_plane(origin, door, best[1]):
            direction_of[name] = best[1]

    clauses = []
    for direction in ("right", "left", "up", "down"):
        items = _compress(rooms, direction_of, direction)
        if items:
            clauses.append(f"Rooms {', '.join(items)} {_DIRECTION_PHRASES[direction]}")
    return "; ".join(clauses) + "." if clauses else ""


def _compress(rooms, direction_of: dict[str, str], direction: str) -> list[str]:
    """Collapse runs of consecutive (in sorted order) rooms into ranges.

    A range ``a–b`` is only emitted when every room whose numeric part lies in
    ``[a, b]`` goes the same way, so the sign never over-claims.
    """
    names = [name for name, _ in rooms]
    keys = [identifier_key(name) for name in names]
    items: list[str] = []
    i = 0
    while i < len(names):
        if direction_of.get(names[i]) != direction:
            i += 1
            continue
        j = i
        while j + 1 < len(names) and direction_of.get(names[j + 1]) == direction:
            j += 1
        run = names[i:j + 1]
        lo, hi = keys[i], keys[j]
        if lo is None or hi is None:
            items.extend(run)
        else:
            covered = [n for n, k in zip(names, keys) if k is not None and lo[0] <= k[0] <= hi[0]]
            if set(covered) <= set(run):
                items.append(str(lo[0]) if lo[0] == hi[0] else f"{lo[0]}–{hi[0]}")
            else:
                items.extend(run)
        i = j + 1
    return items


def _apply_noise(occ, labels, rng, rate: float, protected: set[Cell]):
    """i.i.d. wall<->free flips on interior cells, skipping doors and protected cells."""
    rows, cols = occ.shape
    flips = rng.random((rows, cols)) < rate
    flips[0, :] = flips[-1, :] = False
    flips[:, 0] = flips[:, -1] = False
    flips &= labels != CellLabel.DOOR.code
    for cell in protected:
        flips[cell] = False
    occ[flips] = 1 - occ[flips]
    labels[flips] = np.where(occ[flips] == 0, CellLabel.FREE.code, CellLabel.WALL.code)


def _reachable(occ: np.ndarray, sources) -> np.ndarray:
    rows, cols = occ.shape
    seen = np.zeros(occ.shape, dtype=bool)
    queue = deque()
    for s in sources:
        if occ[s] == 0 and not seen[s]:
            seen[s] = True
            queue.append(s)
    while queue:
        cell = queue.popleft()
        for n in neighbors4(cell, rows, cols):
            if not seen[n] and occ[n] == 0:
                seen[n] = True
                queue.append(n)
    return seen


def _repair_connectivity(occ, labels, start: Cell, doors: list[tuple[Cell, Cell]]):
    """Carve the fewest walls needed so every door's corridor neighbor is reachable."""
    rows, cols = occ.shape
    door_mask = labels == CellLabel.DOOR.code
    reach = _reachable(occ, [start])
    for _, inner in doors:
        if reach[inner]:
            continue
        # 0-1 BFS: free cells cost 0, interior walls cost 1; doors and the border are off limits.
        dist = np.full(occ.shape, np.iinfo(np.int32).max, dtype=np.int64)
        parent: dict[Cell, Cell] = {}
        dq = deque()
        for r, c in np.argwhere(reach).tolist():
            dist[r, c] = 0
            dq.append((r, c))
        while dq:
            cell = dq.popleft()
            if cell == inner:
                break
            for n in neighbors4(cell, rows, cols):
                r, c = n
                if door_mask[n] or r in (0, rows - 1) or c in (0, cols - 1):
                    continue
                w = 0 if occ[n] == 0 else 1
                if dist[cell] + w < dist[n]:
                    dist[n] = dist[cell] + w
                    parent[n] = cell
                    (dq.appendleft if w == 0 else dq.append)(n)
        if dist[inner] == np.iinfo(np.int32).max:
            raise GenerationError(f"cannot reconnect door neighbor {inner}")
        cell = inner
        while not reach[cell]:
            occ[cell] = 0
            labels[cell] = CellLabel.FREE.code
            cell = parent[cell]
        reach = _reachable(occ, [start])
