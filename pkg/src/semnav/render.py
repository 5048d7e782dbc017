"""ASCII, PPM (P6) and SVG renderings of maps, beliefs, confidence and paths.

Everything here is a pure function of its inputs, so identical inputs give
identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .belief import ConfidenceGrid
from .gridworld import ROOM_NUMBER, SIGN_TEXT, Cell, CellLabel, Environment, same_identifier
from .perception import UNKNOWN, AgentBelief
from .planning import frontier_mask

LAYERS = ("occupancy", "semantics", "confidence", "trajectory", "frontier")
FORMATS = ("ascii", "ppm", "svg")
SHADES = " 123456789"


@dataclass(frozen=True)
class RenderSpec:
    layers: tuple[str, ...] = ("occupancy", "semantics", "trajectory")
    format: str = "ascii"
    cell_px: int = 8

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a render needs at least one layer")
        unknown = set(self.layers) - set(LAYERS)
        if unknown:
            raise ValueError(f"unknown layers: {sorted(unknown)}")
        if self.format not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}")
        if self.cell_px < 1:
            raise ValueError("cell_px must be positive")


def _grids(world: Environment | AgentBelief):
    """(occupancy, labels, attributes) with -1 marking unknown cells."""
    if isinstance(world, Environment):
        return world.occupancy.astype(np.int8), world.labels.astype(np.int8), dict(world.attributes)
    return world.seen_occ, world.seen_labels, dict(world.seen_sem)


def render_ascii(
    world: Environment | AgentBelief,
    confidence: ConfidenceGrid | None = None,
    trajectory: Sequence[Cell] | None = None,
    agent: Cell | None = None,
    goal: str | None = None,
) -> str:
    """One character per cell, rows separated by newlines.

    Precedence, highest first: '@' agent, 'G' goal room, '*' trajectory,
    'S' sign, 'D' door, '#' wall, '.' free, ' ' unknown. When a confidence
    grid is given, free and unknown cells show its value as a digit 1-9
    scaled by the current maximum (zero stays '.' or ' ').
    """
    occ, labels, attrs = _grids(world)
    rows, cols = occ.shape
    if confidence is not None and confidence.values.shape != (rows, cols):
        raise ValueError("confidence grid shape does not match the map")
    chars = np.full((rows, cols), " ", dtype="<U1")
    chars[occ == 0] = "."
    chars[occ == 1] = "#"
    chars[labels == CellLabel.DOOR.code] = "D"
    if confidence is not None:
        peak = float(confidence.values.max())
        if peak > 0:
            level = np.ceil(confidence.values / peak * 9).astype(int)
            shade = (occ != 1) & (level > 0)
            chars[shade] = np.array(list(SHADES))[level[shade]]
    for cell, values in attrs.items():
        if SIGN_TEXT in values:
            chars[cell] = "S"
    for cell in trajectory or ():
        chars[tuple(cell)] = "*"
    if goal is not None:
        for cell, values in attrs.items():
            room = values.get(ROOM_NUMBER)
            if room is not None and same_identifier(room, goal):
                chars[cell] = "G"
    if agent is not None:
        chars[tuple(agent)] = "@"
    return "\n".join("".join(row) for row in chars)


# --- raster / vector --------------------------------------------------------

_BASE = np.array([24, 24, 48], dtype=np.float64)
_HOT = np.array([255, 200, 0], dtype=np.float64)
_PALETTE = {
    "unknown": (40, 40, 40),
    "free": (235, 235, 235),
    "wall": (20, 20, 20),
    "door": (150, 90, 40),
    "sign": (40, 140, 220),
    "trajectory": (220, 40, 40),
    "frontier": (60, 200, 90),
    "goal": (250, 0, 200),
    "agent": (0, 90, 255),
}


def heat_colors(grid: ConfidenceGrid) -> np.ndarray:
    """(rows, cols, 3) uint8 colors, linear from base to hot by value / max."""
    peak = float(grid.values.max())
    t = grid.values / peak if peak > 0 else np.zeros_like(grid.values)
    rgb = _BASE + t[..., None] * (_HOT - _BASE)
    return np.rint(rgb).astype(np.uint8)


def _ppm(colors: np.ndarray, cell_px: int) -> bytes:
    img = np.repeat(np.repeat(colors, cell_px, axis=0), cell_px, axis=1)
    h, w, _ = img.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def _svg(colors: np.ndarray, cell_px: int) -> bytes:
    rows, cols, _ = colors.shape
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{cols * cell_px}" '
        f'height="{rows * cell_px}" shape-rendering="crispEdges">'
    ]
    for r in range(rows):
        for c in range(cols):
            red, green, blue = (int(v) for v in colors[r, c])
            out.append(
                f'<rect x="{c * cell_px}" y="{r * cell_px}" width="{cell_px}" height="{cell_px}" '
                f'fill="#{red:02x}{green:02x}{blue:02x}"/>'
            )
    out.append("</svg>\n")
    return "\n".join(out).encode("utf-8")


def _encode(colors: np.ndarray, fmt: str, cell_px: int) -> bytes:
    if fmt == "ppm":
        return _ppm(colors, cell_px)
    if fmt == "svg":
        return _svg(colors, cell_px)
    raise ValueError(f"image format must be 'ppm' or 'svg', got {fmt!r}")


def render_heatmap(grid: ConfidenceGrid, fmt: str = "ppm", cell_px: int = 8) -> bytes:
    """Confidence heatmap normalized by the grid's current maximum."""
    return _encode(heat_colors(grid), fmt, cell_px)


def layer_colors(
    world: Environment | AgentBelief,
    spec: RenderSpec,
    confidence: ConfidenceGrid | None = None,
    trajectory: Iterable[Cell] = (),
    agent: Cell | None = None,
    goal: str | None = None,
) -> np.ndarray:
    occ, labels, attrs = _grids(world)
    rows, cols = occ.shape
    colors = np.zeros((rows, cols, 3), dtype=np.uint8)
    colors[:] = _PALETTE["unknown"]
    if "occupancy" in spec.layers:
        colors[occ == 0] = _PALETTE["free"]
        colors[occ == 1] = _PALETTE["wall"]
    if "confidence" in spec.layers and confidence is not None:
        heat = heat_colors(confidence)
        mask = (occ != 1) & (confidence.values > 0)
        colors[mask] = heat[mask]
    if "frontier" in spec.layers:
        colors[frontier_mask(occ)] = _PALETTE["frontier"]
    if "semantics" in spec.layers:
        colors[labels == CellLabel.DOOR.code] = _PALETTE["door"]
        for cell, values in attrs.items():
            if SIGN_TEXT in values:
                colors[cell] = _PALETTE["sign"]
    if "trajectory" in spec.layers:
        for cell in trajectory:
            colors[tuple(cell)] = _PALETTE["trajectory"]
    if goal is not None:
        for cell, values in attrs.items():
            room = values.get(ROOM_NUMBER)
            if room is not None and same_identifier(room, goal):
                colors[cell] = _PALETTE["goal"]
    if agent is not None:
        colors[tuple(agent)] = _PALETTE["agent"]
    return colors


def render(
    world: Environment | AgentBelief,
    spec: RenderSpec,
    confidence: ConfidenceGrid | None = None,
    trajectory: Sequence[Cell] = (),
    agent: Cell | None = None,
    goal: str | None = None,
) -> bytes:
    """Render ``world`` in the requested format; ASCII comes back UTF-8 encoded."""
    if spec.format == "ascii":
        conf = confidence if "confidence" in spec.layers else None
        traj = trajectory if "trajectory" in spec.layers else None
        text = render_ascii(world, conf, traj, agent, goal)
        if "frontier" in spec.layers:
            occ = _grids(world)[0]
            grid = [list(line) for line in text.split("\n")]
            for r, c in np.argwhere(frontier_mask(occ)):
                if grid[r][c] in ".123456789":
                    grid[r][c] = "+"
            text = "\n".join("".join(line) for line in grid)
        return (text + "\n").encode("utf-8")
    colors = layer_colors(world, spec, confidence, trajectory, agent, goal)
    return _encode(colors, spec.format, spec.cell_px)
