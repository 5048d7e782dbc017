"""k x k window observations and the agent's accumulated seen grids."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .gridworld import (
    ROOM_NUMBER,
    Cell,
    CellLabel,
    CellSemantics,
    Environment,
    dumps_canonical,
    in_bounds,
    parse_grid_document,
    same_identifier,
    semantics_entries,
)

UNKNOWN = -1


class ConflictError(Exception):
    """An observation contradicts something already seen."""


@dataclass(frozen=True)
class Observation:
    center: Cell
    k: int
    patch: tuple[tuple[Cell, int, CellSemantics], ...]

    def cells(self) -> list[Cell]:
        return [cell for cell, _, _ in self.patch]


def observe(env: Environment, agent_pos: Cell, k: int) -> Observation:
    """Ground truth inside the k x k window around ``agent_pos``, clipped at the map edge."""
    if k < 1 or k % 2 == 0:
        raise ValueError(f"window size must be odd and >= 1, got {k}")
    half = (k - 1) // 2
    r0, c0 = agent_pos
    patch = []
    for r in range(max(0, r0 - half), min(env.rows, r0 + half + 1)):
        for c in range(max(0, c0 - half), min(env.cols, c0 + half + 1)):
            patch.append(((r, c), int(env.occupancy[r, c]), env.semantics((r, c))))
    return Observation(center=(int(r0), int(c0)), k=k, patch=tuple(patch))


@dataclass(frozen=True, eq=False)
class AgentBelief:
    """What the agent has seen so far.

    ``seen_occ`` uses -1 for unknown, 0 free, 1 occupied; ``seen_labels``
    mirrors it with label codes (-1 unknown). ``seen_sem`` holds the
    attribute maps of observed cells; unobserved cells are absent (the
    empty map).
    """

    seen_occ: np.ndarray
    seen_labels: np.ndarray
    seen_sem: Mapping[Cell, Mapping[str, str]] = field(default_factory=dict)
    pattern_notes: tuple[str, ...] = ()

    @classmethod
    def empty(cls, rows: int, cols: int) -> "AgentBelief":
        return cls(
            seen_occ=np.full((rows, cols), UNKNOWN, dtype=np.int8),
            seen_labels=np.full((rows, cols), UNKNOWN, dtype=np.int8),
        )

    @classmethod
    def for_env(cls, env: Environment) -> "AgentBelief":
        return cls.empty(env.rows, env.cols)

    @property
    def rows(self) -> int:
        return int(self.seen_occ.shape[0])

    @property
    def cols(self) -> int:
        return int(self.seen_occ.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def with_notes(self, notes) -> "AgentBelief":
        """Append new pattern notes, skipping ones already recorded."""
        merged = list(self.pattern_notes)
        for note in notes:
            if note and note not in merged:
                merged.append(note)
        return AgentBelief(self.seen_occ, self.seen_labels, self.seen_sem, tuple(merged))

    def __eq__(self, other):
        if not isinstance(other, AgentBelief):
            return NotImplemented
        return (
            np.array_equal(self.seen_occ, other.seen_occ)
            and np.array_equal(self.seen_labels, other.seen_labels)
            and dict(self.seen_sem) == dict(other.seen_sem)
            and self.pattern_notes == other.pattern_notes
        )

    __hash__ = None  # type: ignore[assignment]


def fuse(belief: AgentBelief, obs: Observation) -> AgentBelief:
    """Write an observation into a copy of the belief.

    Re-observing a known cell is a no-op; a different value raises
    ConflictError since the ground truth never changes.
    """
    occ = belief.seen_occ.copy()
    labels = belief.seen_labels.copy()
    sem = dict(belief.seen_sem)
    for cell, value, semantics in obs.patch:
        if not in_bounds(cell, belief.rows, belief.cols):
            raise ValueError(f"observation cell {cell} outside belief grid {belief.shape}")
        code = semantics.label.code
        known = occ[cell]
        if known != UNKNOWN and (known != value or labels[cell] != code):
            raise ConflictError(f"cell {cell} seen as {known}, now observed as {value}")
        if known != UNKNOWN and dict(sem.get(cell, {})) != dict(semantics.attributes):
            raise ConflictError(f"cell {cell} attributes changed between observations")
        occ[cell] = value
        labels[cell] = code
        if semantics.attributes:
            sem[cell] = dict(semantics.attributes)
    return AgentBelief(occ, labels, sem, belief.pattern_notes)


def goal_visible(belief: AgentBelief, goal: str) -> Cell | None:
    for cell in sorted(belief.seen_sem):
        room = belief.seen_sem[cell].get(ROOM_NUMBER)
        if room is not None and same_identifier(room, goal):
            return cell
    return None


def explored_fraction(belief: AgentBelief) -> float:
    return float(np.count_nonzero(belief.seen_occ != UNKNOWN)) / belief.seen_occ.size


def belief_to_dict(belief: AgentBelief, agent_pos: Cell, name: str = "belief") -> dict:
    """Snapshot in the environment schema; '-' marks unknown cells and
    ``start`` holds the agent position at snapshot time."""
    chars = {UNKNOWN: "-", 0: "0", 1: "1"}
    return {
        "name": name,
        "rows": belief.rows,
        "cols": belief.cols,
        "start": [int(agent_pos[0]), int(agent_pos[1])],
        "occupancy": ["".join(chars[v] for v in row) for row in belief.seen_occ.tolist()],
        "semantics": semantics_entries(belief.seen_labels, belief.seen_occ, belief.seen_sem),
        "pattern_notes": list(belief.pattern_notes),
    }


def save_belief(belief: AgentBelief, agent_pos: Cell, name: str = "belief") -> bytes:
    return dumps_canonical(belief_to_dict(belief, agent_pos, name))


def load_belief(source) -> tuple[AgentBelief, Cell]:
    parsed = parse_grid_document(source, occupancy_alphabet="-01")
    notes = parsed["doc"].get("pattern_notes", [])
    if not isinstance(notes, list) or not all(isinstance(n, str) for n in notes):
        raise ValueError("pattern_notes must be a list of strings")
    occ, labels = parsed["occupancy"], parsed["labels"]
    for cell in parsed["attributes"]:
        if occ[cell] == UNKNOWN:
            raise ValueError(f"attributes recorded for unseen cell {cell}")
    mismatch = (occ != UNKNOWN) & ((occ == 0) != (labels == CellLabel.FREE.code))
    if mismatch.any():
        raise ValueError(f"label contradicts occupancy at {tuple(np.argwhere(mismatch)[0])}")
    belief = AgentBelief(occ, labels, parsed["attributes"], tuple(notes))
    return belief, parsed["start"]

