"""Ground-truth grid environments and their JSON file format.

Coordinates are ``(row, col)`` with row 0 at the top. ``Up`` decreases the
row, ``Right`` increases the column. Every module in the package uses this
convention.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping

import numpy as np

Cell = tuple[int, int]

ROOM_NUMBER = "room_number"
SIGN_TEXT = "sign_text"

NEIGHBOR_OFFSETS = ((-1, 0), (1, 0), (0, -1), (0, 1))


class GridworldError(Exception):
    pass


class ParseError(GridworldError):
    """Malformed environment file. ``locus`` names the line or field at fault."""

    def __init__(self, message: str, locus: str | None = None):
        self.locus = locus
        super().__init__(f"{locus}: {message}" if locus else message)


class ValidationError(GridworldError):
    pass


class GoalNotFound(GridworldError, KeyError):
    def __str__(self):
        # KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


class AmbiguousGoal(GridworldError):
    pass


class CellLabel(str, Enum):
    FREE = "Free"
    WALL = "Wall"
    DOOR = "Door"

    @property
    def code(self) -> int:
        return _LABEL_CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "CellLabel":
        return _LABELS_BY_CODE[int(code)]


_LABEL_CODES = {CellLabel.FREE: 0, CellLabel.WALL: 1, CellLabel.DOOR: 2}
_LABELS_BY_CODE = {v: k for k, v in _LABEL_CODES.items()}


class Direction(str, Enum):
    """The four grid directions; serialized as lowercase words."""

    UP = "up"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"

    @property
    def delta(self) -> tuple[int, int]:
        return _DELTAS[self]

    @classmethod
    def parse(cls, value) -> "Direction | None":
        """Lenient parse of a wire value; None for anything outside the enum."""
        if isinstance(value, Direction):
            return value
        if not isinstance(value, str):
            return None
        try:
            return cls(value.strip().lower())
        except ValueError:
            return None

    @classmethod
    def between(cls, a: "Cell", b: "Cell") -> "Direction":
        return _BY_DELTA[(b[0] - a[0], b[1] - a[1])]


_DELTAS = {
    Direction.UP: (-1, 0),
    Direction.DOWN: (1, 0),
    Direction.LEFT: (0, -1),
    Direction.RIGHT: (0, 1),
}
_BY_DELTA = {v: k for k, v in _DELTAS.items()}


@dataclass(frozen=True)
class CellSemantics:
    label: CellLabel
    attributes: Mapping[str, str] = field(default_factory=dict)

    @property
    def room_number(self) -> str | None:
        return self.attributes.get(ROOM_NUMBER)

    @property
    def sign_text(self) -> str | None:
        return self.attributes.get(SIGN_TEXT)


def in_bounds(cell: Cell, rows: int, cols: int) -> bool:
    return 0 <= cell[0] < rows and 0 <= cell[1] < cols


def neighbors4(cell: Cell, rows: int, cols: int) -> Iterator[Cell]:
    r, c = cell
    for dr, dc in NEIGHBOR_OFFSETS:
        rr, cc = r + dr, c + dc
        if 0 <= rr < rows and 0 <= cc < cols:
            yield (rr, cc)


def same_identifier(a: str, b: str) -> bool:
    """Room identifiers compare case-insensitively ("641l" names room "641L")."""
    return a.strip().casefold() == b.strip().casefold()


_IDENT_RE = re.compile(r"^\s*(\d+)\s*([A-Za-z]*)\s*$")


def identifier_key(identifier: str) -> tuple[int, str] | None:
    """Sort key for room identifiers: numeric part first, then suffix.

    Returns None for identifiers without a leading numeric part.

    >>> sorted(["642", "641B", "641A"], key=identifier_key)
    ['641A', '641B', '642']
    """
    m = _IDENT_RE.match(identifier)
    if not m:
        return None
    return int(m.group(1)), m.group(2).upper()


def numeric_part(identifier: str) -> int | None:
    key = identifier_key(identifier)
    return None if key is None else key[0]


@dataclass(frozen=True, eq=False)
class Environment:
    """Static ground truth: occupancy, semantic labels, attributes and start.

    ``occupancy`` holds 0 (free) / 1 (occupied); ``labels`` holds
    ``CellLabel`` codes. Both arrays are made read-only on construction.
    ``attributes`` maps a cell to its free-form attributes; cells without
    attributes are absent.
    """

    name: str
    occupancy: np.ndarray
    labels: np.ndarray
    start: Cell
    attributes: Mapping[Cell, Mapping[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        occ = np.array(self.occupancy, dtype=np.int8)
        lab = np.array(self.labels, dtype=np.int8)
        occ.setflags(write=False)
        lab.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "start", (int(self.start[0]), int(self.start[1])))
        attrs = {
            (int(cell[0]), int(cell[1])): dict(values)
            for cell, values in self.attributes.items()
            if values
        }
        object.__setattr__(self, "attributes", attrs)
        self._validate()

    def _validate(self):
        occ, lab = self.occupancy, self.labels
        if occ.ndim != 2 or occ.shape[0] < 1 or occ.shape[1] < 1:
            raise ValidationError(f"occupancy must be a non-empty 2D grid, got shape {occ.shape}")
        if lab.shape != occ.shape:
            raise ValidationError(f"label grid shape {lab.shape} != occupancy shape {occ.shape}")
        if not np.isin(occ, (0, 1)).all():
            raise ValidationError("occupancy values must be 0 or 1")
        if not np.isin(lab, (0, 1, 2)).all():
            raise ValidationError("unknown label code")
        bad = (occ == 0) != (lab == CellLabel.FREE.code)
        if bad.any():
            r, c = map(int, np.argwhere(bad)[0])
            raise ValidationError(
                f"cell ({r}, {c}): occupancy {occ[r, c]} contradicts label "
                f"{CellLabel.from_code(lab[r, c]).value}"
            )
        if not in_bounds(self.start, self.rows, self.cols):
            raise ValidationError(f"start {self.start} out of bounds")
        if occ[self.start] != 0:
            raise ValidationError(f"start {self.start} is not a free cell")
        for cell, values in self.attributes.items():
            if not in_bounds(cell, self.rows, self.cols):
                raise ValidationError(f"attributes at out-of-bounds cell {cell}")
            for key, value in values.items():
                if not isinstance(key, str) or not key:
                    raise ValidationError(f"cell {cell}: attribute names must be non-empty strings")
                if not isinstance(value, str):
                    raise ValidationError(f"cell {cell}: attribute {key!r} must be a string")
            if ROOM_NUMBER in values and occ[cell] != 0:
                if not any(occ[n] == 0 for n in neighbors4(cell, self.rows, self.cols)):
                    raise ValidationError(f"room cell {cell} has no free 4-neighbor")

    @property
    def rows(self) -> int:
        return int(self.occupancy.shape[0])

    @property
    def cols(self) -> int:
        return int(self.occupancy.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def label(self, cell: Cell) -> CellLabel:
        return CellLabel.from_code(self.labels[cell])

    def semantics(self, cell: Cell) -> CellSemantics:
        return CellSemantics(self.label(cell), dict(self.attributes.get(cell, {})))

    def is_free(self, cell: Cell) -> bool:
        return in_bounds(cell, self.rows, self.cols) and self.occupancy[cell] == 0

    def rooms(self) -> dict[str, list[Cell]]:
        """Room identifier -> cells carrying it (row-major order)."""
        out: dict[str, list[Cell]] = {}
        for cell in sorted(self.attributes):
            room = self.attributes[cell].get(ROOM_NUMBER)
            if room is not None:
                out.setdefault(room, []).append(cell)
        return out

    def signs(self) -> dict[Cell, str]:
        return {
            cell: values[SIGN_TEXT]
            for cell, values in sorted(self.attributes.items())
            if SIGN_TEXT in values
        }

    def __eq__(self, other):
        if not isinstance(other, Environment):
            return NotImplemented
        return (
            self.name == other.name
            and self.start == other.start
            and np.array_equal(self.occupancy, other.occupancy)
            and np.array_equal(self.labels, other.labels)
            and self.attributes == other.attributes
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class GoalSpec:
    identifier: str
    target_cell: Cell

    @classmethod
    def resolve(cls, env: Environment, identifier: str) -> "GoalSpec":
        return cls(identifier, goal_cell(env, identifier))


def goal_cell(env: Environment, identifier: str) -> Cell:
    matches = [
        cell
        for cell, values in sorted(env.attributes.items())
        if ROOM_NUMBER in values and same_identifier(values[ROOM_NUMBER], identifier)
    ]
    if not matches:
        raise GoalNotFound(f"room {identifier!r} not in environment {env.name!r}")
    if len(matches) > 1:
        raise AmbiguousGoal(f"room {identifier!r} occurs at {matches}")
    return matches[0]


# --- file format -----------------------------------------------------------

_TOP_KEYS = ("name", "rows", "cols", "start", "occupancy", "semantics")
_KNOWN_ATTRS = (ROOM_NUMBER, SIGN_TEXT)


def _attribute_order(values: Mapping[str, str]) -> list[str]:
    known = [k for k in _KNOWN_ATTRS if k in values]
    return known + sorted(k for k in values if k not in _KNOWN_ATTRS)


def semantics_entries(labels: np.ndarray, occupancy: np.ndarray, attributes) -> list[dict]:
    """Sparse semantic entries: cells whose label is not the occupancy default or that carry attributes."""
    cells = set(attributes)
    cells.update(map(tuple, np.argwhere(labels == CellLabel.DOOR.code).tolist()))
    entries = []
    for cell in sorted((int(r), int(c)) for r, c in cells):
        code = int(labels[cell])
        entry: dict = {"cell": [cell[0], cell[1]], "label": CellLabel.from_code(code).value}
        values = attributes.get(cell, {})
        for key in _attribute_order(values):
            entry[key] = values[key]
        entries.append(entry)
    return entries


def environment_to_dict(env: Environment) -> dict:
    return {
        "name": env.name,
        "rows": env.rows,
        "cols": env.cols,
        "start": [env.start[0], env.start[1]],
        "occupancy": ["".join("1" if v else "0" for v in row) for row in env.occupancy.tolist()],
        "semantics": semantics_entries(env.labels, env.occupancy, env.attributes),
    }


def dumps_canonical(doc: dict) -> bytes:
    return (json.dumps(doc, ensure_ascii=False, indent=1) + "\n").encode("utf-8")


def save_environment(env: Environment) -> bytes:
    """Serialize to canonical UTF-8 JSON; save(load(save(env))) is byte-identical."""
    return dumps_canonical(environment_to_dict(env))


def _expect(cond: bool, message: str, locus: str):
    if not cond:
        raise ParseError(message, locus)


def _parse_cell(value, locus: str) -> Cell:
    _expect(
        isinstance(value, list)
        and len(value) == 2
        and all(isinstance(v, int) and not isinstance(v, bool) for v in value),
        "expected [row, col] integer pair",
        locus,
    )
    return (value[0], value[1])


def parse_grid_document(source, occupancy_alphabet: str = "01") -> dict:
    """Decode and structurally check an environment-style JSON document.

    Returns a dict with parsed ``occupancy`` (int8, with -1 for '-' when the
    alphabet allows it), ``labels``, ``attributes`` and the raw document.
    Semantic errors (label/occupancy mismatch) are left to the caller.
    """
    if isinstance(source, (bytes, bytearray)):
        try:
            text = bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not valid UTF-8 ({exc.reason})", f"byte {exc.start}") from exc
    elif isinstance(source, str):
        text = source
    else:
        return parse_grid_document(source.read(), occupancy_alphabet)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    _expect(isinstance(doc, dict), "top level must be an object", "$")
    for key in ("name", "rows", "cols", "start", "occupancy"):
        _expect(key in doc, "missing required key", key)
    _expect(isinstance(doc["name"], str), "must be a string", "name")
    for key in ("rows", "cols"):
        v = doc[key]
        _expect(isinstance(v, int) and not isinstance(v, bool) and v > 0, "must be a positive integer", key)
    rows, cols = doc["rows"], doc["cols"]
    start = _parse_cell(doc["start"], "start")
    grid_rows = doc["occupancy"]
    _expect(isinstance(grid_rows, list), "must be a list of strings", "occupancy")
    if len(grid_rows) != rows:
        raise ValidationError(f"occupancy has {len(grid_rows)} rows, header says {rows}")
    lut = {"0": 0, "1": 1, "-": -1}
    occ = np.empty((rows, cols), dtype=np.int8)
    for r, line in enumerate(grid_rows):
        _expect(isinstance(line, str), "must be a string", f"occupancy[{r}]")
        if len(line) != cols:
            raise ValidationError(f"occupancy[{r}] has {len(line)} columns, header says {cols}")
        for c, ch in enumerate(line):
            _expect(ch in occupancy_alphabet, f"unexpected character {ch!r}", f"occupancy[{r}][{c}]")
            occ[r, c] = lut[ch]
    labels = np.where(occ == 0, CellLabel.FREE.code, np.where(occ == 1, CellLabel.WALL.code, -1)).astype(np.int8)
    attributes: dict[Cell, dict[str, str]] = {}
    semantics = doc.get("semantics", [])
    _expect(isinstance(semantics, list), "must be a list", "semantics")
    seen: set[Cell] = set()
    for i, entry in enumerate(semantics):
        locus = f"semantics[{i}]"
        _expect(isinstance(entry, dict), "must be an object", locus)
        _expect("cell" in entry and "label" in entry, "needs 'cell' and 'label'", locus)
        cell = _parse_cell(entry["cell"], f"{locus}.cell")
        if not in_bounds(cell, rows, cols):
            raise ValidationError(f"{locus}: cell {cell} out of bounds")
        _expect(cell not in seen, f"duplicate entry for cell {cell}", locus)
        seen.add(cell)
        try:
            label = CellLabel(entry["label"])
        except ValueError:
            raise ParseError(f"unknown label {entry['label']!r}", f"{locus}.label") from None
        labels[cell] = label.code
        values = {}
        for key, value in entry.items():
            if key in ("cell", "label"):
                continue
            _expect(isinstance(value, str), "attribute values must be strings", f"{locus}.{key}")
            _expect(bool(key), "attribute names must be non-empty", locus)
            values[key] = value
        if values:
            attributes[cell] = values
    return {
        "doc": doc,
        "name": doc["name"],
        "start": start,
        "occupancy": occ,
        "labels": labels,
        "attributes": attributes,
    }


def load_environment(source) -> Environment:
    """Parse an environment file (bytes, str or binary file object).

    Raises ParseError for syntax problems and ValidationError for content
    that breaks an environment invariant.
    """
    parsed = parse_grid_document(source)
    unknown = sorted(set(parsed["doc"]) - set(_TOP_KEYS))
    if unknown:
        raise ParseError(f"unknown top-level keys {unknown}", unknown[0])
    return Environment(
        name=parsed["name"],
        occupancy=parsed["occupancy"],
        labels=parsed["labels"],
        start=parsed["start"],
        attributes=parsed["attributes"],
    )


def make_environment(
    occupancy,
    *,
    start: Cell,
    name: str = "env",
    doors: Mapping[Cell, str] | None = None,
    attributes: Mapping[Cell, Mapping[str, str]] | None = None,
) -> Environment:
    """Build an environment from an occupancy array or ``'#'/'.'`` strings.

    ``doors`` maps door cells to their room numbers; other occupied cells
    are walls. Handy for hand-authored maps and tests.
    """
    if isinstance(occupancy, (list, tuple)) and occupancy and isinstance(occupancy[0], str):
        occ = np.array([[0 if ch in ".0" else 1 for ch in line] for line in occupancy], dtype=np.int8)
    else:
        occ = np.array(occupancy, dtype=np.int8)
    labels = np.where(occ == 0, CellLabel.FREE.code, CellLabel.WALL.code).astype(np.int8)
    attrs: dict[Cell, dict[str, str]] = {k: dict(v) for k, v in (attributes or {}).items()}
    for cell, room in (doors or {}).items():
        occ[cell] = 1
        labels[cell] = CellLabel.DOOR.code
        attrs.setdefault(cell, {})[ROOM_NUMBER] = room
    return Environment(name=name, occupancy=occ, labels=labels, start=start, attributes=attrs)
