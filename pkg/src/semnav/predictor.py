"""Goal-region predictors: the seat a language model would occupy.

A predictor looks at the seen grids and the agent position and names the
half-plane (up/down/left/right of the agent) where the goal probably is,
or abstains. Implementations here:

* ``RuleBasedPredictor`` -- sign directives first, then a least-squares
  fit of room number against position (optionally per odd/even class).
* ``UniformPredictor`` -- seeded uniform regions.
* ``ScriptedPredictor`` -- replays a fixed list, then abstains.
* ``OraclePredictor`` -- names the true half-plane from ground truth.
* ``ExternalPredictor`` -- JSON over HTTP, with an NDJSON transcript that
  ``ReplayPredictor`` can play back deterministically.
"""

from __future__ import annotations

import json
import re
import socket
import urllib.error
import urllib.request
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .belief import Region
from .gridworld import (
    ROOM_NUMBER,
    SIGN_TEXT,
    Cell,
    Environment,
    GoalSpec,
    identifier_key,
    numeric_part,
)
from .perception import UNKNOWN, AgentBelief


class PredictorError(Exception):
    pass


class TransportError(PredictorError):
    pass


class PredictorTimeout(PredictorError, TimeoutError):
    pass


class ReplayMismatch(Exception):
    """A replayed episode diverged from its transcript."""


@dataclass(frozen=True, eq=False)
class PredictionQuery:
    goal: str
    agent_pos: Cell
    seen_occ: np.ndarray
    seen_sem: Mapping[Cell, Mapping[str, str]]
    pattern_notes: tuple[str, ...] = ()
    k: int = 5

    @classmethod
    def from_belief(cls, goal: str, agent_pos: Cell, belief: AgentBelief, k: int = 5) -> "PredictionQuery":
        return cls(goal, tuple(agent_pos), belief.seen_occ, belief.seen_sem, belief.pattern_notes, k)


@dataclass(frozen=True)
class PredictionResult:
    reasoning: str = ""
    patterns: tuple[str, ...] = ()
    region: Region | None = None

    @property
    def abstained(self) -> bool:
        return self.region is None


ABSTAIN = PredictionResult()


class GoalRegionPredictor(ABC):
    """``predict`` must be deterministic for identical queries unless
    ``deterministic`` is False, in which case callers keep a transcript."""

    deterministic = True

    @abstractmethod
    def predict(self, query: PredictionQuery) -> PredictionResult:
        ...


# --- sign parsing -----------------------------------------------------------

_DASHES = "-–—"
_DIRECTION_WORDS = (
    ("to the right", Region.RIGHT),
    ("to the left", Region.LEFT),
    ("downwards", Region.DOWN),
    ("upwards", Region.UP),
    ("down", Region.DOWN),
    ("up", Region.UP),
    ("→", Region.RIGHT),
    ("←", Region.LEFT),
    ("↑", Region.UP),
    ("↓", Region.DOWN),
)
_ROOMS_PREFIX = re.compile(r"^\s*rooms?\b", re.IGNORECASE)
_RANGE = re.compile(rf"^\s*(\d+)[A-Za-z]*\s*[{_DASHES}]\s*(\d+)[A-Za-z]*\s*$")
_SINGLE = re.compile(r"^\s*(\d+)([A-Za-z]*)\s*$")


def _clause_direction(body: str) -> tuple[str, Region] | None:
    text = body.rstrip().rstrip(".").rstrip()
    lowered = text.lower()
    for word, region in _DIRECTION_WORDS:
        if lowered.endswith(word):
            head = text[: len(text) - len(word)]
            # words must stand alone ("setup" is not "up")
            if word[0].isalpha() and head and head[-1].isalnum():
                continue
            return head, region
    return None


def _item_covers(item: str, goal_key: tuple[int, str]) -> bool:
    m = _RANGE.match(item)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        return min(lo, hi) <= goal_key[0] <= max(lo, hi)
    m = _SINGLE.match(item)
    if m:
        if int(m.group(1)) != goal_key[0]:
            return False
        suffix = m.group(2).upper()
        return not suffix or suffix == goal_key[1]
    return False


def parse_sign(sign_text: str, goal: str) -> Region | None:
    """Direction a sign gives for ``goal``, or None.

    A sign is a ';'-separated list of clauses "Rooms <items> <direction>".
    Items are identifiers or ranges "a-b" (hyphen, en or em dash). A bare
    number covers suffixed rooms ("641" covers "641L"); a suffixed item
    only itself. Bytes are decoded as UTF-8 with replacement. Never
    raises: unparseable text yields None.
    """
    try:
        if isinstance(sign_text, (bytes, bytearray)):
            sign_text = bytes(sign_text).decode("utf-8", errors="replace")
        goal_key = identifier_key(goal)
        if goal_key is None or not isinstance(sign_text, str):
            return None
        for clause in sign_text.split(";"):
            m = _ROOMS_PREFIX.match(clause)
            if not m:
                continue
            parsed = _clause_direction(clause[m.end():])
            if parsed is None:
                continue
            items, region = parsed
            if any(_item_covers(item, goal_key) for item in items.split(",")):
                return region
    except (ValueError, OverflowError, RecursionError):
        return None
    return None


# --- rule-based predictor ----------------------------------------------------

_AXIS_WORDS = {
    ("col", 1): (Region.RIGHT, "room numbers increase to the right"),
    ("col", -1): (Region.LEFT, "room numbers increase to the left"),
    ("row", 1): (Region.DOWN, "room numbers increase downwards"),
    ("row", -1): (Region.UP, "room numbers increase upwards"),
}


def _correlation(x: np.ndarray, y: np.ndarray) -> float:
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])


def _parity_bands(rooms: list[tuple[int, Cell]]) -> bool:
    odd = [cell for n, cell in rooms if n % 2]
    even = [cell for n, cell in rooms if not n % 2]
    if len(odd) < 2 or len(even) < 2:
        return False
    for axis in (0, 1):
        if not {c[axis] for c in odd} & {c[axis] for c in even}:
            return True
    return False


_FIT_TOLERANCE = 1e-6


def _sign_bounds(directives: list[tuple[Cell, Region]]) -> tuple[list[float], list[float]] | None:
    """Open box [row_lo, row_hi] x [col_lo, col_hi] allowed by every directive.

    A directive is relative to its sign: "to the right" at column c means
    the goal's column exceeds c. None when the directives contradict.
    """
    rows, cols = [-np.inf, np.inf], [-np.inf, np.inf]
    for (r, c), region in directives:
        if region is Region.UP:
            rows[1] = min(rows[1], r)
        elif region is Region.DOWN:
            rows[0] = max(rows[0], r)
        elif region is Region.LEFT:
            cols[1] = min(cols[1], c)
        else:
            cols[0] = max(cols[0], c)
    if rows[1] - rows[0] < 2 or cols[1] - cols[0] < 2:
        return None
    return rows, cols


def _sign_region(q: PredictionQuery) -> PredictionResult | None:
    """Direction implied by the visible signs that mention the goal.

    Normally the nearest such sign decides. When signs point in opposite
    directions along one axis (one says up, another down) each directive is
    read relative to its own sign, which brackets the goal between them:
    outside the bracket the agent heads into it, inside it the directives
    on that axis are spent and the remaining ones decide, or the predictor
    abstains (the bracket overrides any numbering trend).
    Brackets with no room inside fall back to the nearest sign.
    """
    ar, ac = q.agent_pos
    signs = sorted(
        (abs(cell[0] - ar) + abs(cell[1] - ac), cell, attrs[SIGN_TEXT])
        for cell, attrs in q.seen_sem.items()
        if SIGN_TEXT in attrs
    )
    directives = []
    for _, cell, text in signs:
        region = parse_sign(text, q.goal)
        if region is not None:
            directives.append((cell, region))
    if not directives:
        return None
    regions = {region for _, region in directives}
    opposed = [
        axis for axis, (lo, hi) in (("row", (Region.DOWN, Region.UP)), ("col", (Region.RIGHT, Region.LEFT)))
        if lo in regions and hi in regions
    ]
    bounds = _sign_bounds(directives) if opposed else None
    if bounds is not None:
        (row_lo, row_hi), (col_lo, col_hi) = bounds
        gaps = {
            Region.DOWN: row_lo + 1 - ar,
            Region.UP: ar - (row_hi - 1),
            Region.RIGHT: col_lo + 1 - ac,
            Region.LEFT: ac - (col_hi - 1),
        }
        outside = [(-gap, region) for region, gap in gaps.items() if gap > 0 and region in regions]
        if outside:
            region = min(outside, key=lambda t: (t[0], [r for _, r in directives].index(t[1])))[1]
            cells = [list(cell) for cell, r in directives if r is region]
            return PredictionResult(
                reasoning=f"signs bracket room {q.goal}; signs at {cells} place it {region.value}",
                patterns=("sign directive",),
                region=region,
            )
        spent = {r for axis in opposed for r in ((Region.DOWN, Region.UP) if axis == "row" else (Region.RIGHT, Region.LEFT))}
        directives = [(cell, r) for cell, r in directives if r not in spent]
        if not directives:
            return PredictionResult(
                reasoning=f"signs bracket room {q.goal} around the agent; exploring locally",
                patterns=("sign directive",),
            )
    cell, region = directives[0]
    return PredictionResult(
        reasoning=f"sign at {list(cell)} lists room {q.goal} as {region.value}",
        patterns=("sign directive",),
        region=region,
    )


def rule_predict(q: PredictionQuery) -> PredictionResult:
    """Sign directives, then numbering trends, else abstain."""
    from_signs = _sign_region(q)
    if from_signs is not None:
        return from_signs
    ar, ac = q.agent_pos

    goal_num = numeric_part(q.goal)
    rooms = []
    for cell, attrs in sorted(q.seen_sem.items()):
        n = numeric_part(attrs.get(ROOM_NUMBER, "") or "")
        if n is not None:
            rooms.append((n, cell))
    if goal_num is None or len({cell for _, cell in rooms}) < 2:
        return PredictionResult(reasoning="not enough numbered rooms seen", region=None)

    patterns = []
    if _parity_bands(rooms):
        patterns.append("odd/even separation")
        same_class = [(n, cell) for n, cell in rooms if n % 2 == goal_num % 2]
        if len({cell for _, cell in same_class}) >= 2:
            rooms = same_class

    values = np.array([n for n, _ in rooms], dtype=float)
    rows = np.array([cell[0] for _, cell in rooms], dtype=float)
    cols = np.array([cell[1] for _, cell in rooms], dtype=float)
    corr_col, corr_row = _correlation(cols, values), _correlation(rows, values)
    if corr_col == 0.0 and corr_row == 0.0:
        return PredictionResult(reasoning="no numbering trend", patterns=tuple(patterns))
    if abs(corr_col) >= abs(corr_row):
        axis, coords, here = "col", cols, ac
    else:
        axis, coords, here = "row", rows, ar
    slope, intercept = np.polyfit(coords, values, 1)
    expected = intercept + slope * here
    trend = 1 if slope > 0 else -1
    direction, note = _AXIS_WORDS[(axis, trend)]
    patterns.append(note)
    reasoning = (
        f"{len(rooms)} rooms fit number = {intercept:.2f} + {slope:.3f}*{axis}; "
        f"expected {expected:.1f} at agent {axis} {here}, goal {q.goal}"
    )
    # least-squares output carries rounding noise; an exact fit must still abstain
    if abs(goal_num - expected) <= _FIT_TOLERANCE:
        region = None
    elif goal_num > expected:
        region = direction
    else:
        region = _OPPOSITE[direction]
    return PredictionResult(reasoning=reasoning, patterns=tuple(patterns), region=region)


_OPPOSITE = {
    Region.UP: Region.DOWN,
    Region.DOWN: Region.UP,
    Region.LEFT: Region.RIGHT,
    Region.RIGHT: Region.LEFT,
}


class RuleBasedPredictor(GoalRegionPredictor):
    def predict(self, query: PredictionQuery) -> PredictionResult:
        return rule_predict(query)


# --- test doubles ------------------------------------------------------------

_REGIONS = (Region.UP, Region.DOWN, Region.LEFT, Region.RIGHT)


def uniform_predict(q: PredictionQuery, rng_seed: int, ordinal: int = 0) -> PredictionResult:
    """Seeded uniform region; the draw depends only on (seed, ordinal)."""
    rng = np.random.default_rng([int(rng_seed) & 0xFFFFFFFFFFFFFFFF, int(ordinal)])
    return PredictionResult(reasoning="uniform draw", region=_REGIONS[int(rng.integers(4))])


class UniformPredictor(GoalRegionPredictor):
    def __init__(self, seed: int):
        self.seed = seed
        self.ordinal = 0

    def predict(self, query: PredictionQuery) -> PredictionResult:
        result = uniform_predict(query, self.seed, self.ordinal)
        self.ordinal += 1
        return result


class ScriptedPredictor(GoalRegionPredictor):
    def __init__(self, script: Sequence[Region | str | None]):
        self.script = [None if r is None else Region(r) for r in script]
        self.position = 0

    def predict(self, query: PredictionQuery) -> PredictionResult:
        if self.position >= len(self.script):
            return ABSTAIN
        region = self.script[self.position]
        self.position += 1
        return PredictionResult(reasoning="scripted", region=region)


def scripted_predict(script: Sequence[Region | str | None]) -> ScriptedPredictor:
    return ScriptedPredictor(script)


class AbstainingPredictor(GoalRegionPredictor):
    def predict(self, query: PredictionQuery) -> PredictionResult:
        return ABSTAIN


def true_region(agent_pos: Cell, target: Cell) -> Region | None:
    """Half-plane holding ``target``; the dominant axis wins, columns on ties."""
    dr, dc = target[0] - agent_pos[0], target[1] - agent_pos[1]
    if dr == 0 and dc == 0:
        return None
    if abs(dc) >= abs(dr):
        return Region.RIGHT if dc > 0 else Region.LEFT
    return Region.DOWN if dr > 0 else Region.UP


class OraclePredictor(GoalRegionPredictor):
    """Ground-truth direction to the goal; an upper bound for the control loop."""

    def __init__(self, target: Cell | GoalSpec):
        self.target = target.target_cell if isinstance(target, GoalSpec) else tuple(target)

    def predict(self, query: PredictionQuery) -> PredictionResult:
        return PredictionResult(reasoning="oracle", region=true_region(query.agent_pos, self.target))

    @classmethod
    def for_goal(cls, env: Environment, identifier: str) -> "OraclePredictor":
        return cls(GoalSpec.resolve(env, identifier))


# --- external predictor ------------------------------------------------------


def query_to_wire(q: PredictionQuery) -> dict:
    chars = {UNKNOWN: "-", 0: "0", 1: "1"}
    semantics = []
    for cell in sorted(q.seen_sem):
        attrs = q.seen_sem[cell]
        entry: dict = {"cell": [int(cell[0]), int(cell[1])]}
        for key in (ROOM_NUMBER, SIGN_TEXT):
            if key in attrs:
                entry[key] = attrs[key]
        if len(entry) > 1:
            semantics.append(entry)
    return {
        "goal": q.goal,
        "agent": [int(q.agent_pos[0]), int(q.agent_pos[1])],
        "k": int(q.k),
        "seen_occupancy": ["".join(chars[int(v)] for v in row) for row in np.asarray(q.seen_occ).tolist()],
        "semantics": semantics,
        "pattern_notes": list(q.pattern_notes),
    }


def result_from_wire(doc) -> PredictionResult:
    """Parse a response body. Out-of-enum regions become abstentions with the
    raw value kept in the reasoning text."""
    if not isinstance(doc, dict):
        raise TransportError(f"response is not a JSON object: {doc!r}")
    reasoning = doc.get("reasoning") or ""
    if not isinstance(reasoning, str):
        reasoning = json.dumps(reasoning, ensure_ascii=False)
    patterns = doc.get("patterns") or []
    if not isinstance(patterns, list):
        patterns = [patterns]
    patterns = tuple(p if isinstance(p, str) else json.dumps(p, ensure_ascii=False) for p in patterns)
    raw = doc.get("region")
    region = Region.parse(raw)
    if raw is not None and region is None:
        reasoning = f"{reasoning} [unrecognized region {json.dumps(raw, ensure_ascii=False)}]".strip()
    return PredictionResult(reasoning=reasoning, patterns=patterns, region=region)


def post_json(endpoint: str, payload: dict, timeout: float) -> dict:
    body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
    request = urllib.request.Request(
        endpoint, data=body, headers={"Content-Type": "application/json"}, method="POST"
    )
    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            raw = response.read()
    except (socket.timeout, TimeoutError) as exc:
        raise PredictorTimeout(f"{endpoint} timed out after {timeout}s") from exc
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, (socket.timeout, TimeoutError)):
            raise PredictorTimeout(f"{endpoint} timed out after {timeout}s") from exc
        raise TransportError(f"{endpoint}: {exc.reason}") from exc
    except (OSError, ValueError) as exc:
        raise TransportError(f"{endpoint}: {exc}") from exc
    try:
        return json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TransportError(f"{endpoint} returned invalid JSON: {exc}") from exc


@dataclass
class TranscriptLog:
    """Request/response pairs, optionally mirrored to an NDJSON file."""

    path: Path | None = None
    records: list[dict] = field(default_factory=list)

    def append(self, request: dict, response) -> dict:
        record = {"t": len(self.records), "request": request, "response": response}
        self.records.append(record)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
        return record


def load_transcript(path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def external_predict(
    endpoint: str,
    q: PredictionQuery,
    timeout: float = 30.0,
    transcript: TranscriptLog | None = None,
) -> PredictionResult:
    request = query_to_wire(q)
    try:
        response = post_json(endpoint, request, timeout)
    except PredictorError as exc:
        if transcript is not None:
            transcript.append(request, {"error": type(exc).__name__, "message": str(exc)})
        raise
    if transcript is not None:
        transcript.append(request, response)
    return result_from_wire(response)


class ExternalPredictor(GoalRegionPredictor):
    deterministic = False

    def __init__(self, endpoint: str, timeout: float = 30.0, transcript: TranscriptLog | None = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self.transcript = transcript if transcript is not None else TranscriptLog()

    def predict(self, query: PredictionQuery) -> PredictionResult:
        return external_predict(self.endpoint, query, self.timeout, self.transcript)


class ReplayPredictor(GoalRegionPredictor):
    """Plays back a transcript. Recorded failures are re-raised so the agent
    takes the same fallback it took live."""

    def __init__(self, records: Sequence[dict], strict: bool = True):
        self.records = list(records)
        self.strict = strict
        self.position = 0

    @classmethod
    def from_file(cls, path, strict: bool = True) -> "ReplayPredictor":
        return cls(load_transcript(path), strict)

    def predict(self, query: PredictionQuery) -> PredictionResult:
        if self.position >= len(self.records):
            raise ReplayMismatch("transcript exhausted")
        record = self.records[self.position]
        self.position += 1
        if self.strict and record["request"] != query_to_wire(query):
            raise ReplayMismatch(f"query {record['t']} differs from the recorded request")
        response = record["response"]
        if isinstance(response, dict) and "error" in response and "region" not in response:
            cls = PredictorTimeout if response["error"] == "PredictorTimeout" else TransportError
            raise cls(response.get("message", "recorded failure"))
        return result_from_wire(response)

